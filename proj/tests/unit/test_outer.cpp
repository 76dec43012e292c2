#include <map>
#include <random>

#include "doctest.h"
#include "ips2pc/outer.hpp"

using namespace ips2pc;

namespace {

std::vector<Fe> random_inputs(const PrimeField& F, std::size_t count, std::mt19937_64& rng) {
  std::vector<Fe> v(count);
  for (auto& x : v) x = F.sample(rng);
  return v;
}

struct Fixture {
  PrimeField F;
  ProtocolParams p;
  CodeSpec spec;
  Fixture(const PrimeField& field, const ProtocolParams& params)
      : F(field), p(params), spec(make_code_spec(field, params.n, params.k, params.w)) {}
};

// width-w circuit: one Add layer whose left wiring is given, right side unwired
LayeredCircuit wiring_circuit(uint32_t w, const std::vector<std::optional<SlotRef>>& left) {
  LayeredCircuit c;
  c.width = w;
  InputBlock in{InputOwner::Party0, {}};
  for (uint32_t s = 0; s < w; ++s) in.entries.push_back(s);
  c.inputs = {in};
  Layer l{GateOp::Add, 1, left, std::vector<std::optional<SlotRef>>(w)};
  c.layers = {l};
  for (uint32_t s = 0; s < w; ++s) c.outputs.push_back({1, 0, s});
  return c;
}

LayeredCircuit one_mul(uint32_t w) {
  LayeredCircuit c;
  c.width = w;
  InputBlock a{InputOwner::Party0, {}}, b{InputOwner::Party1, {}};
  for (uint32_t s = 0; s < w; ++s) {
    a.entries.push_back(s);
    b.entries.push_back(s);
  }
  c.inputs = {a, b};
  Layer l{GateOp::Mul, 1, {}, {}};
  for (uint32_t s = 0; s < w; ++s) {
    l.left.push_back(SlotRef{0, 0, s});
    l.right.push_back(SlotRef{0, 1, s});
  }
  c.layers = {l};
  for (uint32_t s = 0; s < w; ++s) c.outputs.push_back({1, 0, s});
  return c;
}

double accept_rate(const Fixture& fx, const Schedule& s, const RowStore& rows, TestKind t, std::size_t trials,
                   uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t count = test_coin_count(s, t);
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    std::vector<Fe> coins = random_inputs(fx.F, count, rng);
    if (test_check(fx.spec, t, test_combination(fx.spec, s, rows, t, 0, coins)).empty()) ++accepted;
  }
  return static_cast<double>(accepted) / static_cast<double>(trials);
}

}  // namespace

TEST_CASE("schedule layout") {
  Fixture fx(PrimeField::toy(), toy_params_b());
  std::mt19937_64 rng(7);
  RandomCircuitOptions opt;
  for (int i = 0; i < 20; ++i) {
    const auto c = random_circuit(rng, opt);
    Schedule s(c, fx.p);
    CHECK(s.x_rows().size() * fx.p.w == s.perm().x_len);
    CHECK(s.eq_pairs().size() == c.mul_blocks());
    CHECK(s.steps().front().kind == StepKind::Inputs);
    CHECK(s.steps().back().kind == StepKind::Blinding);
    CHECK(s.steps().back().targets.size() == 6 * fx.p.sigma);
    for (const auto& [prod, red] : s.eq_pairs()) {
      CHECK(s.rows()[prod].bound == 2 * fx.p.k);
      CHECK(s.rows()[red].bound == fx.p.k);
    }
    for (RowId r : s.degree_rows()) CHECK(s.rows()[r].bound == fx.p.k);
  }
  LayeredCircuit narrow = wiring_circuit(1, {SlotRef{0, 0, 0}});
  CHECK_THROWS_AS(Schedule(narrow, fx.p), CircuitError);
}

TEST_CASE("any t+e shares of an input block are independent of the secret, exhaustive toy count") {
  // n=16 k=4 w=1 t=1 e=1: shares are linear in (secret, aux1..3); count all 257^3 aux choices
  Fixture fx(PrimeField::toy(), toy_params_a());
  const CodeSpec& sp = fx.spec;
  std::vector<Codeword> basis;
  for (std::size_t j = 0; j < sp.k; ++j) {
    std::vector<Fe> blk{Fe{j == 0 ? 1u : 0u}}, aux(sp.k - 1, Fe{0});
    if (j > 0) aux[j - 1] = Fe{1};
    basis.push_back(encode_with_aux(sp, blk, aux));
  }
  for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 1}, {3, 9}, {14, 15}}) {
    for (uint64_t secret : {0u, 1u, 100u}) {
      std::vector<uint32_t> count(257 * 257, 0);
      for (uint64_t a = 0; a < 257; ++a)
        for (uint64_t b = 0; b < 257; ++b)
          for (uint64_t c = 0; c < 257; ++c) {
            const uint64_t si = (secret * basis[0][i].v + a * basis[1][i].v + b * basis[2][i].v + c * basis[3][i].v) % 257;
            const uint64_t sj = (secret * basis[0][j].v + a * basis[1][j].v + b * basis[2][j].v + c * basis[3][j].v) % 257;
            ++count[si * 257 + sj];
          }
      for (auto n : count) REQUIRE(n == 257);
    }
  }
}

TEST_CASE("single gate circuits") {
  Fixture fx(PrimeField::goldilocks(), toy_params_a());
  const auto& F = fx.F;
  LayeredCircuit add = wiring_circuit(1, {SlotRef{0, 0, 0}});
  add.inputs.push_back({InputOwner::Party1, {0}});
  add.layers[0].right = {SlotRef{0, 1, 0}};
  Schedule sa(add, fx.p);
  auto run = run_outer_plain(fx.spec, sa, std::vector<Fe>{F.from_i64(20)}, std::vector<Fe>{F.from_i64(-7)}, {}, 1);
  REQUIRE(run.accepted);
  CHECK(run.outputs == std::vector<Fe>{F.from_i64(13)});

  Schedule sm(one_mul(1), fx.p);
  run = run_outer_plain(fx.spec, sm, std::vector<Fe>{F.zero()}, std::vector<Fe>{F.from_i64(99)}, {}, 2);
  REQUIRE(run.accepted);
  CHECK(run.outputs == std::vector<Fe>{F.zero()});
  run = run_outer_plain(fx.spec, sm, std::vector<Fe>{F.from_i64(-6)}, std::vector<Fe>{F.from_i64(7)}, {}, 3);
  CHECK(run.outputs == std::vector<Fe>{F.from_i64(-42)});
}

TEST_CASE("local layers decode to blockwise results") {
  Fixture fx(PrimeField::toy(), toy_params_b());
  Schedule s(one_mul(2), fx.p);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_inputs(fx.F, 2, rng), y = random_inputs(fx.F, 2, rng);
    auto run = run_outer_plain(fx.spec, s, x, y, {}, trial);
    REQUIRE(run.accepted);
    const Codeword& u = run.rows[s.left_row(1, 0)];
    const Codeword& v = run.rows[s.right_row(1, 0)];
    const Codeword& prod = run.rows[*s.prod_row(1, 0)];
    CHECK(decode(fx.spec, u) == x);
    CHECK(decode(fx.spec, v) == y);
    CHECK(is_codeword(fx.spec, prod, 2 * fx.p.k));
    Codeword sum(fx.p.n), diff(fx.p.n);
    for (std::size_t i = 0; i < fx.p.n; ++i) {
      sum[i] = fx.F.add(u[i], v[i]);
      diff[i] = fx.F.sub(u[i], v[i]);
    }
    auto bx = decode(fx.spec, sum), dx = decode(fx.spec, diff);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(bx[j] == fx.F.add(x[j], y[j]));
      CHECK(dx[j] == fx.F.sub(x[j], y[j]));
    }
    auto px = decode(fx.spec, prod, 2 * fx.p.k);
    const Codeword& red = run.rows[s.out_row(1, 0)];
    CHECK(is_codeword(fx.spec, red, fx.p.k));
    for (std::size_t j = 0; j < 2; ++j) CHECK(px[j] == fx.F.mul(x[j], y[j]));
    CHECK(decode(fx.spec, red) == px);
  }
}

TEST_CASE("degree reduction without fresh zero encodings is the matrix map") {
  Fixture fx(PrimeField::toy(), toy_params_b());
  Schedule s(one_mul(2), fx.p);
  OuterHooks hooks;
  hooks.zero_blinding = true;
  std::mt19937_64 rng(5);
  auto x = random_inputs(fx.F, 2, rng), y = random_inputs(fx.F, 2, rng);
  auto run = run_outer_plain(fx.spec, s, x, y, {}, 9, hooks);
  REQUIRE(run.accepted);
  const Matrix A = degree_reduce_matrix(fx.spec);
  CHECK(run.rows[s.out_row(1, 0)] == apply(fx.F, A, run.rows[*s.prod_row(1, 0)]));
}

TEST_CASE("rearrangement") {
  Fixture fx(PrimeField::toy(), toy_params_b());
  const auto& F = fx.F;
  const std::vector<Fe> x{F.from_u64(17), F.from_u64(200)};
  SUBCASE("identity") {
    Schedule s(wiring_circuit(2, {SlotRef{0, 0, 0}, SlotRef{0, 0, 1}}), fx.p);
    auto run = run_outer_plain(fx.spec, s, x, {}, {}, 1);
    REQUIRE(run.accepted);
    CHECK(run.outputs == x);
  }
  SUBCASE("swap") {
    Schedule s(wiring_circuit(2, {SlotRef{0, 0, 1}, SlotRef{0, 0, 0}}), fx.p);
    auto run = run_outer_plain(fx.spec, s, x, {}, {}, 2);
    REQUIRE(run.accepted);
    CHECK(run.outputs == std::vector<Fe>{x[1], x[0]});
  }
  SUBCASE("replication") {
    Schedule s(wiring_circuit(2, {SlotRef{0, 0, 1}, SlotRef{0, 0, 1}}), fx.p);
    auto run = run_outer_plain(fx.spec, s, x, {}, {}, 3);
    REQUIRE(run.accepted);
    CHECK(run.outputs == std::vector<Fe>{x[1], x[1]});
  }
  SUBCASE("unwired slot reads zero") {
    Schedule s(wiring_circuit(2, {std::nullopt, SlotRef{0, 0, 0}}), fx.p);
    auto run = run_outer_plain(fx.spec, s, x, {}, {}, 4);
    REQUIRE(run.accepted);
    CHECK(run.outputs == std::vector<Fe>{F.zero(), x[0]});
  }
}

TEST_CASE("permutation blinding rows sum to zero at the secret points") {
  Fixture fx(PrimeField::toy(), toy_params_b());
  Prg rng(seed_from_u64(3));
  for (int i = 0; i < 50; ++i) {
    Codeword z = sample_sum_zero(fx.spec, fx.p.k + fx.p.w, rng);
    CHECK(is_codeword(fx.spec, z, fx.p.k + fx.p.w));
    auto d = decode(fx.spec, z, fx.p.k + fx.p.w);
    CHECK(fx.F.add(d[0], d[1]) == fx.F.zero());
  }
}

TEST_CASE("honest random circuits reveal the plain evaluation") {
  std::mt19937_64 rng(2024);
  RandomCircuitOptions opt;
  opt.width = 2;
  opt.max_depth = 6;
  opt.max_blocks = 4;
  for (int i = 0; i < 100; ++i) {
    const bool gold = i % 4 == 0;
    Fixture fx(gold ? PrimeField::goldilocks() : PrimeField::toy(), toy_params_b());
    const auto c = random_circuit(rng, opt);
    Schedule s(c, fx.p);
    auto x = random_inputs(fx.F, c.input_count(InputOwner::Party0), rng);
    auto y = random_inputs(fx.F, c.input_count(InputOwner::Party1), rng);
    OuterRun run;
    if (i % 2 == 0) {
      run = run_outer_plain(fx.spec, s, x, y, {}, static_cast<uint64_t>(i));
    } else {
      // each party's inputs additively split across the two clients
      std::vector<Fe> xs[2], ys[2];
      xs[0] = random_inputs(fx.F, x.size(), rng);
      ys[0] = random_inputs(fx.F, y.size(), rng);
      for (std::size_t j = 0; j < x.size(); ++j) xs[1].push_back(fx.F.sub(x[j], xs[0][j]));
      for (std::size_t j = 0; j < y.size(); ++j) ys[1].push_back(fx.F.sub(y[j], ys[0][j]));
      OuterConfig cfg;
      cfg.client_seed[0] = seed_from_u64(10 * i + 1);
      cfg.client_seed[1] = seed_from_u64(10 * i + 2);
      cfg.server_seed = seed_from_u64(10 * i + 3);
      cfg.test_seed = seed_from_u64(10 * i + 4);
      run = run_outer(fx.spec, s, xs, ys, {}, cfg);
    }
    INFO("circuit ", i, "\n", print_circuit(c));
    REQUIRE(run.accepted);
    CHECK(run.outputs == eval_plain(fx.F, c, x, y));
    REQUIRE(run.broadcasts.size() == 3);
    for (const auto& per : run.broadcasts) CHECK(per.size() == fx.p.sigma);
  }
}

TEST_CASE("repetitions use independent coins") {
  Fixture fx(PrimeField::toy(), ProtocolParams{32, 8, 2, 2, 3, 3});
  Schedule s(one_mul(2), fx.p);
  auto run = run_outer_plain(fx.spec, s, std::vector<Fe>{Fe{1}, Fe{2}}, std::vector<Fe>{Fe{3}, Fe{4}}, {}, 8);
  REQUIRE(run.accepted);
  for (const auto& per : run.broadcasts) {
    REQUIRE(per.size() == 3);
    CHECK(per[0] != per[1]);
    CHECK(per[1] != per[2]);
  }
  const Seed seed = seed_from_u64(1);
  CHECK(test_coins(fx.F, seed, TestKind::Degree, 0, 8) != test_coins(fx.F, seed, TestKind::Degree, 1, 8));
  CHECK(test_coins(fx.F, seed, TestKind::Degree, 0, 8) != test_coins(fx.F, seed, TestKind::Equality, 0, 8));
}

TEST_CASE("zero coins accept a corrupted state in every test") {
  Fixture fx(PrimeField::toy(), toy_params_b());
  Schedule s(one_mul(2), fx.p);
  auto run = run_outer_plain(fx.spec, s, std::vector<Fe>{Fe{1}, Fe{2}}, std::vector<Fe>{Fe{3}, Fe{4}}, {}, 4);
  REQUIRE(run.accepted);
  RowStore rows = run.rows;
  rows[s.left_row(1, 0)][0] = fx.F.add(rows[s.left_row(1, 0)][0], Fe{1});
  CHECK(run_tests(fx.spec, s, rows, seed_from_u64(1)).has_value());
  CHECK_FALSE(run_tests(fx.spec, s, rows, seed_from_u64(1), nullptr, std::vector<Fe>{}).has_value());
}

TEST_CASE("a circuit without multiplications passes an equality test on blinding rows alone") {
  Fixture fx(PrimeField::toy(), toy_params_b());
  Schedule s(wiring_circuit(2, {SlotRef{0, 0, 0}, SlotRef{0, 0, 1}}), fx.p);
  CHECK(test_coin_count(s, TestKind::Equality) == 0);
  auto run = run_outer_plain(fx.spec, s, std::vector<Fe>{Fe{1}, Fe{2}}, {}, {}, 4);
  REQUIRE(run.accepted);
}

TEST_CASE("output rows off the code abort the reveal") {
  Fixture fx(PrimeField::toy(), toy_params_b());
  Schedule s(one_mul(2), fx.p);
  auto run = run_outer_plain(fx.spec, s, std::vector<Fe>{Fe{1}, Fe{2}}, std::vector<Fe>{Fe{3}, Fe{4}}, {}, 4);
  RowStore rows = run.rows;
  rows[s.out_row(1, 0)][5] = fx.F.add(rows[s.out_row(1, 0)][5], Fe{1});
  std::string why;
  CHECK(reveal_outputs(fx.spec, s, rows, &why).empty());
  CHECK_FALSE(why.empty());
}

TEST_CASE("crafted violations: acceptance rates match the per-repetition bound") {
  // 10^5 coin draws on a fixed corrupted state; bound per repetition at the toy field
  Fixture fx(PrimeField::toy(), toy_params_b());
  Schedule s(one_mul(2), fx.p);
  auto run = run_outer_plain(fx.spec, s, std::vector<Fe>{Fe{5}, Fe{6}}, std::vector<Fe>{Fe{7}, Fe{8}}, {}, 12);
  REQUIRE(run.accepted);
  const std::size_t trials = 100000;
  const double margin = 0.0015;  // about 5 standard deviations at p = 2/257

  SUBCASE("degree test, one row at distance 1") {
    RowStore rows = run.rows;
    rows[s.input_row(0)][3] = fx.F.add(rows[s.input_row(0)][3], Fe{1});
    const double rate = accept_rate(fx, s, rows, TestKind::Degree, trials, 1);
    MESSAGE("degree accept rate ", rate);
    CHECK(rate <= 2.0 / 257 + margin);
  }
  SUBCASE("permutation test, one copied wire mutated") {
    RowStore rows = run.rows;
    Prg prg(seed_from_u64(2));
    const Block bad{Fe{6}, Fe{6}};  // slot 0 should hold 5
    rows[s.left_row(1, 0)] = encode(fx.spec, bad, prg);
    CHECK(test_check(fx.spec, TestKind::Degree,
                     test_combination(fx.spec, s, rows, TestKind::Degree, 0,
                                      test_coins(fx.F, seed_from_u64(1), TestKind::Degree, 0,
                                                 test_coin_count(s, TestKind::Degree))))
              .empty());
    const double rate = accept_rate(fx, s, rows, TestKind::Permutation, trials, 3);
    MESSAGE("permutation accept rate ", rate);
    CHECK(rate <= 1.0 / 257 + margin);
  }
  SUBCASE("equality test, reduction of a different codeword") {
    OuterHooks hooks;
    hooks.client0_tamper = [&](const Step& st, std::vector<Codeword>& msgs) {
      if (st.kind != StepKind::Reduce) return;
      // client 0 returns only its zero encoding, dropping its share of the product
      Prg prg(seed_from_u64(77));
      for (auto& m : msgs) m = encode(fx.spec, Block(fx.p.w, fx.F.zero()), prg);
    };
    auto bad = run_outer_plain(fx.spec, s, std::vector<Fe>{Fe{5}, Fe{6}}, std::vector<Fe>{Fe{7}, Fe{8}}, {}, 12, hooks);
    REQUIRE_FALSE(bad.accepted);
    REQUIRE(bad.abort->stage == "equality");
    const double rate = accept_rate(fx, s, bad.rows, TestKind::Equality, trials, 4);
    MESSAGE("equality accept rate ", rate);
    CHECK(rate <= 1.0 / 257 + margin);
  }
}

TEST_CASE("additive attacks on at most e servers are caught or harmless") {
  Fixture fx(PrimeField::toy(), ProtocolParams{32, 8, 2, 2, 3, 4});
  std::mt19937_64 rng(99);
  RandomCircuitOptions opt;
  opt.max_depth = 4;
  std::size_t caught = 0, harmless = 0, silent = 0;
  std::map<std::string, int> stages;
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_circuit(rng, opt);
    Schedule s(c, fx.p);
    auto x = random_inputs(fx.F, c.input_count(InputOwner::Party0), rng);
    auto y = random_inputs(fx.F, c.input_count(InputOwner::Party1), rng);
    // pick a row of a random layer
    std::vector<RowId> candidates;
    const uint32_t layer = static_cast<uint32_t>(rng() % (c.layers.size() + 1));
    for (RowId r = 0; r < s.rows().size(); ++r) {
      const auto& info = s.rows()[r];
      const bool blind = info.kind == RowKind::DegBlind || info.kind == RowKind::PermBlind || info.kind == RowKind::EqBlind;
      if (!blind && info.layer == layer) candidates.push_back(r);
    }
    AdditiveAttack atk;
    atk.row = candidates[rng() % candidates.size()];
    std::vector<std::size_t> servers(fx.p.n);
    for (std::size_t i = 0; i < fx.p.n; ++i) servers[i] = i;
    std::shuffle(servers.begin(), servers.end(), rng);
    const std::size_t count = 1 + rng() % fx.p.e;
    for (std::size_t i = 0; i < count; ++i) {
      atk.servers.push_back(servers[i]);
      atk.deltas.push_back(fx.F.sample_nonzero(rng));
    }
    OuterHooks hooks;
    hooks.attacks = {atk};
    auto run = run_outer_plain(fx.spec, s, x, y, {}, static_cast<uint64_t>(trial), hooks);
    if (!run.accepted) {
      ++caught;
      ++stages[run.abort->stage];
    } else if (run.outputs == eval_plain(fx.F, c, x, y)) {
      ++harmless;
    } else {
      ++silent;
    }
  }
  MESSAGE("caught ", caught, " harmless ", harmless);
  CHECK(silent == 0);
  CHECK(caught > 0);
}
