#include <cmath>
#include <random>

#include "doctest.h"
#include "ips2pc/mac.hpp"

using namespace ips2pc;

namespace {

std::vector<Fe> random_inputs(const PrimeField& F, std::size_t count, std::mt19937_64& rng) {
  std::vector<Fe> v(count);
  for (auto& x : v) x = F.sample(rng);
  return v;
}

LocalRunOptions options(uint64_t seed) {
  LocalRunOptions o;
  o.master[0] = derive_seed(seed_from_u64(seed), "party", 0);
  o.master[1] = derive_seed(seed_from_u64(seed), "party", 1);
  o.dealer_seed = derive_seed(seed_from_u64(seed), "dealer");
  return o;
}

// Shifts one value after tagging, the way a party substituting its input would.
void tamper(const PrimeField& F, MacInput& in, std::size_t i, Fe delta) { in.values[i] = F.add(in.values[i], delta); }

}  // namespace

TEST_CASE("affine tag") {
  const PrimeField F = PrimeField::toy();
  CHECK(mac_tag(F, {Fe{3}, Fe{5}}, Fe{7}) == Fe{26});
  CHECK(mac_tag(F, {Fe{256}, Fe{0}}, Fe{1}) == Fe{256});
  Prg rng(seed_from_u64(1));
  for (int i = 0; i < 5000; ++i) CHECK_FALSE(mac_keygen(F, rng).k1 == Fe{0});
}

TEST_CASE("input validation") {
  const PrimeField F = PrimeField::toy();
  Prg rng(seed_from_u64(2));
  std::vector<Fe> v = {Fe{1}, Fe{2}, Fe{3}};
  MacInput in = mac_input(F, v, rng);
  CHECK_NOTHROW(validate_mac_input(in));
  CHECK(flatten(in).size() == 12);
  CHECK(flatten(in)[9] == in.tags[0]);

  MacInput zero = in;
  zero.keys[1] = {Fe{0}, Fe{0}};
  CHECK_THROWS_AS(validate_mac_input(zero), MacError);
  CHECK_THROWS_AS(flatten(zero), MacError);
  MacInput short_tags = in;
  short_tags.tags.pop_back();
  CHECK_THROWS_AS(validate_mac_input(short_tags), MacError);
}

TEST_CASE("augmented circuit shape") {
  std::mt19937_64 rng(3);
  RandomCircuitOptions opt;
  opt.width = 2;
  const LayeredCircuit f = random_circuit(rng, opt);
  const MacCircuit m = augment_with_mac(f);
  CHECK(m.outputs == f.outputs.size());
  CHECK(m.circuit.outputs.size() == f.outputs.size() + 1);
  CHECK(m.circuit.input_count(InputOwner::Party0) == 4 * m.inputs[0]);
  CHECK(m.circuit.input_count(InputOwner::Party1) == 4 * m.inputs[1]);
  CHECK(m.circuit.input_count(InputOwner::Coin) == m.coins + m.inputs[0] + m.inputs[1]);
  // six inputs: two Mul, two Add/Sub, then three halving Add layers
  CHECK(m.circuit.depth() == f.depth() + 4 + 3);
  const SlotRef flag = m.circuit.outputs.back();
  for (const auto& o : f.outputs) CHECK_FALSE((o.layer == flag.layer && o.block == flag.block));

  LayeredCircuit publics_only;
  publics_only.width = 1;
  publics_only.inputs = {{InputOwner::Public, {4}}};
  publics_only.layers = {{GateOp::Add, 1, {SlotRef{}}, {SlotRef{}}}};
  publics_only.outputs = {{1, 0, 0}};
  CHECK_THROWS_AS(augment_with_mac(publics_only), MacError);
}

TEST_CASE("plain evaluation of the augmented circuit") {
  const PrimeField F = PrimeField::toy();
  std::mt19937_64 rng(4);
  Prg krng(seed_from_u64(4));
  for (int trial = 0; trial < 200; ++trial) {
    RandomCircuitOptions opt;
    opt.width = 1 + static_cast<uint32_t>(rng() % 3);
    opt.party0_inputs = rng() % 4;
    opt.party1_inputs = 1 + rng() % 4;
    const LayeredCircuit f = random_circuit(rng, opt);
    const MacCircuit m = augment_with_mac(f);
    MacInput x = mac_input(F, random_inputs(F, m.inputs[0], rng), krng);
    MacInput y = mac_input(F, random_inputs(F, m.inputs[1], rng), krng);
    const auto coins = random_inputs(F, m.circuit.input_count(InputOwner::Coin), rng);

    auto out = eval_plain(F, m.circuit, flatten(x), flatten(y), coins);
    REQUIRE(out.back() == Fe{0});
    out.pop_back();
    REQUIRE(out == eval_plain(F, f, x.values, y.values));

    MacInput& victim = trial % 2 || x.values.empty() ? y : x;
    tamper(F, victim, rng() % victim.values.size(), Fe{1 + rng() % 256});
    REQUIRE(eval_plain(F, m.circuit, flatten(x), flatten(y), coins).back() == mac_flag(F, m, x, y, coins));
  }
}

TEST_CASE("single tamper is flagged except when its coefficient vanishes") {
  const PrimeField F = PrimeField::toy();
  std::mt19937_64 rng(5);
  LayeredCircuit f;
  f.width = 2;
  f.inputs = {{InputOwner::Party0, {0, 1}}, {InputOwner::Party1, {0, 1}}};
  f.layers = {{GateOp::Mul, 1, {SlotRef{0, 0, 0}, SlotRef{0, 0, 1}}, {SlotRef{0, 1, 0}, SlotRef{0, 1, 1}}}};
  f.outputs = {{1, 0, 0}, {1, 0, 1}};
  const MacCircuit m = augment_with_mac(f);
  Prg krng(seed_from_u64(5));
  const int trials = 100000;
  int caught = 0;
  for (int i = 0; i < trials; ++i) {
    MacInput x = mac_input(F, random_inputs(F, 2, rng), krng);
    MacInput y = mac_input(F, random_inputs(F, 2, rng), krng);
    tamper(F, i % 2 ? x : y, rng() % 2, Fe{1 + rng() % 256});
    const auto coins = random_inputs(F, m.circuit.input_count(InputOwner::Coin), rng);
    caught += eval_plain(F, m.circuit, flatten(x), flatten(y), coins).back() != Fe{0};
  }
  const double p = 1.0 - 1.0 / 257, rate = static_cast<double>(caught) / trials;
  CHECK(rate >= p - 3 * std::sqrt(p * (1 - p) / trials));
}

TEST_CASE("F' through the compiled protocol") {
  const PrimeField F = PrimeField::toy();
  const ProtocolParams p = toy_params_b();
  const CodeSpec spec = make_code_spec(F, p.n, p.k, p.w);
  std::mt19937_64 rng(6);
  Prg krng(seed_from_u64(6));
  int flagged = 0;
  for (int trial = 0; trial < 12; ++trial) {
    RandomCircuitOptions opt;
    opt.width = static_cast<uint32_t>(p.w);
    opt.max_depth = 3;
    opt.max_blocks = 2;
    const LayeredCircuit f = random_circuit(rng, opt);
    const MacCircuit m = augment_with_mac(f);
    const Schedule s(m.circuit, p);
    MacInput x = mac_input(F, random_inputs(F, m.inputs[0], rng), krng);
    MacInput y = mac_input(F, random_inputs(F, m.inputs[1], rng), krng);
    const bool cheat = trial % 2;
    if (cheat) tamper(F, x, rng() % x.values.size(), Fe{1 + rng() % 256});
    auto opts = options(100 + trial);
    opts.keep_state = true;
    const FPrimeResult r = run_f_prime(spec, s, m, x, y, opts);
    REQUIRE(r.run.accepted());
    CHECK(r.flag == mac_flag(F, m, x, y, r.run.party[0].coins));
    CHECK(r.run.party[0].coins == r.run.party[1].coins);
    if (!cheat) {
      CHECK(r.accepted);
      CHECK(r.outputs == eval_plain(F, f, x.values, y.values));
    } else {
      flagged += !r.accepted;
      if (!r.accepted) CHECK(r.outputs.empty());
    }
  }
  CHECK(flagged >= 5);
}
