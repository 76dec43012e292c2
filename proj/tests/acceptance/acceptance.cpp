// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "ips2pc/harness.hpp"
#include "ips2pc/mac.hpp"

using namespace ips2pc;

namespace {

// tolerances
constexpr double kCorrectnessSeconds = 300;
constexpr std::size_t kOuterTrials = 100000;
constexpr double kOuterAcceptBound = 3.0 / 257;
constexpr std::size_t kRobustTrials = 500;
constexpr std::size_t kWatchTrials = 10000;
constexpr double kWatchTolerance = 0.05;
constexpr std::size_t kMacTrials = 100000;
constexpr std::size_t kMacProtocolTrials = 2000;
constexpr std::size_t kFftMax = 32;

const std::string kData = std::string(IPS2PC_SOURCE_DIR) + "/tests/data/";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<Fe> random_vec(const PrimeField& F, std::size_t count, std::mt19937_64& rng) {
  std::vector<Fe> v(count);
  for (auto& x : v) x = F.sample(rng);
  return v;
}

// 3 sigma below the mean of Binomial(n, p), as a count
double lower_3sigma(std::size_t n, double p) {
  return static_cast<double>(n) * p - 3 * std::sqrt(static_cast<double>(n) * p * (1 - p));
}

double choose(unsigned n, unsigned k) {
  double r = 1;
  for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
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

RandomCircuitOptions acceptance_circuits(uint32_t w) {
  RandomCircuitOptions o;
  o.width = w;
  o.max_depth = 6;
  o.max_blocks = 4;
  return o;
}

// ---------------------------------------------------------------------------

Outcome correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::size_t ok = 0, max_depth = 0;
  const ProtocolParams p = toy_params_b();
  for (int i = 0; i < 100; ++i) {
    const PrimeField F = i % 4 == 3 ? PrimeField::goldilocks() : PrimeField::toy();
    const CodeSpec spec = make_code_spec(F, p.n, p.k, p.w);
    const LayeredCircuit c = random_circuit(rng, acceptance_circuits(static_cast<uint32_t>(p.w)));
    max_depth = std::max(max_depth, c.depth());
    const Schedule s(c, p);
    const auto x = random_vec(F, c.input_count(InputOwner::Party0), rng);
    const auto y = random_vec(F, c.input_count(InputOwner::Party1), rng);
    const auto run = run_local(spec, s, x, y, local_options(5000 + i));
    const auto want = eval_plain(F, c, x, y);
    ok += run.accepted() && run.party[0].outputs == want && run.party[1].outputs == want;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << ok << "/100 match eval_plain, max depth " << max_depth << ", " << secs << " s (limit " << kCorrectnessSeconds
     << ")";
  return {ok == 100 && secs < kCorrectnessSeconds, os.str()};
}

Outcome outer_tests() {
  const PrimeField F = PrimeField::toy();
  const ProtocolParams p = toy_params_b();
  const CodeSpec spec = make_code_spec(F, p.n, p.k, p.w);
  std::mt19937_64 rng(77);

  std::size_t honest = 0;
  for (int i = 0; i < 100; ++i) {
    const LayeredCircuit c = random_circuit(rng, acceptance_circuits(static_cast<uint32_t>(p.w)));
    const Schedule s(c, p);
    const auto x = random_vec(F, c.input_count(InputOwner::Party0), rng);
    const auto y = random_vec(F, c.input_count(InputOwner::Party1), rng);
    const auto run = run_outer_plain(spec, s, x, y, {}, 900 + i);
    honest += run.accepted && run.outputs == eval_plain(F, c, x, y);
  }

  const Schedule s(one_mul(2), p);
  const std::vector<Fe> x{Fe{5}, Fe{6}}, y{Fe{7}, Fe{8}};
  const auto good = run_outer_plain(spec, s, x, y, {}, 12);
  auto rejections = [&](const RowStore& rows, TestKind t, uint64_t seed) {
    std::mt19937_64 coin_rng(seed);
    const std::size_t count = test_coin_count(s, t);
    std::size_t rejected = 0;
    for (std::size_t i = 0; i < kOuterTrials; ++i)
      rejected += !test_check(spec, t, test_combination(spec, s, rows, t, 0, random_vec(F, count, coin_rng))).empty();
    return rejected;
  };
  // non-codeword row
  RowStore bad_degree = good.rows;
  bad_degree[s.input_row(0)][3] = F.add(bad_degree[s.input_row(0)][3], Fe{1});
  // copied wire holding the wrong value
  RowStore bad_perm = good.rows;
  Prg prg(seed_from_u64(2));
  bad_perm[s.left_row(1, 0)] = encode(spec, Block{Fe{6}, Fe{6}}, prg);
  // client 0 skips its share of the degree reduction
  OuterHooks hooks;
  hooks.client0_tamper = [&](const Step& st, std::vector<Codeword>& msgs) {
    if (st.kind != StepKind::Reduce) return;
    Prg z(seed_from_u64(77));
    for (auto& m : msgs) m = encode(spec, Block(p.w, F.zero()), z);
  };
  const auto skipped = run_outer_plain(spec, s, x, y, {}, 12, hooks);

  const std::size_t r_deg = rejections(bad_degree, TestKind::Degree, 1);
  const std::size_t r_perm = rejections(bad_perm, TestKind::Permutation, 3);
  const std::size_t r_eq = rejections(skipped.rows, TestKind::Equality, 4);
  const double need = lower_3sigma(kOuterTrials, 1 - kOuterAcceptBound);
  std::ostringstream os;
  os << honest << "/100 honest accepted; rejections of " << kOuterTrials << ": degree " << r_deg << ", permutation "
     << r_perm << ", equality " << r_eq << " (need >= " << static_cast<std::size_t>(std::ceil(need)) << ")";
  const bool pass = honest == 100 && good.accepted && !skipped.accepted && r_deg >= need && r_perm >= need &&
                    r_eq >= need;
  return {pass, os.str()};
}

Outcome robustness() {
  std::ostringstream os;
  bool pass = true;
  ProtocolParams toy4 = toy_params_b();
  toy4.sigma = 4;
  const PrimeField gold = PrimeField::goldilocks(), toy = PrimeField::toy();
  const std::pair<const PrimeField*, ProtocolParams> runs[] = {{&gold, toy_params_b()}, {&toy, toy4}};
  for (const auto& [F, p] : runs) {
    ExperimentConfig cfg;
    cfg.field = F;
    cfg.params = p;
    cfg.adversary = parse_adversary("additive-share:delta=1");
    cfg.trials = kRobustTrials;
    cfg.seed = 31;
    cfg.random = acceptance_circuits(static_cast<uint32_t>(p.w));
    // layers 1 to 5, a fifth of the trials each
    ExperimentResult total;
    for (uint32_t layer = 1; layer <= 5; ++layer) {
      cfg.adversary.layer = layer;
      cfg.adversary.delta = layer;
      cfg.trials = kRobustTrials / 5;
      cfg.seed = 31 + layer;
      const auto r = run_adversary_experiment(cfg);
      total.trials += r.trials;
      total.silent_corruptions += r.silent_corruptions;
      total.aborts += r.aborts;
      total.correct_outputs += r.correct_outputs;
    }
    pass &= total.silent_corruptions == 0 && total.trials == kRobustTrials;
    os << F->name() << " sigma=" << p.sigma << ": " << total.silent_corruptions << " silent, " << total.aborts
       << " aborts, " << total.correct_outputs << " correct of " << total.trials << "; ";
  }
  return {pass, os.str()};
}

Outcome watchlist() {
  const PrimeField F = PrimeField::goldilocks();
  std::ostringstream os;
  bool pass = true;
  for (unsigned delta : {1u, 2u}) {
    ExperimentConfig cfg;
    cfg.field = &F;
    cfg.params = watch_params();
    cfg.circuit = one_mul(1);
    cfg.adversary = parse_adversary("watch-evade:count=" + std::to_string(delta));
    cfg.trials = kWatchTrials;
    cfg.seed = 40 + delta;
    const auto r = run_adversary_experiment(cfg);
    const unsigned n = 8, t = 2;
    const double oracle = 1 - choose(n - delta, t) / choose(n, t);
    pass &= std::abs(r.abort_rate() - oracle) <= kWatchTolerance && r.silent_corruptions == 0;
    os << "delta=" << delta << " rate " << r.abort_rate() << " (oracle " << oracle << "), " << r.silent_corruptions
       << " silent; ";
  }
  return {pass, os.str()};
}

Outcome mac_flag_criterion() {
  const PrimeField F = PrimeField::toy();
  const ProtocolParams p = toy_params_b();
  const CodeSpec spec = make_code_spec(F, p.n, p.k, p.w);
  std::mt19937_64 rng(55);
  Prg krng(seed_from_u64(55));

  // honest runs through the protocol
  std::size_t honest_zero = 0;
  const std::size_t honest_runs = 100;
  for (std::size_t i = 0; i < honest_runs; ++i) {
    RandomCircuitOptions o = acceptance_circuits(static_cast<uint32_t>(p.w));
    o.max_depth = 3;
    const LayeredCircuit f = random_circuit(rng, o);
    const MacCircuit m = augment_with_mac(f);
    const Schedule s(m.circuit, p);
    const MacInput x = mac_input(F, random_vec(F, m.inputs[0], rng), krng);
    const MacInput y = mac_input(F, random_vec(F, m.inputs[1], rng), krng);
    const auto r = run_f_prime(spec, s, m, x, y, local_options(700 + i));
    honest_zero += r.accepted && r.flag == F.zero() && r.outputs == eval_plain(F, f, x.values, y.values);
  }

  // single-element tamper, flag evaluated by the augmented circuit on fresh coins
  LayeredCircuit f;
  f.width = 2;
  f.inputs = {{InputOwner::Party0, {0, 1}}, {InputOwner::Party1, {0, 1}}};
  f.layers = {{GateOp::Mul, 1, {SlotRef{0, 0, 0}, SlotRef{0, 0, 1}}, {SlotRef{0, 1, 0}, SlotRef{0, 1, 1}}}};
  f.outputs = {{1, 0, 0}, {1, 0, 1}};
  const MacCircuit m = augment_with_mac(f);
  std::size_t caught = 0, honest_flag_zero = 0;
  for (std::size_t i = 0; i < kMacTrials; ++i) {
    MacInput in[2] = {mac_input(F, random_vec(F, 2, rng), krng), mac_input(F, random_vec(F, 2, rng), krng)};
    const auto coins = random_vec(F, m.circuit.input_count(InputOwner::Coin), rng);
    honest_flag_zero += eval_plain(F, m.circuit, flatten(in[0]), flatten(in[1]), coins).back() == F.zero();
    auto& v = in[i % 2].values[rng() % 2];
    v = F.add(v, Fe{1 + rng() % 256});
    caught += eval_plain(F, m.circuit, flatten(in[0]), flatten(in[1]), coins).back() != F.zero();
  }
  const double p_detect = 1 - 1.0 / 257;

  // the same attack end to end
  ExperimentConfig cfg;
  cfg.field = &F;
  cfg.params = p;
  cfg.adversary = parse_adversary("tamper-input-mac:delta=1");
  cfg.trials = kMacProtocolTrials;
  cfg.seed = 56;
  cfg.random = acceptance_circuits(static_cast<uint32_t>(p.w));
  cfg.random.max_depth = 3;
  const auto e = run_adversary_experiment(cfg);
  const std::size_t flagged = e.abort_stages.count("mac-flag") ? e.abort_stages.at("mac-flag") : 0;

  std::ostringstream os;
  os << "honest flag 0 in " << honest_zero << "/" << honest_runs << " protocol runs and " << honest_flag_zero << "/"
     << kMacTrials << " circuit evaluations; tamper caught " << caught << "/" << kMacTrials << " (need >= "
     << static_cast<std::size_t>(std::ceil(lower_3sigma(kMacTrials, p_detect))) << "), end to end " << flagged << "/"
     << kMacProtocolTrials << " (need >= " << static_cast<std::size_t>(std::ceil(lower_3sigma(kMacProtocolTrials, p_detect)))
     << ")";
  const bool pass = honest_zero == honest_runs && honest_flag_zero == kMacTrials &&
                    caught >= lower_3sigma(kMacTrials, p_detect) &&
                    flagged >= lower_3sigma(kMacProtocolTrials, p_detect) && e.aborts == flagged;
  return {pass, os.str()};
}

Outcome accounting() {
  std::mt19937_64 rng(88);
  std::size_t runs = 0, ole_exact = 0, bytes_exact = 0, mul_blocks = 0;
  const std::pair<PrimeField, ProtocolParams> setups[] = {{PrimeField::toy(), toy_params_b()},
                                                          {PrimeField::goldilocks(), toy_params_a()},
                                                          {PrimeField::goldilocks(), watch_params()}};
  constexpr std::size_t kOlePerProduct = 2;  // r: one OLE in each direction per GMW product
  for (const auto& [F, p] : setups) {
    const CodeSpec spec = make_code_spec(F, p.n, p.k, p.w);
    for (int i = 0; i < 15; ++i) {
      const LayeredCircuit c = random_circuit(rng, acceptance_circuits(static_cast<uint32_t>(p.w)));
      const Schedule s(c, p);
      const auto run = run_local(spec, s, random_vec(F, c.input_count(InputOwner::Party0), rng),
                                 random_vec(F, c.input_count(InputOwner::Party1), rng), local_options(300 + i));
      if (!run.accepted()) continue;
      ++runs;
      mul_blocks += c.mul_blocks();
      // every OLE instance has one sender half and one receiver half
      const std::size_t instances = (run.party[0].stats.oles_consumed + run.party[1].stats.oles_consumed) / 2;
      ole_exact += instances == p.n * c.mul_blocks() * kOlePerProduct;
      bool exact = true;
      for (int party = 0; party < 2; ++party) {
        const auto rec = reconcile(estimate_communication(s, F, party), run.party[party].ledger);
        exact &= rec.exact() && rec.residual == 0;
      }
      bytes_exact += exact;
    }
  }
  std::ostringstream os;
  os << "OLEs = n*d*" << kOlePerProduct << " in " << ole_exact << "/" << runs << " runs; bytes reconcile in "
     << bytes_exact << "/" << runs << " (" << mul_blocks << " multiplication blocks in total)";
  return {mul_blocks > 0 && runs == 45 && ole_exact == runs && bytes_exact == runs, os.str()};
}

Distance brute_distance_k2(const CodeSpec& spec, const std::vector<Fe>& v) {
  std::size_t best = spec.n + 1;
  std::vector<uint64_t> best_cw;
  for (uint64_t c0 = 0; c0 < 257; ++c0)
    for (uint64_t c1 = 0; c1 < 257; ++c1) {
      std::vector<uint64_t> cw(spec.n);
      std::size_t d = 0;
      for (std::size_t i = 0; i < spec.n; ++i) {
        cw[i] = (c0 + c1 * spec.eta[i].v) % 257;
        d += cw[i] != v[i].v;
      }
      if (d < best || (d == best && cw < best_cw)) {
        best = d;
        best_cw = cw;
      }
    }
  Distance out{best, {}};
  for (std::size_t i = 0; i < spec.n; ++i)
    if (best_cw[i] != v[i].v) out.delta.push_back(i);
  return out;
}

Outcome coding_layer() {
  const PrimeField T = PrimeField::toy();
  std::ostringstream os;

  // every (k-w)-subset of shares takes each value tuple exactly once over the randomness
  bool uniform = true;
  struct Shape {
    std::size_t n, k, w;
  };
  for (const Shape sh : {Shape{8, 3, 1}, Shape{6, 4, 2}}) {
    const CodeSpec s = make_code_spec(T, sh.n, sh.k, sh.w);
    const std::size_t free = sh.k - sh.w;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < sh.n; ++i)
      for (std::size_t j = i + 1; j < sh.n; ++j) pairs.emplace_back(i, j);
    for (uint64_t secret : {0ULL, 77ULL}) {
      std::vector<std::vector<uint16_t>> count(pairs.size(), std::vector<uint16_t>(257 * 257, 0));
      for (uint64_t a = 0; a < 257; ++a)
        for (uint64_t b = 0; b < 257; ++b) {
          const std::vector<Fe> blk(sh.w, Fe{secret}), aux{Fe{a}, Fe{b}};
          const Codeword cw = encode_with_aux(s, blk, std::span(aux).first(free));
          for (std::size_t q = 0; q < pairs.size(); ++q)
            ++count[q][cw[pairs[q].first].v * 257 + cw[pairs[q].second].v];
        }
      for (const auto& per : count)
        for (auto c : per) uniform &= c == 1;
    }
  }
  os << "privacy " << (uniform ? "exact" : "VIOLATED") << "; ";

  bool fft_ok = true;
  std::mt19937_64 rng(9);
  for (const PrimeField& F : {PrimeField::toy(), PrimeField::goldilocks()})
    for (std::size_t size = 1; size <= kFftMax; size *= 2)
      for (std::size_t len = 0; len <= size; ++len) {
        const auto coeffs = random_vec(F, len, rng);
        const auto got = fft(F, coeffs, size);
        const Fe omega = F.root_of_unity(size);
        for (std::size_t i = 0; i < size; ++i) {
          Fe acc = F.zero(), xp = F.one();
          const Fe x = F.pow(omega, i);
          for (Fe c : coeffs) {
            acc = F.add(acc, F.mul(c, xp));
            xp = F.mul(xp, x);
          }
          fft_ok &= got[i] == acc;
        }
        fft_ok &= ifft(F, got) == [&] {
          Poly padded = coeffs;
          padded.resize(size, F.zero());
          return padded;
        }();
      }
  os << "fft " << (fft_ok ? "equal" : "DIFFERS") << " to naive for sizes <= " << kFftMax << "; ";

  const CodeSpec s = make_code_spec(T, 4, 2, 1);
  std::size_t agree = 0;
  for (int i = 0; i < 100; ++i) {
    const auto v = random_vec(T, 4, rng);
    const Distance got = distance_to_code(s, v), want = brute_distance_k2(s, v);
    agree += got.d == want.d && got.delta == want.delta;
  }
  os << "distance_to_code " << agree << "/100";
  return {uniform && fft_ok && agree == 100, os.str()};
}

Outcome nn_equality() {
  const PrimeField F = PrimeField::goldilocks();
  const ProtocolParams p = nn_params();
  const QuantModel m = load_model(kData + "nn_model.json");
  const FeatureTable t = load_features(m, kData + "nn_features.csv");
  const std::size_t batch = 16;
  std::size_t equal = 0;
  for (std::size_t at = 0; at < t.rows.size(); at += batch) {
    const std::size_t B = std::min(batch, t.rows.size() - at);
    const auto cm = compile_to_circuit(m, F, B, static_cast<uint32_t>(p.w));
    const std::span<const std::vector<int64_t>> rows(t.rows.data() + at, B);
    const CodeSpec spec = make_code_spec(F, p.n, p.k, p.w);
    const Schedule s(cm.circuit, p);
    const auto run = run_local(spec, s, circuit_inputs(F, m, rows, 0), circuit_inputs(F, m, rows, 1),
                               local_options(600 + at));
    if (!run.accepted()) continue;
    const auto logits = decode_logits(F, m, run.party[1].outputs);
    for (std::size_t i = 0; i < B; ++i) equal += logits[i] == infer_clear(m, rows[i]).logits;
  }
  std::ostringstream os;
  os << equal << "/" << t.rows.size() << " fixture rows have identical logits";
  return {!t.rows.empty() && equal == t.rows.size(), os.str()};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"correctness", correctness},       {"outer-tests", outer_tests},   {"robustness", robustness},
      {"watchlist-detection", watchlist}, {"mac-flag", mac_flag_criterion}, {"accounting", accounting},
      {"coding-layer", coding_layer},     {"nn-equality", nn_equality},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %-20s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
