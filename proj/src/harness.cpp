#include "ips2pc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>
#include <sstream>
#include <thread>

#include "ips2pc/mac.hpp"
#include "json.hpp"

namespace ips2pc {

using json = nlohmann::json;

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::AdditiveShare: return "additive-share";
    case Strategy::BadDegreeReduction: return "bad-degree-reduction";
    case Strategy::SkipBlinding: return "skip-blinding";
    case Strategy::TamperInputMac: return "tamper-input-mac";
    case Strategy::WatchEvade: return "watch-evade";
  }
  return "?";
}

AdversarySpec parse_adversary(const std::string& text) {
  AdversarySpec a;
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  bool found = false;
  for (auto s : {Strategy::None, Strategy::AdditiveShare, Strategy::BadDegreeReduction, Strategy::SkipBlinding,
                 Strategy::TamperInputMac, Strategy::WatchEvade})
    if (name == to_string(s)) {
      a.strategy = s;
      found = true;
    }
  if (!found) throw std::invalid_argument("unknown adversary strategy '" + name + "'");
  if (colon == std::string::npos) return a;

  std::istringstream args(text.substr(colon + 1));
  std::string kv;
  while (std::getline(args, kv, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("adversary argument '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    auto number = [&](const std::string& v) {
      std::size_t used = 0;
      unsigned long long x = 0;
      try {
        x = std::stoull(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != v.size() || v.empty()) throw std::invalid_argument("adversary argument '" + key + "' is not a number");
      return static_cast<uint64_t>(x);
    };
    if (key == "layer") a.layer = static_cast<uint32_t>(number(value));
    else if (key == "delta") a.delta = number(value);
    else if (key == "count") a.count = number(value);
    else if (key == "party") a.party = static_cast<int>(number(value));
    else if (key == "server") a.servers = {number(value)};
    else if (key == "servers") {
      std::istringstream list(value);
      std::string item;
      while (std::getline(list, item, ';')) a.servers.push_back(number(item));
    } else {
      throw std::invalid_argument("unknown adversary argument '" + key + "'");
    }
  }
  if (a.party != 0 && a.party != 1) throw std::invalid_argument("adversary party must be 0 or 1");
  if (a.delta == 0 && a.strategy != Strategy::None && a.strategy != Strategy::SkipBlinding)
    throw std::invalid_argument("adversary delta must be nonzero");
  return a;
}

std::string to_string(const AdversarySpec& a) {
  std::ostringstream s;
  s << to_string(a.strategy) << ":party=" << a.party;
  switch (a.strategy) {
    case Strategy::AdditiveShare:
      s << ",layer=" << a.layer << ",delta=" << a.delta;
      if (!a.servers.empty()) {
        s << ",servers=";
        for (std::size_t i = 0; i < a.servers.size(); ++i) s << (i ? ";" : "") << a.servers[i];
      }
      break;
    case Strategy::WatchEvade:
      if (a.servers.empty()) s << ",count=" << a.count;
      else s << ",server=" << a.servers[0];
      s << ",delta=" << a.delta;
      break;
    case Strategy::BadDegreeReduction:
    case Strategy::TamperInputMac: s << ",delta=" << a.delta; break;
    default: break;
  }
  return s.str();
}

LocalRunOptions local_options(uint64_t seed) {
  LocalRunOptions o;
  const Seed root = seed_from_u64(seed);
  o.master[0] = derive_seed(root, "party", 0);
  o.master[1] = derive_seed(root, "party", 1);
  o.dealer_seed = derive_seed(root, "dealer");
  return o;
}

// ---------------------------------------------------------------------------
// experiments

namespace {

enum class Outcome : uint8_t { Correct, Silent, Abort };

struct Trial {
  Outcome outcome = Outcome::Correct;
  std::string stage;
};

std::vector<std::size_t> distinct_servers(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(count, n));
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<Fe> random_vec(const PrimeField& F, std::size_t count, std::mt19937_64& rng) {
  std::vector<Fe> v(count);
  for (auto& x : v) x = F.sample(rng);
  return v;
}

}  // namespace

PartyHooks adversary_hooks(const AdversarySpec& adv, const CodeSpec& spec, const Schedule& s, std::mt19937_64& rng) {
  const PrimeField& F = spec.field;
  const ProtocolParams& p = s.params();
  const Fe delta = F.from_u64(adv.delta);
  PartyHooks hooks;
  switch (adv.strategy) {
    case Strategy::AdditiveShare: {
      const auto servers = adv.servers.empty() ? distinct_servers(p.n, p.e, rng) : adv.servers;
      if (servers.size() > p.e) throw std::invalid_argument("additive-share touches more than e servers");
      for (auto j : servers)
        if (j >= p.n) throw std::invalid_argument("server index out of range");
      const uint32_t layer = std::clamp<uint32_t>(adv.layer, 1, static_cast<uint32_t>(s.circuit().depth()));
      hooks.share_attacks.push_back({s.out_row(layer, 0), servers, std::vector<Fe>(servers.size(), delta)});
      break;
    }
    case Strategy::BadDegreeReduction:
      hooks.client_tamper = [&spec, delta](const Step& step, std::vector<Codeword>& msgs) {
        if (step.kind != StepKind::Reduce || msgs.empty()) return;
        std::vector<Fe> block(spec.w, spec.field.zero());
        block[0] = delta;
        const Codeword shift = encode_deterministic(spec, block);
        for (std::size_t j = 0; j < shift.size(); ++j) msgs[0][j] = spec.field.add(msgs[0][j], shift[j]);
      };
      break;
    case Strategy::SkipBlinding:
      hooks.client_tamper = [&s, &spec, party = adv.party](const Step& step, std::vector<Codeword>& msgs) {
        if (step.kind != StepKind::Blinding) return;
        for (std::size_t i = 0; i < msgs.size(); ++i)
          if (client_writes(s, step.targets[i], party)) msgs[i].assign(spec.n, spec.field.zero());
      };
      break;
    case Strategy::WatchEvade:
      hooks.evade_servers = adv.servers.empty() ? distinct_servers(p.n, adv.count, rng) : adv.servers;
      for (auto j : hooks.evade_servers)
        if (j >= p.n) throw std::invalid_argument("server index out of range");
      hooks.evade_delta = delta;
      break;
    case Strategy::TamperInputMac:
      throw std::invalid_argument("tamper-input-mac changes inputs, not protocol messages");
    case Strategy::None: break;
  }
  return hooks;
}

namespace {

Trial run_trial(const ExperimentConfig& cfg, const CodeSpec& spec, std::size_t index) {
  const PrimeField& F = *cfg.field;
  const ProtocolParams& p = cfg.params;
  const AdversarySpec& adv = cfg.adversary;
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + index);
  LayeredCircuit c;
  if (cfg.circuit) {
    c = *cfg.circuit;
  } else {
    RandomCircuitOptions opt = cfg.random;
    opt.width = static_cast<uint32_t>(p.w);
    c = random_circuit(rng, opt);
  }
  auto opts = local_options(cfg.seed * 1000003ULL + index);
  PartyHooks& hooks = opts.hooks[adv.party];
  const Fe delta = F.from_u64(adv.delta);
  const int peer = 1 - adv.party;

  auto judge = [&](const LocalRun& run, const std::vector<Fe>& outputs, const std::vector<Fe>& want) {
    Trial t;
    if (!run.accepted()) {
      t.outcome = Outcome::Abort;
      const auto& who = run.party[peer].abort ? run.party[peer] : run.party[adv.party];
      t.stage = who.abort ? who.abort->stage : "unknown";
    } else {
      t.outcome = outputs == want ? Outcome::Correct : Outcome::Silent;
    }
    return t;
  };

  if (adv.strategy == Strategy::TamperInputMac) {
    const MacCircuit m = augment_with_mac(c);
    const Schedule s(m.circuit, p);
    Prg krng(derive_seed(seed_from_u64(cfg.seed), "mac-keys", index));
    MacInput in[2] = {mac_input(F, random_vec(F, m.inputs[0], rng), krng),
                      mac_input(F, random_vec(F, m.inputs[1], rng), krng)};
    const auto want = eval_plain(F, c, in[0].values, in[1].values);
    MacInput& mine = in[adv.party];
    if (!mine.values.empty()) {
      auto& v = mine.values[rng() % mine.values.size()];
      v = F.add(v, delta);
    }
    const FPrimeResult r = run_f_prime(spec, s, m, in[0], in[1], opts);
    Trial t = judge(r.run, r.outputs, want);
    if (t.outcome != Outcome::Abort && !r.accepted) {
      t.outcome = Outcome::Abort;
      t.stage = "mac-flag";
    }
    return t;
  }

  const Schedule s(c, p);
  hooks = adversary_hooks(adv, spec, s, rng);
  const auto x = random_vec(F, c.input_count(InputOwner::Party0), rng);
  const auto y = random_vec(F, c.input_count(InputOwner::Party1), rng);
  opts.keep_state = c.input_count(InputOwner::Coin) > 0;
  const LocalRun run = run_local(spec, s, x, y, opts);
  return judge(run, run.party[peer].outputs, eval_plain(F, c, x, y, run.party[peer].coins));
}

}  // namespace

ExperimentResult run_adversary_experiment(const ExperimentConfig& cfg) {
  if (!cfg.field) throw std::invalid_argument("experiment needs a field");
  validate_params(cfg.params, *cfg.field);
  const CodeSpec spec = make_code_spec(*cfg.field, cfg.params.n, cfg.params.k, cfg.params.w);
  std::vector<Trial> trials(cfg.trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cfg.trials;) {
      try {
        trials[i] = run_trial(cfg, spec, i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
        next = cfg.trials;
      }
    }
  };
  // each local run already uses two threads
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency() / 2);
  const unsigned n = std::max(1u, std::min<unsigned>(cfg.threads ? cfg.threads : hw, static_cast<unsigned>(cfg.trials)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);

  ExperimentResult r;
  r.trials = cfg.trials;
  for (const auto& t : trials) {
    switch (t.outcome) {
      case Outcome::Correct: ++r.correct_outputs; break;
      case Outcome::Silent: ++r.silent_corruptions; break;
      case Outcome::Abort:
        ++r.aborts;
        ++r.abort_stages[t.stage];
        break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// bench

BenchReport bench(const PrimeField& F, const ProtocolParams& p, const LayeredCircuit& c, std::span<const Fe> x,
                  std::span<const Fe> y, std::size_t batch, uint64_t seed) {
  validate_params(p, F);
  const CodeSpec spec = make_code_spec(F, p.n, p.k, p.w);
  const Schedule s(c, p);
  BenchReport r;
  r.field = F.name();
  r.params = p;
  r.batch = batch;
  r.depth = c.depth();
  r.mul_blocks = c.mul_blocks();
  const auto t0 = std::chrono::steady_clock::now();
  const LocalRun run = run_local(spec, s, x, y, local_options(seed));
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.accepted = run.accepted();
  if (r.accepted)
    for (Fe v : run.party[0].outputs) r.outputs.push_back(F.to_signed(v));
  r.abort = run.party[0].abort ? run.party[0].abort : run.party[1].abort;
  for (int i = 0; i < 2; ++i) {
    const auto& st = run.party[i].stats;
    r.party[i] = {{st.seconds_setup, st.seconds_offline, st.seconds_online},
                  run.party[i].ledger,
                  st.ole_invocations,
                  st.oles_consumed};
    r.estimate[i] = estimate_communication(s, F, i);
    r.reconcile[i] = reconcile(r.estimate[i], run.party[i].ledger);
  }
  return r;
}

namespace {

json counter_json(const Counter& c) {
  return {{"payload_bytes", c.payload}, {"frames", c.frames}, {"wire_bytes", c.total()}};
}

json ledger_json(const ByteLedger& l) {
  json j;
  j["total"] = counter_json(l.total());
  for (const auto& [ph, c] : l.by_phase()) j["by_phase"][std::string(to_string(ph))] = counter_json(c);
  for (const auto& [t, c] : l.by_term()) j["by_term"][t] = counter_json(c);
  for (const auto& [t, c] : l.by_type()) j["by_type"][std::string(to_string(t))] = counter_json(c);
  return j;
}

json abort_json(const std::optional<AbortInfo>& a) {
  if (!a) return nullptr;
  json j{{"stage", a->stage}, {"reason", a->reason}};
  j["rep"] = a->rep;
  if (a->row) j["row"] = *a->row;
  return j;
}

json signed_json(const PrimeField& F, std::span<const Fe> v) {
  json j = json::array();
  for (Fe x : v) j.push_back(F.to_signed(x));
  return j;
}

json params_json(const ProtocolParams& p) {
  return {{"n", p.n}, {"k", p.k}, {"w", p.w}, {"t", p.t}, {"e", p.e}, {"sigma", p.sigma}, {"kappa", p.kappa}, {"s", p.s}};
}

}  // namespace

std::string to_json(const BenchReport& r) {
  json j;
  j["field"] = r.field;
  j["params"] = params_json(r.params);
  j["batch"] = r.batch;
  j["depth"] = r.depth;
  j["mul_blocks"] = r.mul_blocks;
  j["accepted"] = r.accepted;
  j["wall_seconds"] = r.wall_seconds;
  j["abort"] = abort_json(r.abort);
  j["outputs"] = r.outputs;
  const double b = static_cast<double>(std::max<std::size_t>(r.batch, 1));
  for (int i = 0; i < 2; ++i) {
    const auto& pr = r.party[i];
    json pj;
    pj["seconds"] = {{"setup", pr.seconds[0]}, {"offline", pr.seconds[1]}, {"online", pr.seconds[2]}};
    pj["ledger"] = ledger_json(pr.ledger);
    pj["ole_invocations"] = pr.ole_invocations;
    pj["oles_consumed"] = pr.oles_consumed;
    pj["per_instance"] = {{"wire_bytes", static_cast<double>(pr.ledger.total().total()) / b},
                          {"seconds", (pr.seconds[0] + pr.seconds[1] + pr.seconds[2]) / b},
                          {"oles_consumed", static_cast<double>(pr.oles_consumed) / b}};
    for (const auto& [t, c] : pr.ledger.by_term())
      pj["per_instance"]["by_term"][t] = static_cast<double>(c.total()) / b;
    json est;
    for (const auto& [t, c] : r.estimate[i].terms) est["terms"][t] = counter_json(c);
    const auto& th = r.estimate[i].closed_form;
    est["closed_form_bits"] = {{"watchlist_setup", th.watchlist_setup}, {"passive", th.passive},
                               {"layer_outputs", th.layer_outputs},     {"coin_toss", th.coin_toss},
                               {"degree_test", th.degree_test},         {"perm_eq_tests", th.perm_eq_tests},
                               {"total", th.total()}};
    est["framing_bytes"] = r.reconcile[i].framing_bytes;
    est["residual"] = r.reconcile[i].residual;
    est["exact"] = r.reconcile[i].exact();
    pj["estimate"] = est;
    j["party"].push_back(pj);
  }
  return j.dump(2);
}

std::string to_json(const ExperimentResult& r, const ExperimentConfig& cfg) {
  json j;
  j["field"] = cfg.field ? cfg.field->name() : "";
  j["params"] = params_json(cfg.params);
  j["adversary"] = to_string(cfg.adversary);
  j["seed"] = cfg.seed;
  j["trials"] = r.trials;
  j["silent_corruptions"] = r.silent_corruptions;
  j["aborts"] = r.aborts;
  j["correct_outputs"] = r.correct_outputs;
  j["abort_rate"] = r.abort_rate();
  j["abort_stages"] = r.abort_stages;
  return j.dump(2);
}

std::string to_json(const PrimeField& F, const Schedule& s, const PartyResult& r, int party) {
  json j;
  j["field"] = F.name();
  j["params"] = params_json(s.params());
  j["party"] = party;
  j["depth"] = s.circuit().depth();
  j["mul_blocks"] = s.circuit().mul_blocks();
  j["accepted"] = r.accepted;
  j["reached"] = std::string(to_string(r.reached));
  j["abort"] = abort_json(r.abort);
  j["outputs"] = signed_json(F, r.outputs);
  j["seconds"] = {{"setup", r.stats.seconds_setup}, {"offline", r.stats.seconds_offline},
                  {"online", r.stats.seconds_online}};
  j["ledger"] = ledger_json(r.ledger);
  j["ole_invocations"] = r.stats.ole_invocations;
  j["oles_consumed"] = r.stats.oles_consumed;
  const auto est = estimate_communication(s, F, party);
  const auto rec = reconcile(est, r.ledger);
  j["estimate"] = {{"framing_bytes", rec.framing_bytes}, {"residual", rec.residual}, {"exact", rec.exact()}};
  return j.dump(2);
}

}  // namespace ips2pc
