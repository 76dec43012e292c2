// ips2pc: run the two-party protocol, its dealer, or local simulations.
//
//   ips2pc --role standalone-sim --params toy-b --circuit c.txt --inputs0 x.txt --inputs1 y.txt
//   ips2pc --role standalone-sim --model m.json --features f.csv --batch 8 --report r.json
//   ips2pc --role standalone-sim --params watch --adversary watch-evade:count=1 --trials 1000
//   ips2pc --role dealer --listen 9000 --seed 7
//   ips2pc --role party0 --listen 9100 --dealer 127.0.0.1:9000 --circuit c.txt --inputs x.txt
//   ips2pc --role party1 --peer 127.0.0.1:9100 --dealer 127.0.0.1:9000 --circuit c.txt --inputs y.txt
//
// Every flag can also come from the --config file (`key = value` lines, keys
// are the long flag names) or from IPS2PC_<FLAG> environment variables, e.g.
// IPS2PC_OLE_BACKEND=dealer. Command line beats environment beats config.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "ips2pc/dealer.hpp"
#include "ips2pc/harness.hpp"
#include "json.hpp"

using namespace ips2pc;
using nlohmann::json;

namespace {

struct Options {
  std::string role = "standalone-sim";
  std::string field = "goldilocks";
  std::string params = "nn";
  std::string params_file;
  std::string peer, dealer;
  uint16_t listen = 0;
  std::string circuit, model, features;
  std::string inputs, inputs0, inputs1;
  std::optional<uint64_t> seed;
  std::string adversary = "none";
  std::string ole_backend = "ideal", ot_backend = "ideal";
  std::size_t batch = 1;
  std::size_t trials = 0;
  std::size_t sessions = 1;
  std::string report;
};

struct Endpoint {
  std::string host;
  uint16_t port = 0;
};

Endpoint parse_endpoint(const std::string& s, const char* flag) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0) throw CLI::ValidationError(flag, "expected host:port, got '" + s + "'");
  try {
    const int port = std::stoi(s.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::out_of_range("port");
    return {s.substr(0, colon), static_cast<uint16_t>(port)};
  } catch (const std::exception&) {
    throw CLI::ValidationError(flag, "bad port in '" + s + "'");
  }
}

std::vector<int64_t> read_ints(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open inputs file " + path);
  std::string text((std::istreambuf_iterator<char>(f)), {});
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  std::vector<int64_t> out;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    int64_t v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty()) throw std::runtime_error(path + ": '" + tok + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

std::vector<Fe> to_field(const PrimeField& F, const std::vector<int64_t>& v, std::size_t want, const char* who) {
  if (v.size() != want)
    throw std::runtime_error(std::string(who) + " has " + std::to_string(v.size()) + " values, the circuit takes " +
                             std::to_string(want));
  std::vector<Fe> out;
  for (auto x : v) out.push_back(F.from_i64(x));
  return out;
}

void write_report(const std::string& path, const std::string& text) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write report " + path);
  f << text << '\n';
}

std::string join(const std::vector<int64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

/// Environment variables become arguments placed before the real ones, so
/// the command line wins and both beat the config file.
std::vector<std::string> env_args(const CLI::App& app) {
  std::vector<std::string> out;
  for (const CLI::Option* o : app.get_options()) {
    const auto& names = o->get_lnames();
    if (names.empty() || names[0] == "help" || names[0] == "config") continue;
    std::string key = "IPS2PC_" + names[0];
    for (auto& ch : key) ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (const char* v = std::getenv(key.c_str())) out.push_back("--" + names[0] + "=" + v);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Setup {
  PrimeField F = PrimeField::goldilocks();
  ProtocolParams params;
};

Setup make_setup(const Options& o) {
  Setup s;
  if (o.field == "toy") s.F = PrimeField::toy();
  s.params = o.params_file.empty() ? named_params(o.params) : load_params(o.params_file);
  validate_params(s.params, s.F);
  return s;
}

uint64_t seed_or_random(const Options& o) { return o.seed ? *o.seed : std::random_device{}() * 0x100000001ULL; }

int run_nn_sim(const Options& o, const Setup& st) {
  const QuantModel m = load_model(o.model);
  const FeatureTable t = load_features(m, o.features);
  if (t.rows.empty()) throw std::runtime_error("features file has no rows");
  const uint64_t seed = seed_or_random(o);
  std::map<std::size_t, CompiledModel> compiled;
  json rep{{"mode", "nn"}, {"rows", t.rows.size()}, {"batch", o.batch}, {"seed", seed}};
  std::size_t right = 0, matches = 0;
  bool all_accepted = true;
  for (std::size_t at = 0; at < t.rows.size(); at += o.batch) {
    const std::size_t B = std::min(o.batch, t.rows.size() - at);
    auto it = compiled.find(B);
    if (it == compiled.end())
      it = compiled.emplace(B, compile_to_circuit(m, st.F, B, static_cast<uint32_t>(st.params.w))).first;
    const std::span<const std::vector<int64_t>> rows(t.rows.data() + at, B);
    const auto r = bench(st.F, st.params, it->second.circuit, circuit_inputs(st.F, m, rows, 0),
                         circuit_inputs(st.F, m, rows, 1), B, seed + at);
    rep["batches"].push_back(json::parse(to_json(r)));
    if (!r.accepted) {
      all_accepted = false;
      std::cout << "rows " << at << ".." << at + B - 1 << ": abort (" << (r.abort ? r.abort->stage : "?") << ")\n";
      continue;
    }
    std::vector<Fe> outs;
    for (auto v : r.outputs) outs.push_back(st.F.from_i64(v));
    const auto logits = decode_logits(st.F, m, outs);
    for (std::size_t i = 0; i < B; ++i) {
      const auto clear = infer_clear(m, t.rows[at + i]);
      const std::size_t pred = argmax(logits[i]);
      matches += logits[i] == clear.logits;
      if (!t.labels.empty()) right += static_cast<int64_t>(pred) == t.labels[at + i];
      rep["predictions"].push_back(pred);
      std::cout << "row " << at + i << ": class " << pred << " logits " << join(logits[i]) << '\n';
    }
  }
  rep["matches_clear"] = matches;
  std::cout << matches << "/" << t.rows.size() << " rows match clear inference\n";
  if (!t.labels.empty()) {
    rep["accuracy"] = static_cast<double>(right) / static_cast<double>(t.rows.size());
    std::cout << "accuracy " << rep["accuracy"].get<double>() << '\n';
  }
  write_report(o.report, rep.dump(2));
  return all_accepted && matches == t.rows.size() ? 0 : 2;
}

int run_sim(const Options& o) {
  const Setup st = make_setup(o);
  if (!o.model.empty()) {
    if (o.features.empty()) throw CLI::ValidationError("--features", "required with --model");
    return run_nn_sim(o, st);
  }
  const AdversarySpec adv = parse_adversary(o.adversary);
  if (o.trials > 0 || adv.strategy != Strategy::None) {
    ExperimentConfig cfg;
    cfg.field = &st.F;
    cfg.params = st.params;
    cfg.adversary = adv;
    cfg.trials = std::max<std::size_t>(o.trials, 1);
    cfg.seed = seed_or_random(o);
    if (!o.circuit.empty()) cfg.circuit = load_circuit(o.circuit);
    const auto r = run_adversary_experiment(cfg);
    std::cout << to_string(adv) << ": " << r.trials << " trials, " << r.aborts << " aborts, " << r.silent_corruptions
              << " silent corruptions, " << r.correct_outputs << " correct\n";
    for (const auto& [stage, n] : r.abort_stages) std::cout << "  " << stage << ": " << n << '\n';
    write_report(o.report, to_json(r, cfg));
    return r.silent_corruptions == 0 ? 0 : 2;
  }
  if (o.circuit.empty()) throw CLI::ValidationError("--circuit", "required unless --model or --trials is given");
  const LayeredCircuit c = load_circuit(o.circuit);
  const auto x = to_field(st.F, o.inputs0.empty() ? std::vector<int64_t>{} : read_ints(o.inputs0),
                          c.input_count(InputOwner::Party0), "--inputs0");
  const auto y = to_field(st.F, o.inputs1.empty() ? std::vector<int64_t>{} : read_ints(o.inputs1),
                          c.input_count(InputOwner::Party1), "--inputs1");
  if (c.input_count(InputOwner::Coin) > 0) throw std::runtime_error("circuits with coin inputs need the library API");
  const auto r = bench(st.F, st.params, c, x, y, 1, seed_or_random(o));
  write_report(o.report, to_json(r));
  if (!r.accepted) {
    std::cout << "abort (" << (r.abort ? r.abort->stage + ": " + r.abort->reason : "?") << ")\n";
    return 2;
  }
  std::cout << join(r.outputs) << '\n';
  return 0;
}

int run_dealer(const Options& o) {
  const Setup st = make_setup(o);
  DealerService d(st.F, local_options(seed_or_random(o)).dealer_seed, o.listen);
  std::cerr << "dealer listening on port " << d.port() << std::endl;
  for (std::size_t i = 0; o.sessions == 0 || i < o.sessions; ++i) d.serve_session();
  return 0;
}

int run_networked(const Options& o, int party) {
  const Setup st = make_setup(o);
  if (o.ot_backend != "dealer")
    throw CLI::ValidationError("--ot-backend", "two-process runs get their watchlist OTs from the dealer; use dealer");
  if (o.dealer.empty()) throw CLI::ValidationError("--dealer", "required for party roles");
  if (o.ole_backend == "ideal" && !o.seed)
    throw CLI::ValidationError("--seed", "the ideal OLE backend derives its correlations from the shared --seed");
  if (party == 0 && o.listen == 0) throw CLI::ValidationError("--listen", "party0 listens for party1");
  if (party == 1 && o.peer.empty()) throw CLI::ValidationError("--peer", "party1 connects to party0");
  const Endpoint dealer_at = parse_endpoint(o.dealer, "--dealer");
  const std::optional<Endpoint> peer_at = party == 1 ? std::optional(parse_endpoint(o.peer, "--peer")) : std::nullopt;
  const AdversarySpec adv = parse_adversary(o.adversary);
  if (adv.strategy == Strategy::TamperInputMac)
    throw CLI::ValidationError("--adversary", "tamper-input-mac runs only in standalone-sim");

  LayeredCircuit c;
  std::vector<Fe> inputs;
  std::optional<QuantModel> model;
  if (!o.model.empty()) {
    if (o.features.empty()) throw CLI::ValidationError("--features", "required with --model");
    model = load_model(o.model);
    const FeatureTable t = load_features(*model, o.features, party);
    if (t.rows.empty()) throw std::runtime_error("features file has no rows");
    const std::size_t B = std::min(o.batch, t.rows.size());
    c = compile_to_circuit(*model, st.F, B, static_cast<uint32_t>(st.params.w)).circuit;
    inputs = circuit_inputs(st.F, *model, std::span(t.rows.data(), B), party);
  } else {
    if (o.circuit.empty()) throw CLI::ValidationError("--circuit", "required unless --model is given");
    c = load_circuit(o.circuit);
    const auto owner = party == 0 ? InputOwner::Party0 : InputOwner::Party1;
    inputs = to_field(st.F, o.inputs.empty() ? std::vector<int64_t>{} : read_ints(o.inputs), c.input_count(owner),
                      "--inputs");
  }

  const CodeSpec spec = make_code_spec(st.F, st.params.n, st.params.k, st.params.w);
  const Schedule s(c, st.params);
  const uint64_t seed = seed_or_random(o);
  const LocalRunOptions seeds = local_options(seed);
  PartyConfig cfg;
  cfg.party = party;
  cfg.inputs = std::move(inputs);
  cfg.master = seeds.master[party];
  std::mt19937_64 rng(seed ^ 0xadc0ffee);
  if (adv.strategy != Strategy::None) {
    if (adv.party != party) throw CLI::ValidationError("--adversary", "scripts the other party");
    cfg.hooks = adversary_hooks(adv, spec, s, rng);
  }

  DealerClient dc(tcp_connect(dealer_at.host, dealer_at.port), party);
  DealerOt ot(dc);
  std::unique_ptr<OleProvider> ole;
  if (o.ole_backend == "dealer") ole = std::make_unique<DealerOleProvider>(st.F, dc);
  else ole = std::make_unique<IdealOleProvider>(st.F, seeds.dealer_seed, party);

  std::unique_ptr<ByteStream> stream;
  if (party == 0) {
    TcpListener l(o.listen);
    std::cerr << "party0 waiting on port " << l.port() << std::endl;
    stream = l.accept();
  } else {
    stream = tcp_connect(peer_at->host, peer_at->port);
  }
  FramedChannel ch(std::move(stream));
  const PartyResult r = run_party(ch, ot, *ole, spec, s, cfg);
  dc.channel().close();
  write_report(o.report, to_json(st.F, s, r, party));
  if (!r.accepted) {
    std::cout << "abort (" << (r.abort ? r.abort->stage + ": " + r.abort->reason : "?") << ")\n";
    return 2;
  }
  if (model) {
    for (const auto& logits : decode_logits(st.F, *model, r.outputs))
      std::cout << "class " << argmax(logits) << " logits " << join(logits) << '\n';
  } else {
    std::vector<int64_t> out;
    for (Fe v : r.outputs) out.push_back(st.F.to_signed(v));
    std::cout << join(out) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Actively secure two-party computation over packed secret sharing"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_config("--config", "", "key = value file mirroring the long flags");
  Options o;
  app.add_option("--role", o.role, "party0, party1, standalone-sim or dealer")
      ->check(CLI::IsMember({"party0", "party1", "standalone-sim", "dealer"}))
      ->capture_default_str();
  app.add_option("--field", o.field, "goldilocks or toy (p = 257)")
      ->check(CLI::IsMember({"goldilocks", "toy"}))
      ->capture_default_str();
  app.add_option("--params", o.params, "named parameter set: toy-a, toy-b, watch, nn")->capture_default_str();
  app.add_option("--params-file", o.params_file, "key = value parameter file (overrides --params)");
  app.add_option("--peer", o.peer, "party0 address host:port (party1)");
  app.add_option("--listen", o.listen, "port to listen on (party0, dealer; 0 picks one)");
  app.add_option("--dealer", o.dealer, "dealer address host:port (party roles)");
  app.add_option("--circuit", o.circuit, "layered circuit file");
  app.add_option("--model", o.model, "quantized model JSON");
  app.add_option("--features", o.features, "features CSV");
  app.add_option("--inputs", o.inputs, "this party's circuit inputs (party roles)");
  app.add_option("--inputs0", o.inputs0, "party 0 circuit inputs (standalone-sim)");
  app.add_option("--inputs1", o.inputs1, "party 1 circuit inputs (standalone-sim)");
  app.add_option("--seed", o.seed, "seed for reproducible runs; both parties and the dealer must agree");
  app.add_option("--adversary", o.adversary, "scripted deviation, e.g. additive-share:layer=1,servers=2;5")
      ->capture_default_str();
  app.add_option("--trials", o.trials, "adversary experiment trials (standalone-sim)");
  app.add_option("--ole-backend", o.ole_backend, "ideal or dealer")
      ->check(CLI::IsMember({"ideal", "dealer"}))
      ->capture_default_str();
  app.add_option("--ot-backend", o.ot_backend, "ideal (standalone-sim only) or dealer")
      ->check(CLI::IsMember({"ideal", "dealer"}))
      ->capture_default_str();
  app.add_option("--batch", o.batch, "inference rows per protocol run")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--sessions", o.sessions, "sessions the dealer serves; 0 for no limit")->capture_default_str();
  app.add_option("--report", o.report, "write a JSON report here");

  // CLI11 parses a reversed vector
  std::vector<std::string> rev;
  for (int i = argc - 1; i >= 1; --i) rev.emplace_back(argv[i]);
  const auto env = env_args(app);
  rev.insert(rev.end(), env.rbegin(), env.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (o.role == "standalone-sim") return run_sim(o);
    if (o.role == "dealer") return run_dealer(o);
    return run_networked(o, o.role == "party0" ? 0 : 1);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
