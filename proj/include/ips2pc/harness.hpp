#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ips2pc/circuit.hpp"
#include "ips2pc/combined.hpp"
#include "ips2pc/estimate.hpp"
#include "ips2pc/nn.hpp"
#include "ips2pc/params.hpp"

namespace ips2pc {

enum class Strategy : uint8_t { None, AdditiveShare, BadDegreeReduction, SkipBlinding, TamperInputMac, WatchEvade };
const char* to_string(Strategy s);

/// Scripted deviation of one corrupted party.
///
///   none
///   additive-share:layer=2,servers=1;4,delta=5
///   bad-degree-reduction:delta=3
///   skip-blinding
///   tamper-input-mac:delta=1
///   watch-evade:server=3        (a fixed server)
///   watch-evade:count=2         (that many servers drawn per trial)
struct AdversarySpec {
  Strategy strategy = Strategy::None;
  int party = 0;
  uint32_t layer = 1;
  std::vector<std::size_t> servers;
  std::size_t count = 1;
  uint64_t delta = 1;
};

AdversarySpec parse_adversary(const std::string& text);
std::string to_string(const AdversarySpec& a);

/// Hooks scripting the corrupted party. The returned callbacks refer to
/// `spec` and `s`, which must outlive the run.
PartyHooks adversary_hooks(const AdversarySpec& adv, const CodeSpec& spec, const Schedule& s, std::mt19937_64& rng);

struct ExperimentConfig {
  const PrimeField* field = nullptr;
  ProtocolParams params;
  AdversarySpec adversary;
  std::size_t trials = 100;
  uint64_t seed = 1;
  /// Fixed circuit; otherwise a fresh random circuit per trial.
  std::optional<LayeredCircuit> circuit;
  RandomCircuitOptions random;  // width is forced to params.w
  unsigned threads = 0;         // 0: hardware concurrency
};

struct ExperimentResult {
  std::size_t trials = 0;
  std::size_t silent_corruptions = 0;  // accepted with a wrong output
  std::size_t aborts = 0;
  std::size_t correct_outputs = 0;
  std::map<std::string, std::size_t> abort_stages;
  double abort_rate() const { return trials ? static_cast<double>(aborts) / static_cast<double>(trials) : 0; }
};

/// Two-party runs with the corrupted party scripted by the adversary spec.
/// Trials draw from independent seeded streams, so results do not depend on
/// the thread count.
ExperimentResult run_adversary_experiment(const ExperimentConfig& cfg);

struct PartyPhaseReport {
  double seconds[3]{};  // setup, offline, online
  ByteLedger ledger;
  std::size_t ole_invocations = 0, oles_consumed = 0;
};

struct BenchReport {
  std::string field;
  ProtocolParams params;
  std::size_t batch = 1;
  std::size_t depth = 0, mul_blocks = 0;
  bool accepted = false;
  std::vector<int64_t> outputs;  // party 0's view, centered; empty on abort
  std::optional<AbortInfo> abort;
  PartyPhaseReport party[2];
  CommEstimate estimate[2];
  Reconciliation reconcile[2];
  double wall_seconds = 0;
};

/// One honest local run of `c` with `batch` instances packed into it.
BenchReport bench(const PrimeField& F, const ProtocolParams& p, const LayeredCircuit& c, std::span<const Fe> x,
                  std::span<const Fe> y, std::size_t batch, uint64_t seed);

/// JSON with per-phase seconds, bytes by phase and term, per-instance
/// figures and the estimate reconciliation.
std::string to_json(const BenchReport& r);
std::string to_json(const ExperimentResult& r, const ExperimentConfig& cfg);
/// One party's view of a networked run, with its estimate reconciliation.
std::string to_json(const PrimeField& F, const Schedule& s, const PartyResult& r, int party);

/// Seeds of a local run derived from one integer.
LocalRunOptions local_options(uint64_t seed);

}  // namespace ips2pc
