#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ips2pc/circuit.hpp"
#include "ips2pc/crypto.hpp"
#include "ips2pc/params.hpp"
#include "ips2pc/rscode.hpp"

namespace ips2pc {

// ---------------------------------------------------------------------------
// row schedule

enum class RowKind : uint8_t { Input, Left, Right, Out, Prod, Reduced, DegBlind, PermBlind, EqBlind };
const char* to_string(RowKind k);

using RowId = std::size_t;

/// One row of the servers' state: a length-n vector whose entry s is held by
/// server s.
struct RowInfo {
  RowKind kind = RowKind::Input;
  uint32_t layer = 0;
  uint32_t block = 0;
  uint32_t client = 0;  // blinding rows
  uint32_t rep = 0;     // blinding rows
  std::size_t bound = 0;  // degree bound an honest row satisfies
};

enum class StepKind : uint8_t { Inputs, Constants, Rearrange, Local, Reduce, Blinding };
const char* to_string(StepKind k);

/// Client rounds read `sources` (shared out by the servers, one additive share
/// per client) and write `targets` (each server adds the two client
/// messages). Local steps compute `targets[i] = left op right` per server;
/// the constants step writes public and coin input blocks as deterministic
/// encodings without any client involvement.
struct Step {
  StepKind kind = StepKind::Inputs;
  uint32_t layer = 0;
  GateOp op = GateOp::Add;  // local steps
  std::vector<RowId> sources;
  std::vector<RowId> targets;
  std::vector<std::pair<RowId, RowId>> operands;  // local steps, aligned with targets
};

class Schedule {
 public:
  Schedule(const LayeredCircuit& c, const ProtocolParams& p);

  const LayeredCircuit& circuit() const { return c_; }
  const ProtocolParams& params() const { return p_; }
  const std::vector<RowInfo>& rows() const { return rows_; }
  const std::vector<Step>& steps() const { return steps_; }

  RowId input_row(uint32_t b) const { return input_.at(b); }
  RowId left_row(uint32_t layer, uint32_t b) const { return left_.at(layer - 1).at(b); }
  RowId right_row(uint32_t layer, uint32_t b) const { return right_.at(layer - 1).at(b); }
  /// Output block of a layer: the reduced row for multiplication layers.
  RowId out_row(uint32_t layer, uint32_t b) const { return out_.at(layer - 1).at(b); }
  std::optional<RowId> prod_row(uint32_t layer, uint32_t b) const;
  RowId source_row(const SlotRef& r) const { return r.layer == 0 ? input_row(r.block) : out_row(r.layer, r.block); }

  RowId deg_blind(std::size_t rep, int client) const { return blinds_.at(rep).at(3 * client + 0); }
  RowId perm_blind(std::size_t rep, int client) const { return blinds_.at(rep).at(3 * client + 1); }
  RowId eq_blind(std::size_t rep, int client) const { return blinds_.at(rep).at(3 * client + 2); }

  /// Rows checked by the degree test (blinding rows excluded).
  const std::vector<RowId>& degree_rows() const { return degree_rows_; }
  /// Row holding each block of the permutation-constraint vector x.
  const std::vector<RowId>& x_rows() const { return x_rows_; }
  const PermConstraints& perm() const { return perm_; }
  /// (product row in L', reduced row in L) per multiplication block.
  const std::vector<std::pair<RowId, RowId>>& eq_pairs() const { return eq_pairs_; }
  /// Distinct rows that contain circuit outputs, in first-use order.
  const std::vector<RowId>& output_rows() const { return output_rows_; }

  std::size_t mul_blocks() const { return eq_pairs_.size(); }

 private:
  RowId add_row(RowInfo r);
  LayeredCircuit c_;
  ProtocolParams p_;
  std::vector<RowInfo> rows_;
  std::vector<Step> steps_;
  std::vector<RowId> input_;
  std::vector<std::vector<RowId>> left_, right_, out_, prod_;
  std::vector<std::vector<RowId>> blinds_;
  std::vector<RowId> degree_rows_, x_rows_, output_rows_;
  std::vector<std::pair<RowId, RowId>> eq_pairs_;
  PermConstraints perm_;
};

/// Server state (or one party's additive share of it): one length-n vector per row.
using RowStore = std::vector<Codeword>;

// ---------------------------------------------------------------------------
// clients

struct ClientContext {
  const CodeSpec* spec = nullptr;
  const Schedule* schedule = nullptr;
  int id = 0;
  std::vector<Fe> x_share;  // this client's additive share of party 0's inputs
  std::vector<Fe> y_share;  // ... and of party 1's inputs
  bool zero_blinding = false;  // test hook: no fresh zero-encodings in linear maps
};

/// Messages client `ctx.id` sends to the servers in a client step, one row per
/// target. `received[i]` is the client's share of `step.sources[i]`.
std::vector<Codeword> client_targets(const ClientContext& ctx, const Step& step,
                                     const std::vector<Codeword>& received, Prg& rng);

/// False for rows only the other client writes (its blinding rows); those
/// messages are all-zero.
bool client_writes(const Schedule& s, RowId r, int client);

/// Server-local row of a public or coin input block.
Codeword constant_row(const CodeSpec& spec, const Schedule& s, RowId r, std::span<const Fe> coins);

/// True for steps without client messages.
inline bool is_local(StepKind k) { return k == StepKind::Local || k == StepKind::Constants; }

/// Uniform degree < bound polynomial whose values at zeta sum to zero, on eta.
Codeword sample_sum_zero(const CodeSpec& spec, std::size_t bound, Prg& rng);

// ---------------------------------------------------------------------------
// correctness tests (all linear in the row store, so they apply to shares)

enum class TestKind : uint8_t { Degree, Permutation, Equality };
const char* to_string(TestKind k);

/// Number of coins one repetition of a test consumes.
std::size_t test_coin_count(const Schedule& s, TestKind t);
/// Coins for one repetition, expanded from the tossed seed.
std::vector<Fe> test_coins(const PrimeField& F, const Seed& seed, TestKind t, std::size_t rep, std::size_t count);

/// Per-server value l_s of one repetition.
Codeword test_combination(const CodeSpec& spec, const Schedule& s, const RowStore& rows, TestKind t, std::size_t rep,
                          std::span<const Fe> coins);
/// Empty string on acceptance, otherwise the reason.
std::string test_check(const CodeSpec& spec, TestKind t, std::span<const Fe> l);

// ---------------------------------------------------------------------------
// standalone simulation

struct AdditiveAttack {
  RowId row = 0;
  std::vector<std::size_t> servers;
  std::vector<Fe> deltas;
};

struct OuterHooks {
  /// Applied to the server state right after the row is written.
  std::vector<AdditiveAttack> attacks;
  /// May rewrite client 0's messages in any client step.
  std::function<void(const Step&, std::vector<Codeword>& targets)> client0_tamper;
  bool zero_blinding = false;
  std::optional<std::vector<Fe>> force_coins;  // every repetition of every test uses these (padded with zeros)
};

struct AbortInfo {
  std::string stage;  // "degree", "permutation", "equality", "output"
  std::size_t rep = 0;
  std::string reason;
  std::optional<RowId> row;  // offending row when determinable
};

struct OuterRun {
  bool accepted = false;
  std::optional<AbortInfo> abort;
  std::vector<Fe> outputs;
  RowStore rows;
  std::vector<std::vector<Codeword>> broadcasts;  // per test, per repetition
};

struct OuterConfig {
  Seed client_seed[2]{};
  Seed server_seed{};
  Seed test_seed{};
  /// Server share-out randomness, called per (step, source row, server) in
  /// that order. Defaults to a PRG on server_seed.
  std::function<Fe(std::size_t server)> server_rand;
};

/// Two clients and n servers in one process. `x_share[i]`, `y_share[i]` are
/// client i's additive shares of the parties' inputs.
OuterRun run_outer(const CodeSpec& spec, const Schedule& s, const std::vector<Fe> x_share[2],
                   const std::vector<Fe> y_share[2], std::span<const Fe> coins, const OuterConfig& cfg,
                   const OuterHooks& hooks = {});

/// Convenience: client 0 holds x, client 1 holds y.
OuterRun run_outer_plain(const CodeSpec& spec, const Schedule& s, std::span<const Fe> x, std::span<const Fe> y,
                         std::span<const Fe> coins, uint64_t seed, const OuterHooks& hooks = {});

/// Runs every repetition of every test on `rows`; the first failure wins.
std::optional<AbortInfo> run_tests(const CodeSpec& spec, const Schedule& s, const RowStore& rows, const Seed& seed,
                                   std::vector<std::vector<Codeword>>* broadcasts = nullptr,
                                   const std::optional<std::vector<Fe>>& force_coins = std::nullopt);

/// Reconstructs the circuit outputs from full output rows; nullopt-style
/// failure is reported through `why` when a row is not a codeword.
std::vector<Fe> reveal_outputs(const CodeSpec& spec, const Schedule& s, const RowStore& rows, std::string* why);

}  // namespace ips2pc
