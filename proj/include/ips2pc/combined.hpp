#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "ips2pc/crypto.hpp"
#include "ips2pc/inner.hpp"
#include "ips2pc/outer.hpp"
#include "ips2pc/transport.hpp"

namespace ips2pc {

/// Deviations a corrupted party may apply to its own behaviour.
struct PartyHooks {
  /// Shift this party's share-out mask for these servers by `evade_delta`,
  /// consistently in its own computation: outputs stay correct, only the
  /// watchlist can notice.
  std::vector<std::size_t> evade_servers;
  Fe evade_delta{1};
  /// Additive changes to this party's share of server state, applied right
  /// after the row is written.
  std::vector<AdditiveAttack> share_attacks;
  /// May rewrite this party's client messages before they are shared.
  std::function<void(const Step&, std::vector<Codeword>&)> client_tamper;
  /// Forces the watchlist instead of sampling it.
  std::optional<WatchlistSelection> selection;
};

struct PartyConfig {
  int party = 0;
  std::vector<Fe> inputs;
  Seed master{};
  std::size_t ole_batch = 4096;
  bool keep_state = false;
  PartyHooks hooks;
};

struct PartyStats {
  std::size_t ole_invocations = 0;  // backend calls made by this party
  std::size_t oles_consumed = 0;    // correlation halves used (sender + receiver)
  std::size_t gmw_products = 0;
  double seconds_setup = 0, seconds_offline = 0, seconds_online = 0;
};

struct PartyResult {
  bool accepted = false;
  Phase reached = Phase::Setup;
  std::vector<Fe> outputs;
  std::optional<AbortInfo> abort;  // stage also "watchlist", "peer" or "protocol"
  std::optional<std::size_t> flagged_server;  // server whose emulation diverged
  WatchlistSelection selection;
  ByteLedger ledger;
  PartyStats stats;
  std::vector<uint8_t> transcript;
  // with keep_state
  RowStore state;  // this party's additive share of every server's rows
  std::vector<Fe> x_share, y_share, coins;
  Seed test_seed{};
};

/// One party of the compiled protocol.
PartyResult run_party(FramedChannel& ch, OtBackend& ot, OleProvider& ole, const CodeSpec& spec, const Schedule& s,
                      const PartyConfig& cfg);

struct LocalRunOptions {
  Seed master[2]{};
  Seed dealer_seed{};
  std::size_t ole_batch = 4096;
  bool keep_state = false;
  bool record_transcript = false;
  PartyHooks hooks[2];
};

struct LocalRun {
  PartyResult party[2];
  bool accepted() const { return party[0].accepted && party[1].accepted; }
};

/// Both parties in one process on two threads over an in-memory pipe, with
/// the ideal OT and OLE dealers.
LocalRun run_local(const CodeSpec& spec, const Schedule& s, std::span<const Fe> x, std::span<const Fe> y,
                   const LocalRunOptions& opt);

// ---------------------------------------------------------------------------
// seed plumbing shared with the standalone simulation

Seed client_seed(const Seed& master);
Seed server_tape_seed(const Seed& master, std::size_t server);
Prg rho_tape(const Seed& tape_seed);
Prg tau_tape(const Seed& tape_seed);

/// Standalone configuration whose server randomness is the sum of both
/// parties' share-out tapes, so the sum of the two emulated states replays
/// run_outer exactly.
OuterConfig standalone_config(const PrimeField& F, const Seed master[2], std::size_t n, const Seed& test_seed);

}  // namespace ips2pc
