#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ips2pc/field.hpp"
#include "ips2pc/outer.hpp"
#include "ips2pc/transport.hpp"

namespace ips2pc {

/// Per-party backend costs. They enter only the closed-form terms: backends
/// talk on their own channels, never on the party-to-party ledger.
struct BackendCosts {
  uint64_t ot_bytes = 0;       // one OT instance (both roles), sent by this party
  uint64_t ole_bytes_per = 0;  // per random OLE correlation half fetched
};

/// Closed-form version of the communication bound, in bits, with d the number
/// of multiplication blocks.
struct ClosedForm {
  double watchlist_setup = 0;  // 2 CC_OT
  double passive = 0;          // n d CC_rho
  double layer_outputs = 0;    // d n log2|F|
  double coin_toss = 0;        // 3 kappa
  double degree_test = 0;      // 2 sigma (t + e + w) log2|F|
  double perm_eq_tests = 0;    // 4 sigma (t + e + w) log2|F|
  double total() const {
    return watchlist_setup + passive + layer_outputs + coin_toss + degree_test + perm_eq_tests;
  }
};

/// Bytes one party sends on the party channel, keyed by the ledger's cost terms.
struct CommEstimate {
  std::map<std::string, Counter> terms;
  ClosedForm closed_form;
  Counter total() const;
};

CommEstimate estimate_communication(const Schedule& s, const PrimeField& F, int party, const BackendCosts& cc = {});

/// Bytes per inner multiplication sent by one party: a mask and a reply pair.
uint64_t inner_bytes_per_product(const PrimeField& F);

struct ReconcileRow {
  std::string term;
  Counter estimated, measured;
  bool exact() const { return estimated == measured; }
};

struct Reconciliation {
  std::vector<ReconcileRow> rows;  // union of both term sets
  uint64_t framing_bytes = 0;      // header bytes of the measured frames
  int64_t residual = 0;            // measured wire bytes - estimated payload - framing_bytes
  bool exact() const;
};

Reconciliation reconcile(const CommEstimate& est, const ByteLedger& measured);

}  // namespace ips2pc
