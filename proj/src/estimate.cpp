#include "ips2pc/estimate.hpp"

#include "ips2pc/crypto.hpp"

namespace ips2pc {

Counter CommEstimate::total() const {
  Counter c;
  for (const auto& [_, v] : terms) c += v;
  return c;
}

uint64_t inner_bytes_per_product(const PrimeField&) { return 3 * PrimeField::kBytes; }

CommEstimate estimate_communication(const Schedule& s, const PrimeField& F, int party, const BackendCosts& cc) {
  if (party != 0 && party != 1) throw std::invalid_argument("party must be 0 or 1");
  const ProtocolParams& p = s.params();
  const LayeredCircuit& c = s.circuit();
  const uint64_t n = p.n, M = s.mul_blocks(), fe = PrimeField::kBytes;
  const uint64_t digest = sizeof(Commitment{}.digest), opening_rand = sizeof(Opening{}.randomness);
  CommEstimate e;
  auto add = [&](const std::string& term, uint64_t payload, uint64_t frames = 1) {
    e.terms[term] += Counter{payload, frames};
  };

  add("offline-report", n * (32 + 4 * fe * M + kTagBytes));
  add("input-share", fe * c.input_count(party == 0 ? InputOwner::Party0 : InputOwner::Party1));
  auto toss = [&](uint64_t width) {
    add("coin-toss", digest);
    add("coin-toss", width * fe + opening_rand);
  };
  if (const auto coins = c.input_count(InputOwner::Coin)) toss(coins);
  const auto& steps = s.steps();
  for (const Step& step : steps) {
    if (step.kind == StepKind::Constants) continue;
    if (step.kind == StepKind::Local) {
      if (step.op == GateOp::Mul) add("gmw", n * step.targets.size() * inner_bytes_per_product(F), 2);
      continue;
    }
    if (step.targets.empty()) continue;
    uint64_t mine = 0;
    for (RowId r : step.targets) mine += client_writes(s, r, party);
    add("share-out", fe * n * step.sources.size());
    add("client-messages", n * (fe * mine + kTagBytes));
  }
  toss(coin_seed_width(F));
  for (int t = 0; t < 3; ++t) add("test-broadcast", fe * p.sigma * n);
  add("output", fe * n * s.output_rows().size());
  add("accept", 1);

  const double lf = F.log2_size(), tew = static_cast<double>(p.t + p.e + p.w), d = static_cast<double>(M);
  ClosedForm& th = e.closed_form;
  th.watchlist_setup = 2.0 * 8 * static_cast<double>(cc.ot_bytes);
  th.passive = static_cast<double>(n) * d * 8 * static_cast<double>(inner_bytes_per_product(F) + 2 * cc.ole_bytes_per);
  th.layer_outputs = d * static_cast<double>(n) * lf;
  th.coin_toss = 3.0 * p.kappa;
  th.degree_test = 2.0 * static_cast<double>(p.sigma) * tew * lf;
  th.perm_eq_tests = 4.0 * static_cast<double>(p.sigma) * tew * lf;
  return e;
}

bool Reconciliation::exact() const {
  if (residual != 0) return false;
  for (const auto& r : rows)
    if (!r.exact()) return false;
  return true;
}

Reconciliation reconcile(const CommEstimate& est, const ByteLedger& measured) {
  Reconciliation out;
  std::map<std::string, ReconcileRow> rows;
  for (const auto& [term, c] : est.terms) {
    rows[term].term = term;
    rows[term].estimated = c;
  }
  for (const auto& [term, c] : measured.by_term()) {
    rows[term].term = term;
    rows[term].measured = c;
  }
  for (auto& [_, r] : rows) out.rows.push_back(r);
  const Counter m = measured.total();
  out.framing_bytes = m.framing();
  out.residual = static_cast<int64_t>(m.total()) - static_cast<int64_t>(est.total().payload) -
                 static_cast<int64_t>(out.framing_bytes);
  return out;
}

}  // namespace ips2pc
