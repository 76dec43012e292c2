#include "ips2pc/outer.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace ips2pc {

const char* to_string(RowKind k) {
  switch (k) {
    case RowKind::Input: return "input";
    case RowKind::Left: return "left";
    case RowKind::Right: return "right";
    case RowKind::Out: return "out";
    case RowKind::Prod: return "prod";
    case RowKind::Reduced: return "reduced";
    case RowKind::DegBlind: return "degree-blind";
    case RowKind::PermBlind: return "permutation-blind";
    case RowKind::EqBlind: return "equality-blind";
  }
  return "?";
}

const char* to_string(StepKind k) {
  switch (k) {
    case StepKind::Inputs: return "inputs";
    case StepKind::Constants: return "constants";
    case StepKind::Rearrange: return "rearrange";
    case StepKind::Local: return "local";
    case StepKind::Reduce: return "reduce";
    case StepKind::Blinding: return "blinding";
  }
  return "?";
}

const char* to_string(TestKind k) {
  switch (k) {
    case TestKind::Degree: return "degree";
    case TestKind::Permutation: return "permutation";
    case TestKind::Equality: return "equality";
  }
  return "?";
}

// ---------------------------------------------------------------------------

RowId Schedule::add_row(RowInfo r) {
  rows_.push_back(r);
  return rows_.size() - 1;
}

Schedule::Schedule(const LayeredCircuit& c, const ProtocolParams& p) : c_(c), p_(p) {
  validate(c_);
  if (c_.width != p_.w)
    throw CircuitError("circuit block width " + std::to_string(c_.width) + " differs from w = " + std::to_string(p_.w));
  const std::size_t k = p_.k, w = p_.w;

  Step inputs{StepKind::Inputs}, constants{StepKind::Constants};
  for (uint32_t b = 0; b < c_.inputs.size(); ++b) {
    input_.push_back(add_row({RowKind::Input, 0, b, 0, 0, k}));
    const auto owner = c_.inputs[b].owner;
    (owner == InputOwner::Party0 || owner == InputOwner::Party1 ? inputs : constants).targets.push_back(input_.back());
  }
  steps_.push_back(std::move(inputs));
  steps_.push_back(std::move(constants));

  for (uint32_t j = 1; j <= c_.layers.size(); ++j) {
    const Layer& l = c_.layers[j - 1];
    Step re{StepKind::Rearrange, j};
    std::set<RowId> seen;
    for (const auto* wires : {&l.left, &l.right})
      for (const auto& r : *wires)
        if (r && seen.insert(source_row(*r)).second) re.sources.push_back(source_row(*r));
    left_.emplace_back();
    right_.emplace_back();
    for (uint32_t b = 0; b < l.blocks; ++b) left_.back().push_back(add_row({RowKind::Left, j, b, 0, 0, k}));
    for (uint32_t b = 0; b < l.blocks; ++b) right_.back().push_back(add_row({RowKind::Right, j, b, 0, 0, k}));
    re.targets = left_.back();
    re.targets.insert(re.targets.end(), right_.back().begin(), right_.back().end());
    steps_.push_back(std::move(re));

    Step local{StepKind::Local, j, l.op};
    out_.emplace_back();
    prod_.emplace_back();
    for (uint32_t b = 0; b < l.blocks; ++b) {
      const RowId dst = l.op == GateOp::Mul ? add_row({RowKind::Prod, j, b, 0, 0, 2 * k})
                                            : add_row({RowKind::Out, j, b, 0, 0, k});
      (l.op == GateOp::Mul ? prod_ : out_).back().push_back(dst);
      local.targets.push_back(dst);
      local.operands.emplace_back(left_.back()[b], right_.back()[b]);
    }
    steps_.push_back(std::move(local));

    if (l.op == GateOp::Mul) {
      Step red{StepKind::Reduce, j};
      red.sources = prod_.back();
      for (uint32_t b = 0; b < l.blocks; ++b) {
        out_.back().push_back(add_row({RowKind::Reduced, j, b, 0, 0, k}));
        eq_pairs_.emplace_back(prod_.back()[b], out_.back().back());
      }
      red.targets = out_.back();
      steps_.push_back(std::move(red));
    }
  }

  Step blind{StepKind::Blinding};
  for (uint32_t rep = 0; rep < p_.sigma; ++rep) {
    blinds_.emplace_back();
    for (uint32_t client = 0; client < 2; ++client) {
      blinds_.back().push_back(add_row({RowKind::DegBlind, 0, 0, client, rep, k}));
      blinds_.back().push_back(add_row({RowKind::PermBlind, 0, 0, client, rep, k + w}));
      blinds_.back().push_back(add_row({RowKind::EqBlind, 0, 0, client, rep, 2 * k}));
    }
    blind.targets.insert(blind.targets.end(), blinds_.back().begin(), blinds_.back().end());
  }
  steps_.push_back(std::move(blind));

  for (RowId r = 0; r < rows_.size(); ++r) {
    const RowKind kind = rows_[r].kind;
    if (kind == RowKind::Input || kind == RowKind::Left || kind == RowKind::Right || kind == RowKind::Out ||
        kind == RowKind::Reduced)
      degree_rows_.push_back(r);
  }
  x_rows_ = input_;
  for (uint32_t j = 1; j <= c_.layers.size(); ++j) {
    x_rows_.insert(x_rows_.end(), left_[j - 1].begin(), left_[j - 1].end());
    x_rows_.insert(x_rows_.end(), right_[j - 1].begin(), right_[j - 1].end());
    x_rows_.insert(x_rows_.end(), out_[j - 1].begin(), out_[j - 1].end());
  }
  perm_ = perm_constraints(c_);
  std::set<RowId> seen;
  for (const auto& o : c_.outputs)
    if (seen.insert(source_row(o)).second) output_rows_.push_back(source_row(o));
}

std::optional<RowId> Schedule::prod_row(uint32_t layer, uint32_t b) const {
  const auto& v = prod_.at(layer - 1);
  if (v.empty()) return std::nullopt;
  return v.at(b);
}

// ---------------------------------------------------------------------------

namespace {

int row_writer(const Schedule& s, RowId r) {
  const RowInfo& info = s.rows()[r];
  switch (info.kind) {
    case RowKind::DegBlind:
    case RowKind::PermBlind:
    case RowKind::EqBlind: return static_cast<int>(info.client);
    default: return -1;
  }
}

void add_into(const PrimeField& F, Codeword& acc, std::span<const Fe> v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = F.add(acc[i], v[i]);
}

void axpy(const PrimeField& F, Codeword& acc, Fe a, std::span<const Fe> v) {
  if (a == F.zero()) return;
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = F.add(acc[i], F.mul(a, v[i]));
}

Codeword fresh_zero(const CodeSpec& spec, Prg& rng) {
  const Block zeros(spec.w, spec.field.zero());
  return encode(spec, zeros, rng);
}

}  // namespace

bool client_writes(const Schedule& s, RowId r, int client) {
  const int w = row_writer(s, r);
  return w < 0 || w == client;
}

Codeword constant_row(const CodeSpec& spec, const Schedule& s, RowId r, std::span<const Fe> coins) {
  const PrimeField& F = spec.field;
  const InputBlock& blk = s.circuit().inputs.at(s.rows().at(r).block);
  Block vals(spec.w, F.zero());
  for (std::size_t i = 0; i < spec.w; ++i) {
    const int64_t e = blk.entries[i];
    if (blk.owner == InputOwner::Public) {
      vals[i] = F.from_i64(e);
    } else if (blk.owner == InputOwner::Coin) {
      if (e < 0) continue;
      if (static_cast<std::size_t>(e) >= coins.size()) throw ProtocolError("constant_row: missing coin input");
      vals[i] = coins[static_cast<std::size_t>(e)];
    } else {
      throw ProtocolError("constant_row: block is party-owned");
    }
  }
  return encode_deterministic(spec, vals);
}

Codeword sample_sum_zero(const CodeSpec& spec, std::size_t bound, Prg& rng) {
  const PrimeField& F = spec.field;
  Poly p = F.sample_vec(rng, bound);
  Fe sum = F.zero();
  for (Fe v : eval_at_zeta(spec, p)) sum = F.add(sum, v);
  // subtracting sum / w from the constant term shifts every zeta value equally
  p[0] = F.sub(p[0], F.div(sum, F.from_u64(spec.w)));
  return evaluate_on_eta(spec, p);
}

std::vector<Codeword> client_targets(const ClientContext& ctx, const Step& step,
                                     const std::vector<Codeword>& received, Prg& rng) {
  const CodeSpec& spec = *ctx.spec;
  const Schedule& sch = *ctx.schedule;
  const PrimeField& F = spec.field;
  const LayeredCircuit& c = sch.circuit();
  const Codeword zero_row(spec.n, F.zero());
  std::vector<Codeword> out;
  out.reserve(step.targets.size());
  if (received.size() != step.sources.size()) throw ProtocolError("client step: share-out size mismatch");

  auto reencode = [&](const Block& b) {
    Codeword cw = encode_deterministic(spec, b);
    if (!ctx.zero_blinding) add_into(F, cw, fresh_zero(spec, rng));
    return cw;
  };

  switch (step.kind) {
    case StepKind::Inputs:
      for (RowId r : step.targets) {
        const InputBlock& blk = c.inputs[sch.rows()[r].block];
        if (blk.owner != InputOwner::Party0 && blk.owner != InputOwner::Party1)
          throw ProtocolError("input step targets a constant block");
        Block vals(spec.w, F.zero());
        const auto& share = blk.owner == InputOwner::Party0 ? ctx.x_share : ctx.y_share;
        for (std::size_t s = 0; s < spec.w; ++s)
          if (blk.entries[s] >= 0) vals[s] = share.at(static_cast<std::size_t>(blk.entries[s]));
        out.push_back(encode(spec, vals, rng));
      }
      break;
    case StepKind::Rearrange: {
      std::map<RowId, Block> dec;
      for (std::size_t i = 0; i < step.sources.size(); ++i)
        dec[step.sources[i]] = decode(spec, received[i], sch.rows()[step.sources[i]].bound);
      const Layer& l = c.layers[step.layer - 1];
      for (RowId r : step.targets) {
        const RowInfo& info = sch.rows()[r];
        const auto& wires = info.kind == RowKind::Left ? l.left : l.right;
        Block vals(spec.w, F.zero());
        for (std::size_t s = 0; s < spec.w; ++s) {
          const auto& ref = wires[static_cast<std::size_t>(info.block) * spec.w + s];
          if (ref) vals[s] = dec.at(sch.source_row(*ref))[ref->slot];
        }
        out.push_back(reencode(vals));
      }
      break;
    }
    case StepKind::Reduce:
      for (std::size_t i = 0; i < step.targets.size(); ++i) out.push_back(reencode(decode(spec, received[i], 2 * spec.k)));
      break;
    case StepKind::Blinding:
      for (RowId r : step.targets) {
        const RowInfo& info = sch.rows()[r];
        if (static_cast<int>(info.client) != ctx.id) {
          out.push_back(zero_row);
          continue;
        }
        switch (info.kind) {
          case RowKind::DegBlind: {
            const Block b = F.sample_vec(rng, spec.w);
            out.push_back(encode(spec, b, rng));
            break;
          }
          case RowKind::PermBlind: out.push_back(sample_sum_zero(spec, spec.k + spec.w, rng)); break;
          case RowKind::EqBlind: out.push_back(encode_zero_wide(spec, rng)); break;
          default: throw ProtocolError("blinding step targets a non-blinding row");
        }
      }
      break;
    case StepKind::Local:
    case StepKind::Constants: throw ProtocolError("local steps have no client messages");
  }
  return out;
}

// ---------------------------------------------------------------------------
// tests

std::size_t test_coin_count(const Schedule& s, TestKind t) {
  switch (t) {
    case TestKind::Degree: return s.degree_rows().size() + 2;
    case TestKind::Permutation: return s.perm().rows.size();
    case TestKind::Equality: return s.eq_pairs().size();
  }
  return 0;
}

std::vector<Fe> test_coins(const PrimeField& F, const Seed& seed, TestKind t, std::size_t rep, std::size_t count) {
  Prg rng(derive_seed(seed, to_string(t), rep));
  return F.sample_vec(rng, count);
}

Codeword test_combination(const CodeSpec& spec, const Schedule& s, const RowStore& rows, TestKind t, std::size_t rep,
                          std::span<const Fe> coins) {
  const PrimeField& F = spec.field;
  Codeword l(spec.n, F.zero());
  if (coins.size() != test_coin_count(s, t)) throw ProtocolError(std::string(to_string(t)) + " test: wrong coin count");
  switch (t) {
    case TestKind::Degree: {
      const auto& dr = s.degree_rows();
      for (std::size_t i = 0; i < dr.size(); ++i) axpy(F, l, coins[i], rows[dr[i]]);
      axpy(F, l, coins[dr.size()], rows[s.deg_blind(rep, 0)]);
      axpy(F, l, coins[dr.size() + 1], rows[s.deg_blind(rep, 1)]);
      break;
    }
    case TestKind::Permutation: {
      const Matrix lam = zeta_lagrange_at_eta(spec);
      const std::vector<Fe> cvec = combine_constraints(F, s.perm(), coins);
      const auto& xr = s.x_rows();
      for (std::size_t i = 0; i < xr.size(); ++i) {
        std::span<const Fe> ci(cvec.data() + i * spec.w, spec.w);
        if (std::all_of(ci.begin(), ci.end(), [&](Fe v) { return v == F.zero(); })) continue;
        const Codeword& u = rows[xr[i]];
        for (std::size_t srv = 0; srv < spec.n; ++srv) {
          Fe coef = F.zero();
          for (std::size_t z = 0; z < spec.w; ++z) coef = F.add(coef, F.mul(ci[z], lam.at(srv, z)));
          l[srv] = F.add(l[srv], F.mul(coef, u[srv]));
        }
      }
      add_into(F, l, rows[s.perm_blind(rep, 0)]);
      add_into(F, l, rows[s.perm_blind(rep, 1)]);
      break;
    }
    case TestKind::Equality: {
      const auto& pairs = s.eq_pairs();
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        axpy(F, l, coins[i], rows[pairs[i].first]);
        axpy(F, l, F.neg(coins[i]), rows[pairs[i].second]);
      }
      add_into(F, l, rows[s.eq_blind(rep, 0)]);
      add_into(F, l, rows[s.eq_blind(rep, 1)]);
      break;
    }
  }
  return l;
}

std::string test_check(const CodeSpec& spec, TestKind t, std::span<const Fe> l) {
  const PrimeField& F = spec.field;
  switch (t) {
    case TestKind::Degree:
      if (!is_codeword(spec, l, spec.k)) return "combined row has degree >= k";
      return {};
    case TestKind::Permutation: {
      if (!is_codeword(spec, l, spec.k + spec.w)) return "combined row has degree >= k + w";
      Fe sum = F.zero();
      for (Fe v : decode(spec, l, spec.k + spec.w)) sum = F.add(sum, v);
      if (sum != F.zero()) return "decoded entries do not sum to zero";
      return {};
    }
    case TestKind::Equality: {
      if (!is_codeword(spec, l, 2 * spec.k)) return "combined row has degree >= 2k";
      for (Fe v : decode(spec, l, 2 * spec.k))
        if (v != F.zero()) return "combined row does not encode the zero block";
      return {};
    }
  }
  return "unknown test";
}

std::optional<AbortInfo> run_tests(const CodeSpec& spec, const Schedule& s, const RowStore& rows, const Seed& seed,
                                   std::vector<std::vector<Codeword>>* broadcasts,
                                   const std::optional<std::vector<Fe>>& force_coins) {
  for (TestKind t : {TestKind::Degree, TestKind::Permutation, TestKind::Equality}) {
    if (broadcasts) broadcasts->emplace_back();
    const std::size_t count = test_coin_count(s, t);
    for (std::size_t rep = 0; rep < s.params().sigma; ++rep) {
      std::vector<Fe> coins;
      if (force_coins) {
        coins = *force_coins;
        coins.resize(count, spec.field.zero());
      } else {
        coins = test_coins(spec.field, seed, t, rep, count);
      }
      Codeword l = test_combination(spec, s, rows, t, rep, coins);
      std::string why = test_check(spec, t, l);
      if (broadcasts) broadcasts->back().push_back(std::move(l));
      if (!why.empty()) return AbortInfo{to_string(t), rep, why, std::nullopt};
    }
  }
  return std::nullopt;
}

std::vector<Fe> reveal_outputs(const CodeSpec& spec, const Schedule& s, const RowStore& rows, std::string* why) {
  std::map<RowId, Block> dec;
  for (RowId r : s.output_rows()) {
    if (!is_codeword(spec, rows[r], spec.k)) {
      if (why) *why = "output row " + std::to_string(r) + " is not a codeword";
      return {};
    }
    dec[r] = decode(spec, rows[r]);
  }
  std::vector<Fe> out;
  for (const auto& o : s.circuit().outputs) out.push_back(dec.at(s.source_row(o))[o.slot]);
  if (why) why->clear();
  return out;
}

// ---------------------------------------------------------------------------
// standalone simulation

OuterRun run_outer(const CodeSpec& spec, const Schedule& s, const std::vector<Fe> x_share[2],
                   const std::vector<Fe> y_share[2], std::span<const Fe> coins, const OuterConfig& cfg,
                   const OuterHooks& hooks) {
  const PrimeField& F = spec.field;
  const std::size_t n = spec.n;
  OuterRun run;
  run.rows.assign(s.rows().size(), Codeword(n, F.zero()));
  RowStore& rows = run.rows;

  ClientContext ctx[2];
  Prg crng[2] = {Prg(cfg.client_seed[0]), Prg(cfg.client_seed[1])};
  for (int i = 0; i < 2; ++i) {
    ctx[i].spec = &spec;
    ctx[i].schedule = &s;
    ctx[i].id = i;
    ctx[i].x_share = x_share[i];
    ctx[i].y_share = y_share[i];
    ctx[i].zero_blinding = hooks.zero_blinding;
  }
  Prg srng(cfg.server_seed);
  auto server_rand = cfg.server_rand ? cfg.server_rand : [&](std::size_t) { return F.sample(srng); };

  std::map<RowId, std::vector<const AdditiveAttack*>> attacks;
  for (const auto& a : hooks.attacks) attacks[a.row].push_back(&a);
  auto attack = [&](RowId r) {
    auto it = attacks.find(r);
    if (it == attacks.end()) return;
    for (const auto* a : it->second)
      for (std::size_t i = 0; i < a->servers.size(); ++i)
        rows[r][a->servers[i]] = F.add(rows[r][a->servers[i]], a->deltas[i]);
  };

  for (const Step& step : s.steps()) {
    if (step.kind == StepKind::Constants) {
      for (RowId r : step.targets) {
        rows[r] = constant_row(spec, s, r, coins);
        attack(r);
      }
      continue;
    }
    if (step.kind == StepKind::Local) {
      for (std::size_t i = 0; i < step.targets.size(); ++i) {
        const auto [a, b] = step.operands[i];
        Codeword& dst = rows[step.targets[i]];
        for (std::size_t srv = 0; srv < n; ++srv) {
          switch (step.op) {
            case GateOp::Add: dst[srv] = F.add(rows[a][srv], rows[b][srv]); break;
            case GateOp::Sub: dst[srv] = F.sub(rows[a][srv], rows[b][srv]); break;
            case GateOp::Mul: dst[srv] = F.mul(rows[a][srv], rows[b][srv]); break;
          }
        }
        attack(step.targets[i]);
      }
      continue;
    }
    std::vector<Codeword> recv[2];
    for (RowId src : step.sources) {
      Codeword r0(n), r1(n);
      for (std::size_t srv = 0; srv < n; ++srv) {
        const Fe rho = server_rand(srv);
        r0[srv] = rho;
        r1[srv] = F.sub(rows[src][srv], rho);
      }
      recv[0].push_back(std::move(r0));
      recv[1].push_back(std::move(r1));
    }
    std::vector<Codeword> msg[2];
    for (int i = 0; i < 2; ++i) msg[i] = client_targets(ctx[i], step, recv[i], crng[i]);
    if (hooks.client0_tamper) hooks.client0_tamper(step, msg[0]);
    for (std::size_t i = 0; i < step.targets.size(); ++i) {
      Codeword& dst = rows[step.targets[i]];
      for (std::size_t srv = 0; srv < n; ++srv) dst[srv] = F.add(msg[0][i][srv], msg[1][i][srv]);
      attack(step.targets[i]);
    }
  }

  if (auto ab = run_tests(spec, s, rows, cfg.test_seed, &run.broadcasts, hooks.force_coins)) {
    if (ab->stage == "degree")
      for (RowId r : s.degree_rows())
        if (!is_codeword(spec, rows[r], spec.k)) {
          ab->row = r;
          break;
        }
    run.abort = std::move(ab);
    return run;
  }
  std::string why;
  run.outputs = reveal_outputs(spec, s, rows, &why);
  if (!why.empty()) {
    run.abort = AbortInfo{"output", 0, why, std::nullopt};
    run.outputs.clear();
    return run;
  }
  run.accepted = true;
  return run;
}

OuterRun run_outer_plain(const CodeSpec& spec, const Schedule& s, std::span<const Fe> x, std::span<const Fe> y,
                         std::span<const Fe> coins, uint64_t seed, const OuterHooks& hooks) {
  const PrimeField& F = spec.field;
  std::vector<Fe> xs[2] = {std::vector<Fe>(x.begin(), x.end()), std::vector<Fe>(x.size(), F.zero())};
  std::vector<Fe> ys[2] = {std::vector<Fe>(y.size(), F.zero()), std::vector<Fe>(y.begin(), y.end())};
  OuterConfig cfg;
  const Seed master = seed_from_u64(seed);
  cfg.client_seed[0] = derive_seed(master, "client", 0);
  cfg.client_seed[1] = derive_seed(master, "client", 1);
  cfg.server_seed = derive_seed(master, "servers");
  cfg.test_seed = derive_seed(master, "tests");
  return run_outer(spec, s, xs, ys, coins, cfg, hooks);
}

}  // namespace ips2pc
