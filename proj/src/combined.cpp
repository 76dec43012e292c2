#include "ips2pc/combined.hpp"

#include <chrono>
#include <exception>
#include <map>
#include <memory>
#include <set>
#include <thread>

namespace ips2pc {

Seed client_seed(const Seed& master) { return derive_seed(master, "client"); }
Seed server_tape_seed(const Seed& master, std::size_t server) { return derive_seed(master, "server", server); }
Prg rho_tape(const Seed& tape_seed) { return Prg(derive_seed(tape_seed, "rho")); }
Prg tau_tape(const Seed& tape_seed) { return Prg(derive_seed(tape_seed, "tau")); }

OuterConfig standalone_config(const PrimeField& F, const Seed master[2], std::size_t n, const Seed& test_seed) {
  OuterConfig c;
  c.client_seed[0] = client_seed(master[0]);
  c.client_seed[1] = client_seed(master[1]);
  c.test_seed = test_seed;
  auto tapes = std::make_shared<std::vector<Prg>>();
  for (std::size_t j = 0; j < n; ++j) {
    tapes->push_back(rho_tape(server_tape_seed(master[0], j)));
    tapes->push_back(rho_tape(server_tape_seed(master[1], j)));
  }
  c.server_rand = [tapes, F](std::size_t j) {
    const Fe a = F.sample((*tapes)[2 * j]);
    return F.add(a, F.sample((*tapes)[2 * j + 1]));
  };
  return c;
}

namespace {

struct Abort : ProtocolError {
  AbortInfo info;
  std::optional<std::size_t> server;
  explicit Abort(AbortInfo i, std::optional<std::size_t> srv = std::nullopt)
      : ProtocolError(i.stage + ": " + i.reason), info(std::move(i)), server(srv) {}
};

[[noreturn]] void watch_fail(std::size_t j, const std::string& what) {
  throw Abort(AbortInfo{"watchlist", 0, "server " + std::to_string(j) + ": " + what, std::nullopt}, j);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class PartyRun {
 public:
  PartyRun(FramedChannel& ch, OtBackend& ot, OleProvider& ole, const CodeSpec& spec, const Schedule& s,
           const PartyConfig& cfg)
      : ch_(ch), ot_(ot), ole_(ole), spec_(spec), s_(s), cfg_(cfg), F_(spec.field), n_(spec.n), me_(cfg.party),
        peer_(1 - cfg.party) {}

  PartyResult run();

 private:
  void setup();
  void offline();
  void online();
  void local_step(const Step& step);
  void mul_step(const Step& step);
  void client_step(std::size_t index, const Step& step, ClientContext& ctx, Prg& crng);
  std::vector<Codeword> share_out(const Step& step);
  void attack(RowId r);
  void tests();
  void outputs();
  std::vector<Fe> swap(MsgType type, std::span<const Fe> mine, std::string_view term, std::size_t expect);

  FramedChannel& ch_;
  OtBackend& ot_;
  OleProvider& ole_;
  const CodeSpec& spec_;
  const Schedule& s_;
  const PartyConfig& cfg_;
  const PrimeField& F_;
  const std::size_t n_;
  const int me_, peer_;

  std::vector<WatchKey> keys_;
  std::vector<StreamEncryptor> enc_;
  std::map<std::size_t, WatchKey> peer_keys_;
  std::vector<Prg> rho_, tau_;
  std::map<std::size_t, Prg> peer_rho_, peer_tau_;
  std::vector<OleSenderHalf> send_all_;
  std::vector<OleReceiverHalf> recv_all_;
  std::map<std::size_t, std::vector<OleSenderHalf>> peer_send_;
  std::map<std::size_t, std::vector<OleReceiverHalf>> peer_recv_;
  OlePool pool_;
  std::set<std::size_t> evade_;
  RowStore share_, shadow_;
  std::size_t mul_done_ = 0;
  PartyResult res_;
};

std::vector<Fe> PartyRun::swap(MsgType type, std::span<const Fe> mine, std::string_view term, std::size_t expect) {
  std::vector<uint8_t> buf;
  F_.append(buf, mine);
  std::vector<Fe> got = F_.read_vec(ch_.exchange(type, buf, me_ == 0, term));
  if (got.size() != expect)
    throw ProtocolError(std::string(term) + ": peer sent " + std::to_string(got.size()) + " elements, expected " +
                        std::to_string(expect));
  return got;
}

void PartyRun::setup() {
  const auto t0 = std::chrono::steady_clock::now();
  ch_.set_phase(Phase::Setup);
  const ProtocolParams& p = s_.params();
  Prg keyrng(derive_seed(cfg_.master, "watch-keys"));
  keys_.resize(n_);
  for (auto& k : keys_) {
    keyrng.fill(k);
    enc_.emplace_back(k);
  }
  if (cfg_.hooks.selection) {
    res_.selection = *cfg_.hooks.selection;
  } else {
    Prg selrng(derive_seed(cfg_.master, "selection"));
    res_.selection = sample_selection(n_, p.t, selrng);
  }
  validate_selection(res_.selection, n_, p.t);
  // party 0's sender instance runs first
  std::vector<WatchKey> got;
  if (me_ == 0) {
    ot_.send(keys_, p.t);
    got = ot_.receive(n_, res_.selection);
  } else {
    got = ot_.receive(n_, res_.selection);
    ot_.send(keys_, p.t);
  }
  for (std::size_t i = 0; i < got.size(); ++i) peer_keys_[res_.selection.servers[i]] = got[i];
  res_.stats.seconds_setup = seconds_since(t0);
}

void PartyRun::offline() {
  const auto t0 = std::chrono::steady_clock::now();
  ch_.set_phase(Phase::Offline);
  res_.reached = Phase::Offline;
  const std::size_t M = s_.mul_blocks(), total = n_ * M, B = std::max<std::size_t>(cfg_.ole_batch, 1);
  auto fetch_send = [&] {
    for (std::size_t done = 0; done < total; done += B) {
      auto part = ole_.sender_batch(std::min(B, total - done));
      send_all_.insert(send_all_.end(), part.begin(), part.end());
    }
  };
  auto fetch_recv = [&] {
    for (std::size_t done = 0; done < total; done += B) {
      auto part = ole_.receiver_batch(std::min(B, total - done));
      recv_all_.insert(recv_all_.end(), part.begin(), part.end());
    }
  };
  // direction 0 (party 0 sends) first
  if (me_ == 0) {
    fetch_send();
    fetch_recv();
  } else {
    fetch_recv();
    fetch_send();
  }
  if (send_all_.size() != total || recv_all_.size() != total) throw ProtocolError("OLE backend returned a short batch");
  pool_.add_sender(send_all_);
  pool_.add_receiver(recv_all_);

  for (std::size_t j = 0; j < n_; ++j) {
    const Seed ts = server_tape_seed(cfg_.master, j);
    rho_.push_back(rho_tape(ts));
    tau_.push_back(tau_tape(ts));
  }

  // watchlist report: tape seed and OLE halves of every server, sealed under its key
  const std::size_t plain = 32 + 4 * PrimeField::kBytes * M, chunk = plain + kTagBytes;
  std::vector<uint8_t> frame;
  frame.reserve(n_ * chunk);
  for (std::size_t j = 0; j < n_; ++j) {
    const Seed ts = server_tape_seed(cfg_.master, j);
    std::vector<uint8_t> payload(ts.begin(), ts.end());
    for (std::size_t b = 0; b < M; ++b) {
      const Fe v[2] = {send_all_[b * n_ + j].a, send_all_[b * n_ + j].v};
      F_.append(payload, v);
    }
    for (std::size_t b = 0; b < M; ++b) {
      const Fe v[2] = {recv_all_[b * n_ + j].u, recv_all_[b * n_ + j].w};
      F_.append(payload, v);
    }
    auto sealed = enc_[j].seal(0, payload);
    frame.insert(frame.end(), sealed.begin(), sealed.end());
  }
  const auto peer = ch_.exchange(MsgType::WatchlistCiphertext, frame, me_ == 0, "offline-report");
  if (peer.size() != n_ * chunk) throw ProtocolError("offline report has the wrong length");
  for (const auto& [j, key] : peer_keys_) {
    auto opened = open_sealed(key, 0, std::span(peer).subspan(j * chunk, chunk));
    if (!opened) watch_fail(j, "offline report does not open");
    Seed ts;
    std::copy(opened->begin(), opened->begin() + 32, ts.begin());
    peer_rho_.emplace(j, rho_tape(ts));
    peer_tau_.emplace(j, tau_tape(ts));
    const auto v = F_.read_vec(std::span(*opened).subspan(32));
    auto& ps = peer_send_[j];
    auto& pr = peer_recv_[j];
    for (std::size_t b = 0; b < M; ++b) ps.push_back({v[2 * b], v[2 * b + 1]});
    for (std::size_t b = 0; b < M; ++b) pr.push_back({v[2 * M + 2 * b], v[2 * M + 2 * b + 1]});
    for (std::size_t b = 0; b < M; ++b) {
      if (!holds(F_, {ps[b], recv_all_[b * n_ + j]}) || !holds(F_, {send_all_[b * n_ + j], pr[b]}))
        watch_fail(j, "reported OLE halves do not match this party's halves");
    }
  }
  res_.stats.seconds_offline = seconds_since(t0);
}

void PartyRun::attack(RowId r) {
  for (const auto& a : cfg_.hooks.share_attacks) {
    if (a.row != r) continue;
    for (std::size_t i = 0; i < a.servers.size(); ++i)
      share_[r][a.servers[i]] = F_.add(share_[r][a.servers[i]], a.deltas[i]);
  }
}

void PartyRun::local_step(const Step& step) {
  for (std::size_t i = 0; i < step.targets.size(); ++i) {
    const auto [a, b] = step.operands[i];
    const RowId t = step.targets[i];
    for (std::size_t j = 0; j < n_; ++j) {
      if (step.op == GateOp::Add) {
        share_[t][j] = F_.add(share_[a][j], share_[b][j]);
        shadow_[t][j] = F_.add(shadow_[a][j], shadow_[b][j]);
      } else {
        share_[t][j] = F_.sub(share_[a][j], share_[b][j]);
        shadow_[t][j] = F_.sub(shadow_[a][j], shadow_[b][j]);
      }
    }
    attack(t);
  }
}

void PartyRun::mul_step(const Step& step) {
  const std::size_t m = step.targets.size(), N = m * n_;
  std::vector<Fe> x(N), y(N), tau(N);
  for (std::size_t b = 0; b < m; ++b)
    for (std::size_t j = 0; j < n_; ++j) {
      x[b * n_ + j] = share_[step.operands[b].first][j];
      y[b * n_ + j] = share_[step.operands[b].second][j];
      tau[b * n_ + j] = F_.sample(tau_[j]);
    }
  const auto send = pool_.take_sender(N);
  const auto recv = pool_.take_receiver(N);
  GmwTranscript tr;
  const auto out = gmw_mul(ch_, me_, F_, x, y, tau, send, recv, &tr, "gmw");
  res_.stats.gmw_products += N;
  for (std::size_t b = 0; b < m; ++b) {
    const RowId t = step.targets[b];
    for (std::size_t j = 0; j < n_; ++j) share_[t][j] = out[b * n_ + j];
    for (auto& [j, ptape] : peer_tau_) {
      const std::size_t idx = b * n_ + j, g = mul_done_ + b;
      const Fe sx = shadow_[step.operands[b].first][j], sy = shadow_[step.operands[b].second][j];
      const Fe ptau = F_.sample(ptape);
      const OleSenderHalf& ps = peer_send_[j][g];
      const OleReceiverHalf& pr = peer_recv_[j][g];
      if (tr.peer_delta[idx] != ole_receiver_delta(F_, pr, sy)) watch_fail(j, "OLE mask differs");
      if (tr.peer_reply[idx] != ole_sender_reply(F_, ps, sx, ptau, tr.delta[idx])) watch_fail(j, "OLE reply differs");
      shadow_[t][j] = F_.add(F_.sub(F_.mul(sx, sy), ptau), ole_receiver_output(F_, pr, sy, tr.reply[idx]));
    }
    attack(t);
  }
  mul_done_ += m;
}

std::vector<Codeword> PartyRun::share_out(const Step& step) {
  const std::size_t m = step.sources.size();
  std::vector<Codeword> own_rho(m, Codeword(n_));
  std::vector<Fe> mine;
  mine.reserve(m * n_);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      Fe rho = F_.sample(rho_[j]);
      if (evade_.count(j)) rho = F_.add(rho, cfg_.hooks.evade_delta);
      own_rho[i][j] = rho;
      mine.push_back(me_ == 0 ? F_.sub(share_[step.sources[i]][j], rho) : rho);
    }
  const auto peer = swap(MsgType::Emulation, mine, "share-out", m * n_);
  std::vector<Codeword> received(m, Codeword(n_));
  for (std::size_t i = 0; i < m; ++i) {
    const RowId r = step.sources[i];
    for (std::size_t j = 0; j < n_; ++j) {
      const Fe got = peer[i * n_ + j];
      received[i][j] = me_ == 0 ? F_.add(own_rho[i][j], got) : F_.sub(F_.add(got, share_[r][j]), own_rho[i][j]);
    }
    for (auto& [j, ptape] : peer_rho_) {
      const Fe prho = F_.sample(ptape);
      const Fe expect = peer_ == 0 ? F_.sub(shadow_[r][j], prho) : prho;
      if (peer[i * n_ + j] != expect) watch_fail(j, "share-out of row " + std::to_string(r) + " differs");
    }
  }
  return received;
}

void PartyRun::client_step(std::size_t index, const Step& step, ClientContext& ctx, Prg& crng) {
  const std::vector<Codeword> received = share_out(step);
  std::vector<Codeword> msgs = client_targets(ctx, step, received, crng);
  if (cfg_.hooks.client_tamper) cfg_.hooks.client_tamper(step, msgs);
  std::vector<std::size_t> mine, theirs;
  for (std::size_t i = 0; i < step.targets.size(); ++i) {
    if (client_writes(s_, step.targets[i], me_)) mine.push_back(i);
    if (client_writes(s_, step.targets[i], peer_)) theirs.push_back(i);
  }
  const uint64_t counter = 1 + index;
  std::vector<uint8_t> frame;
  for (std::size_t j = 0; j < n_; ++j) {
    std::vector<uint8_t> payload;
    payload.reserve(mine.size() * PrimeField::kBytes);
    for (std::size_t i : mine) {
      const Fe v[1] = {msgs[i][j]};
      F_.append(payload, v);
    }
    auto sealed = enc_[j].seal(counter, payload);
    frame.insert(frame.end(), sealed.begin(), sealed.end());
  }
  const auto peer = ch_.exchange(MsgType::WatchlistCiphertext, frame, me_ == 0, "client-messages");
  const std::size_t chunk = theirs.size() * PrimeField::kBytes + kTagBytes;
  if (peer.size() != n_ * chunk) throw ProtocolError("client messages have the wrong length");
  for (std::size_t i : mine) share_[step.targets[i]] = msgs[i];
  for (const auto& [j, key] : peer_keys_) {
    auto opened = open_sealed(key, counter, std::span(peer).subspan(j * chunk, chunk));
    if (!opened) watch_fail(j, "client message does not open");
    const auto v = F_.read_vec(*opened);
    for (std::size_t k = 0; k < theirs.size(); ++k) shadow_[step.targets[theirs[k]]][j] = v[k];
  }
  for (RowId t : step.targets) attack(t);
}

void PartyRun::tests() {
  Prg trng(derive_seed(cfg_.master, "test-coins"));
  const Seed seed = seed_from_coins(F_, coin_toss(ch_, me_ == 0, F_, coin_seed_width(F_), trng));
  res_.test_seed = seed;
  const std::size_t sigma = s_.params().sigma;
  for (TestKind t : {TestKind::Degree, TestKind::Permutation, TestKind::Equality}) {
    std::vector<Fe> mine;
    std::vector<Codeword> expect;
    for (std::size_t rep = 0; rep < sigma; ++rep) {
      const auto coins = test_coins(F_, seed, t, rep, test_coin_count(s_, t));
      const Codeword l = test_combination(spec_, s_, share_, t, rep, coins);
      mine.insert(mine.end(), l.begin(), l.end());
      expect.push_back(test_combination(spec_, s_, shadow_, t, rep, coins));
    }
    const auto peer = swap(MsgType::TestBroadcast, mine, "test-broadcast", sigma * n_);
    for (std::size_t rep = 0; rep < sigma; ++rep)
      for (const auto& kv : peer_keys_)
        if (peer[rep * n_ + kv.first] != expect[rep][kv.first])
          watch_fail(kv.first, std::string(to_string(t)) + " test broadcast differs");
    for (std::size_t rep = 0; rep < sigma; ++rep) {
      Codeword l(n_);
      for (std::size_t j = 0; j < n_; ++j) l[j] = F_.add(mine[rep * n_ + j], peer[rep * n_ + j]);
      const std::string why = test_check(spec_, t, l);
      if (!why.empty()) throw Abort(AbortInfo{to_string(t), rep, why, std::nullopt});
    }
  }
}

void PartyRun::outputs() {
  const auto& rows = s_.output_rows();
  std::vector<Fe> mine;
  for (RowId r : rows) mine.insert(mine.end(), share_[r].begin(), share_[r].end());
  const auto peer = swap(MsgType::Output, mine, "output", rows.size() * n_);
  RowStore full(s_.rows().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& kv : peer_keys_)
      if (peer[i * n_ + kv.first] != shadow_[rows[i]][kv.first]) watch_fail(kv.first, "output share differs");
    Codeword& row = full[rows[i]];
    row.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) row[j] = F_.add(mine[i * n_ + j], peer[i * n_ + j]);
  }
  std::string why;
  auto out = reveal_outputs(spec_, s_, full, &why);
  if (!why.empty()) throw Abort(AbortInfo{"output", 0, why, std::nullopt});
  const uint8_t ok[1] = {1};
  const auto ack = ch_.exchange(MsgType::Output, ok, me_ == 0, "accept");
  if (ack.size() != 1 || ack[0] != 1) throw ProtocolError("malformed accept message");
  res_.outputs = std::move(out);
}

void PartyRun::online() {
  const auto t0 = std::chrono::steady_clock::now();
  ch_.set_phase(Phase::Online);
  res_.reached = Phase::Online;
  const LayeredCircuit& c = s_.circuit();
  evade_.insert(cfg_.hooks.evade_servers.begin(), cfg_.hooks.evade_servers.end());

  const std::size_t own = c.input_count(me_ == 0 ? InputOwner::Party0 : InputOwner::Party1);
  const std::size_t other = c.input_count(me_ == 0 ? InputOwner::Party1 : InputOwner::Party0);
  if (cfg_.inputs.size() != own)
    throw ProtocolError("party " + std::to_string(me_) + " has " + std::to_string(cfg_.inputs.size()) +
                        " inputs, circuit expects " + std::to_string(own));
  Prg srng(derive_seed(cfg_.master, "input-share"));
  const auto r = F_.sample_vec(srng, own);
  const auto peer_r = swap(MsgType::InputShare, r, "input-share", other);
  std::vector<Fe> kept(own);
  for (std::size_t i = 0; i < own; ++i) kept[i] = F_.sub(cfg_.inputs[i], r[i]);
  std::vector<Fe> x_share = me_ == 0 ? kept : peer_r, y_share = me_ == 0 ? peer_r : kept;

  std::vector<Fe> coins;
  if (const std::size_t cc = c.input_count(InputOwner::Coin); cc > 0) {
    Prg crng(derive_seed(cfg_.master, "circuit-coins"));
    coins = coin_toss(ch_, me_ == 0, F_, cc, crng);
  }

  ClientContext ctx;
  ctx.spec = &spec_;
  ctx.schedule = &s_;
  ctx.id = me_;
  ctx.x_share = x_share;
  ctx.y_share = y_share;
  Prg crng(client_seed(cfg_.master));
  share_.assign(s_.rows().size(), Codeword(n_, F_.zero()));
  shadow_ = share_;

  const auto& steps = s_.steps();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Step& step = steps[i];
    switch (step.kind) {
      case StepKind::Constants:
        for (RowId r : step.targets) {
          (me_ == 0 ? share_ : shadow_)[r] = constant_row(spec_, s_, r, coins);
          attack(r);
        }
        break;
      case StepKind::Local:
        if (step.op == GateOp::Mul) mul_step(step);
        else local_step(step);
        break;
      default:
        if (!step.targets.empty()) client_step(i, step, ctx, crng);
    }
  }
  tests();
  outputs();
  res_.stats.seconds_online = seconds_since(t0);
  if (cfg_.keep_state) {
    res_.state = share_;
    res_.x_share = std::move(x_share);
    res_.y_share = std::move(y_share);
    res_.coins = std::move(coins);
  }
}

PartyResult PartyRun::run() {
  try {
    setup();
    offline();
    online();
    res_.accepted = true;
  } catch (const Abort& a) {
    ch_.send_abort(a.what());
    res_.abort = a.info;
    res_.flagged_server = a.server;
  } catch (const PeerAbort& e) {
    res_.abort = AbortInfo{"peer", 0, e.what(), std::nullopt};
  } catch (const std::exception& e) {
    ch_.send_abort(e.what());
    res_.abort = AbortInfo{"protocol", 0, e.what(), std::nullopt};
  }
  if (!res_.accepted) res_.outputs.clear();
  res_.ledger = ch_.ledger();
  res_.transcript = ch_.transcript();
  res_.stats.ole_invocations = ole_.invocations();
  res_.stats.oles_consumed = pool_.consumed();
  return std::move(res_);
}

}  // namespace

PartyResult run_party(FramedChannel& ch, OtBackend& ot, OleProvider& ole, const CodeSpec& spec, const Schedule& s,
                      const PartyConfig& cfg) {
  if (cfg.party != 0 && cfg.party != 1) throw std::invalid_argument("party must be 0 or 1");
  PartyRun run(ch, ot, ole, spec, s, cfg);
  return run.run();
}

LocalRun run_local(const CodeSpec& spec, const Schedule& s, std::span<const Fe> x, std::span<const Fe> y,
                   const LocalRunOptions& opt) {
  auto [a, b] = make_memory_pipe();
  FramedChannel ch[2] = {FramedChannel(std::move(a)), FramedChannel(std::move(b))};
  IdealOtOracle oracle;
  IdealOt ot[2] = {IdealOt(oracle, 0), IdealOt(oracle, 1)};
  IdealOleProvider ole[2] = {IdealOleProvider(spec.field, opt.dealer_seed, 0),
                             IdealOleProvider(spec.field, opt.dealer_seed, 1)};
  PartyConfig cfg[2];
  for (int i = 0; i < 2; ++i) {
    cfg[i].party = i;
    cfg[i].master = opt.master[i];
    cfg[i].ole_batch = opt.ole_batch;
    cfg[i].keep_state = opt.keep_state;
    cfg[i].hooks = opt.hooks[i];
    ch[i].record_transcript(opt.record_transcript);
  }
  cfg[0].inputs.assign(x.begin(), x.end());
  cfg[1].inputs.assign(y.begin(), y.end());
  LocalRun out;
  auto body = [&](int i) {
    out.party[i] = run_party(ch[i], ot[i], ole[i], spec, s, cfg[i]);
    // a party that failed during setup may leave the other blocked in the OT
    if (!out.party[i].accepted && out.party[i].reached == Phase::Setup) oracle.cancel();
  };
  std::thread t(body, 1);
  body(0);
  t.join();
  return out;
}

}  // namespace ips2pc
