#include "ips2pc/dealer.hpp"

#include <thread>

namespace ips2pc {

namespace {

uint64_t read_u64(std::span<const uint8_t> in, std::size_t at) {
  if (in.size() < at + 8) throw ProtocolError("dealer: truncated message");
  return get_u64(in.data() + at);
}

constexpr uint8_t kSender = 0, kReceiver = 1;

}  // namespace

DealerService::DealerService(const PrimeField& F, const Seed& seed, uint16_t port)
    : F_(F), seed_(seed), listener_(port) {}

std::vector<RandomOleCorrelation> DealerService::ole_batch(int direction, int role, std::size_t count) {
  std::lock_guard lock(mu_);
  const std::size_t idx = next_[direction][role]++;
  const auto key = std::make_pair(direction, idx);
  auto it = pending_.find(key);
  if (it == pending_.end()) {
    Prg rng(derive_seed(derive_seed(seed_, "ole-direction", static_cast<uint64_t>(direction)), "ole-batch", idx));
    Pending p;
    p.corr.resize(count);
    for (auto& c : p.corr) {
      c.sender = {F_.sample(rng), F_.sample(rng)};
      c.receiver.u = F_.sample(rng);
      c.receiver.w = ole_ideal(F_, c.sender.a, c.sender.v, c.receiver.u);
    }
    it = pending_.emplace(key, std::move(p)).first;
  } else if (it->second.corr.size() != count) {
    throw ProtocolError("dealer: OLE batch " + std::to_string(idx) + " requested with sizes " +
                        std::to_string(it->second.corr.size()) + " and " + std::to_string(count));
  }
  auto out = it->second.corr;
  if (++it->second.served == 2) pending_.erase(it);
  return out;
}

void DealerService::serve(FramedChannel& ch, int party) {
  for (;;) {
    Frame f;
    try {
      f = ch.recv_any();
    } catch (const ConnectionLost&) {
      return;
    }
    switch (f.type) {
      case MsgType::OtKeys: {
        const uint64_t t = read_u64(f.payload, 0);
        if ((f.payload.size() - 8) % 32) throw ProtocolError("dealer: malformed OT keys");
        IdealOtOracle::Offer offer;
        offer.t = t;
        offer.keys.resize((f.payload.size() - 8) / 32);
        for (std::size_t i = 0; i < offer.keys.size(); ++i)
          std::copy_n(f.payload.begin() + 8 + 32 * i, 32, offer.keys[i].begin());
        ot_.deposit(party, std::move(offer));
        break;
      }
      case MsgType::OtSelection: {
        const uint64_t n = read_u64(f.payload, 0);
        WatchlistSelection sel;
        for (std::size_t at = 8; at < f.payload.size(); at += 8) sel.servers.push_back(read_u64(f.payload, at));
        const auto offer = ot_.take(1 - party);
        if (offer.keys.size() != n) throw ProtocolError("dealer: OT sender offered a different number of keys");
        validate_selection(sel, n, offer.t);
        std::vector<uint8_t> out;
        for (auto j : sel.servers) out.insert(out.end(), offer.keys[j].begin(), offer.keys[j].end());
        ch.send(MsgType::OtResult, out);
        break;
      }
      case MsgType::OleRequest: {
        if (f.payload.size() != 9) throw ProtocolError("dealer: malformed OLE request");
        const uint8_t role = f.payload[0];
        const std::size_t count = read_u64(f.payload, 1);
        const int direction = role == kSender ? party : 1 - party;
        const auto corr = ole_batch(direction, role, count);
        std::vector<Fe> flat;
        flat.reserve(2 * count);
        for (const auto& c : corr) {
          if (role == kSender) flat.insert(flat.end(), {c.sender.a, c.sender.v});
          else flat.insert(flat.end(), {c.receiver.u, c.receiver.w});
        }
        std::vector<uint8_t> out;
        F_.append(out, flat);
        ch.send(MsgType::OleHalves, out);
        break;
      }
      default:
        throw ProtocolError("dealer: unexpected " + std::string(to_string(f.type)) + " frame");
    }
  }
}

void DealerService::serve_session() {
  std::unique_ptr<FramedChannel> ch[2];
  for (int i = 0; i < 2; ++i) {
    auto c = std::make_unique<FramedChannel>(listener_.accept());
    const Frame hello = c->recv(MsgType::Hello);
    if (hello.payload.size() != 1 || hello.payload[0] > 1) throw ProtocolError("dealer: malformed hello");
    const int party = hello.payload[0];
    if (ch[party]) throw ProtocolError("dealer: party " + std::to_string(party) + " connected twice");
    ch[party] = std::move(c);
  }
  std::exception_ptr err[2];
  auto body = [&](int p) {
    try {
      serve(*ch[p], p);
    } catch (...) {
      err[p] = std::current_exception();
      ot_.cancel();
      try {
        ch[p]->send_abort("dealer failure");
      } catch (...) {
      }
    }
    ledger_[p] = ch[p]->ledger();
  };
  std::thread t(body, 1);
  body(0);
  t.join();
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------

DealerClient::DealerClient(std::unique_ptr<ByteStream> stream, int party) : ch_(std::move(stream)), party_(party) {
  const uint8_t hello[1] = {static_cast<uint8_t>(party)};
  ch_.send(MsgType::Hello, hello);
}

void DealerOt::send(std::span<const WatchKey> keys, std::size_t t) {
  std::vector<uint8_t> out;
  put_u64(out, t);
  for (const auto& k : keys) out.insert(out.end(), k.begin(), k.end());
  c_.channel().send(MsgType::OtKeys, out);
}

std::vector<WatchKey> DealerOt::receive(std::size_t n, const WatchlistSelection& selection) {
  std::vector<uint8_t> out;
  put_u64(out, n);
  for (auto j : selection.servers) put_u64(out, j);
  c_.channel().send(MsgType::OtSelection, out);
  const Frame f = c_.channel().recv(MsgType::OtResult);
  if (f.payload.size() != 32 * selection.servers.size()) throw ProtocolError("dealer: malformed OT result");
  std::vector<WatchKey> keys(selection.servers.size());
  for (std::size_t i = 0; i < keys.size(); ++i) std::copy_n(f.payload.begin() + 32 * i, 32, keys[i].begin());
  return keys;
}

std::vector<Fe> DealerOleProvider::fetch(uint8_t role, std::size_t count) {
  ++invocations_;
  std::vector<uint8_t> req{role};
  put_u64(req, count);
  c_.channel().send(MsgType::OleRequest, req);
  auto v = F_.read_vec(c_.channel().recv(MsgType::OleHalves).payload);
  if (v.size() != 2 * count) throw ProtocolError("dealer: short OLE batch");
  return v;
}

std::vector<OleSenderHalf> DealerOleProvider::sender_batch(std::size_t count) {
  const auto v = fetch(kSender, count);
  std::vector<OleSenderHalf> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

std::vector<OleReceiverHalf> DealerOleProvider::receiver_batch(std::size_t count) {
  const auto v = fetch(kReceiver, count);
  std::vector<OleReceiverHalf> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

}  // namespace ips2pc
