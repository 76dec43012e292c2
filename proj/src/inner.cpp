#include "ips2pc/inner.hpp"

#include <string>

namespace ips2pc {

bool holds(const PrimeField& F, const RandomOleCorrelation& c) {
  return c.receiver.w == ole_ideal(F, c.sender.a, c.sender.v, c.receiver.u);
}

std::vector<RandomOleCorrelation> IdealOleBackend::invoke(std::size_t count) {
  Prg rng(derive_seed(seed_, "ole-batch", invocations_++));
  std::vector<RandomOleCorrelation> out(count);
  for (auto& c : out) {
    c.sender.a = F_.sample(rng);
    c.sender.v = F_.sample(rng);
    c.receiver.u = F_.sample(rng);
    c.receiver.w = ole_ideal(F_, c.sender.a, c.sender.v, c.receiver.u);
  }
  return out;
}

std::vector<RandomOleCorrelation> gen_random_oles(OleBackend& backend, std::size_t count, std::size_t batch) {
  if (batch == 0) throw std::invalid_argument("gen_random_oles: batch size must be positive");
  std::vector<RandomOleCorrelation> out;
  out.reserve(count);
  while (out.size() < count) {
    auto part = backend.invoke(std::min(batch, count - out.size()));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

IdealOleProvider::IdealOleProvider(const PrimeField& F, const Seed& dealer_seed, int party)
    : party_(party),
      dir_{IdealOleBackend(F, derive_seed(dealer_seed, "ole-direction", 0)),
           IdealOleBackend(F, derive_seed(dealer_seed, "ole-direction", 1))} {
  if (party != 0 && party != 1) throw std::invalid_argument("party must be 0 or 1");
}

std::vector<OleSenderHalf> IdealOleProvider::sender_batch(std::size_t count) {
  ++invocations_;
  std::vector<OleSenderHalf> out;
  for (const auto& c : dir_[party_].invoke(count)) out.push_back(c.sender);
  return out;
}

std::vector<OleReceiverHalf> IdealOleProvider::receiver_batch(std::size_t count) {
  ++invocations_;
  std::vector<OleReceiverHalf> out;
  for (const auto& c : dir_[1 - party_].invoke(count)) out.push_back(c.receiver);
  return out;
}

// ---------------------------------------------------------------------------

void OlePool::add_sender(std::span<const OleSenderHalf> h) {
  std::lock_guard lock(mu_);
  sender_.insert(sender_.end(), h.begin(), h.end());
}

void OlePool::add_receiver(std::span<const OleReceiverHalf> h) {
  std::lock_guard lock(mu_);
  receiver_.insert(receiver_.end(), h.begin(), h.end());
}

namespace {

template <class T>
std::vector<T> pop_front(std::deque<T>& q, std::size_t count, const char* what) {
  if (q.size() < count)
    throw ProtocolError(std::string("OLE pool exhausted: need ") + std::to_string(count) + " " + what +
                        " halves, have " + std::to_string(q.size()));
  std::vector<T> out(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(count));
  q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

}  // namespace

std::vector<OleSenderHalf> OlePool::take_sender(std::size_t count) {
  std::lock_guard lock(mu_);
  auto out = pop_front(sender_, count, "sender");
  consumed_ += count;
  return out;
}

std::vector<OleReceiverHalf> OlePool::take_receiver(std::size_t count) {
  std::lock_guard lock(mu_);
  auto out = pop_front(receiver_, count, "receiver");
  consumed_ += count;
  return out;
}

std::size_t OlePool::sender_available() const {
  std::lock_guard lock(mu_);
  return sender_.size();
}

std::size_t OlePool::receiver_available() const {
  std::lock_guard lock(mu_);
  return receiver_.size();
}

std::size_t OlePool::consumed() const {
  std::lock_guard lock(mu_);
  return consumed_;
}

// ---------------------------------------------------------------------------

namespace {

void require_sizes(std::size_t n, std::initializer_list<std::size_t> others) {
  for (std::size_t m : others)
    if (m != n) throw ProtocolError("gmw: batch size mismatch");
}

}  // namespace

std::vector<Fe> gmw_deltas(const PrimeField& F, std::span<const Fe> y, std::span<const OleReceiverHalf> recv) {
  require_sizes(y.size(), {recv.size()});
  std::vector<Fe> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = ole_receiver_delta(F, recv[i], y[i]);
  return out;
}

std::vector<OleReply> gmw_replies(const PrimeField& F, std::span<const Fe> x, std::span<const Fe> tau,
                                  std::span<const OleSenderHalf> send, std::span<const Fe> peer_delta) {
  require_sizes(x.size(), {tau.size(), send.size(), peer_delta.size()});
  std::vector<OleReply> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = ole_sender_reply(F, send[i], x[i], tau[i], peer_delta[i]);
  return out;
}

std::vector<Fe> gmw_output(const PrimeField& F, std::span<const Fe> x, std::span<const Fe> y, std::span<const Fe> tau,
                           std::span<const OleReceiverHalf> recv, std::span<const OleReply> peer_reply) {
  require_sizes(x.size(), {y.size(), tau.size(), recv.size(), peer_reply.size()});
  std::vector<Fe> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Fe cross = ole_receiver_output(F, recv[i], y[i], peer_reply[i]);
    out[i] = F.add(F.sub(F.mul(x[i], y[i]), tau[i]), cross);
  }
  return out;
}

std::vector<uint8_t> encode_replies(const PrimeField& F, std::span<const OleReply> r) {
  std::vector<uint8_t> out;
  out.reserve(r.size() * 16);
  for (const auto& x : r) {
    const Fe pair[2] = {x.alpha, x.gamma};
    F.append(out, pair);
  }
  return out;
}

std::vector<OleReply> decode_replies(const PrimeField& F, std::span<const uint8_t> bytes) {
  const auto v = F.read_vec(bytes);
  if (v.size() % 2) throw ProtocolError("gmw: odd number of reply elements");
  std::vector<OleReply> out(v.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

std::vector<Fe> gmw_mul(FramedChannel& ch, int party, const PrimeField& F, std::span<const Fe> x,
                        std::span<const Fe> y, std::span<const Fe> tau, std::span<const OleSenderHalf> send,
                        std::span<const OleReceiverHalf> recv, GmwTranscript* transcript, std::string_view term) {
  const bool first = party == 0;
  std::vector<Fe> delta = gmw_deltas(F, y, recv);
  std::vector<uint8_t> buf;
  F.append(buf, delta);
  std::vector<Fe> peer_delta = F.read_vec(ch.exchange(MsgType::Emulation, buf, first, term));
  if (peer_delta.size() != x.size()) throw ProtocolError("gmw: peer sent " + std::to_string(peer_delta.size()) + " masks");
  std::vector<OleReply> reply = gmw_replies(F, x, tau, send, peer_delta);
  std::vector<OleReply> peer_reply = decode_replies(F, ch.exchange(MsgType::Emulation, encode_replies(F, reply), first, term));
  if (peer_reply.size() != x.size()) throw ProtocolError("gmw: peer sent " + std::to_string(peer_reply.size()) + " replies");
  std::vector<Fe> out = gmw_output(F, x, y, tau, recv, peer_reply);
  if (transcript) *transcript = {std::move(delta), std::move(peer_delta), std::move(reply), std::move(peer_reply)};
  return out;
}

}  // namespace ips2pc
