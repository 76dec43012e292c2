#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "ips2pc/crypto.hpp"
#include "ips2pc/field.hpp"
#include "ips2pc/transport.hpp"

namespace ips2pc {

/// Receiver output of one OLE: a * x + b.
inline Fe ole_ideal(const PrimeField& F, Fe a, Fe b, Fe x) { return F.add(F.mul(a, x), b); }

// ---------------------------------------------------------------------------
// random OLE correlations

struct OleSenderHalf {
  Fe a, v;
  friend bool operator==(const OleSenderHalf&, const OleSenderHalf&) = default;
};
struct OleReceiverHalf {
  Fe u, w;  // w = a * u + v
  friend bool operator==(const OleReceiverHalf&, const OleReceiverHalf&) = default;
};
struct RandomOleCorrelation {
  OleSenderHalf sender;
  OleReceiverHalf receiver;
};

bool holds(const PrimeField& F, const RandomOleCorrelation& c);

/// Produces random OLE correlations; every call to `invoke` is one run of the
/// underlying passive OLE.
class OleBackend {
 public:
  virtual ~OleBackend() = default;
  virtual std::vector<RandomOleCorrelation> invoke(std::size_t count) = 0;
  std::size_t invocations() const { return invocations_; }

 protected:
  std::size_t invocations_ = 0;
};

/// Trusted-dealer OLE: batch i is a deterministic function of (seed, i).
class IdealOleBackend : public OleBackend {
 public:
  IdealOleBackend(const PrimeField& F, const Seed& seed) : F_(F), seed_(seed) {}
  std::vector<RandomOleCorrelation> invoke(std::size_t count) override;

 private:
  PrimeField F_;
  Seed seed_;
};

/// T correlations in ceil(T / B) backend invocations.
std::vector<RandomOleCorrelation> gen_random_oles(OleBackend& backend, std::size_t count, std::size_t batch);

/// One party's handle on the preprocessing. Party i is the OLE sender in
/// direction i and the receiver in direction 1 - i; the two parties must
/// request matching counts in the same order.
class OleProvider {
 public:
  virtual ~OleProvider() = default;
  virtual std::vector<OleSenderHalf> sender_batch(std::size_t count) = 0;
  virtual std::vector<OleReceiverHalf> receiver_batch(std::size_t count) = 0;
  std::size_t invocations() const { return invocations_; }

 protected:
  std::size_t invocations_ = 0;
};

/// In-process dealer: both parties derive their halves from a shared dealer
/// seed. Each provider only ever returns its own halves.
class IdealOleProvider : public OleProvider {
 public:
  IdealOleProvider(const PrimeField& F, const Seed& dealer_seed, int party);
  std::vector<OleSenderHalf> sender_batch(std::size_t count) override;
  std::vector<OleReceiverHalf> receiver_batch(std::size_t count) override;

 private:
  int party_;
  IdealOleBackend dir_[2];
};

/// Single-use FIFO of correlation halves.
class OlePool {
 public:
  void add_sender(std::span<const OleSenderHalf> h);
  void add_receiver(std::span<const OleReceiverHalf> h);
  /// Removes and returns the oldest `count` halves; throws ProtocolError when
  /// fewer remain.
  std::vector<OleSenderHalf> take_sender(std::size_t count);
  std::vector<OleReceiverHalf> take_receiver(std::size_t count);
  std::size_t sender_available() const;
  std::size_t receiver_available() const;
  std::size_t consumed() const;

 private:
  mutable std::mutex mu_;
  std::deque<OleSenderHalf> sender_;
  std::deque<OleReceiverHalf> receiver_;
  std::size_t consumed_ = 0;
};

// ---------------------------------------------------------------------------
// derandomization: receiver sends delta, sender answers (alpha, gamma)

inline Fe ole_receiver_delta(const PrimeField& F, const OleReceiverHalf& c, Fe x) { return F.sub(x, c.u); }

struct OleReply {
  Fe alpha, gamma;
  friend bool operator==(const OleReply&, const OleReply&) = default;
};
inline OleReply ole_sender_reply(const PrimeField& F, const OleSenderHalf& c, Fe a, Fe b, Fe delta) {
  return {F.sub(a, c.a), F.sub(F.add(F.mul(c.a, delta), b), c.v)};
}
inline Fe ole_receiver_output(const PrimeField& F, const OleReceiverHalf& c, Fe x, const OleReply& r) {
  return F.add(F.add(c.w, r.gamma), F.mul(r.alpha, x));
}

// ---------------------------------------------------------------------------
// GMW multiplication on additive shares, vectorized over a batch
//
// Party i holds (x_i, y_i) and a fresh mask tau_i per product. It acts as OLE
// sender with (x_i, tau_i) and as receiver with y_i; the peer learns
// x_i * y_{1-i} + tau_i. Output share: x_i y_i - tau_i + received.

std::vector<Fe> gmw_deltas(const PrimeField& F, std::span<const Fe> y, std::span<const OleReceiverHalf> recv);
std::vector<OleReply> gmw_replies(const PrimeField& F, std::span<const Fe> x, std::span<const Fe> tau,
                                  std::span<const OleSenderHalf> send, std::span<const Fe> peer_delta);
std::vector<Fe> gmw_output(const PrimeField& F, std::span<const Fe> x, std::span<const Fe> y, std::span<const Fe> tau,
                           std::span<const OleReceiverHalf> recv, std::span<const OleReply> peer_reply);

/// Messages one party sends in a batch, and the ones it received.
struct GmwTranscript {
  std::vector<Fe> delta, peer_delta;
  std::vector<OleReply> reply, peer_reply;
};

/// Two exchanges over `ch` (party 0 sends first in each).
std::vector<Fe> gmw_mul(FramedChannel& ch, int party, const PrimeField& F, std::span<const Fe> x,
                        std::span<const Fe> y, std::span<const Fe> tau, std::span<const OleSenderHalf> send,
                        std::span<const OleReceiverHalf> recv, GmwTranscript* transcript = nullptr,
                        std::string_view term = "gmw");

std::vector<uint8_t> encode_replies(const PrimeField& F, std::span<const OleReply> r);
std::vector<OleReply> decode_replies(const PrimeField& F, std::span<const uint8_t> bytes);

}  // namespace ips2pc
