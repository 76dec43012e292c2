#pragma once

#include <array>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "ips2pc/field.hpp"
#include "ips2pc/transport.hpp"

namespace ips2pc {

using Seed = std::array<uint8_t, 32>;
using Digest = std::array<uint8_t, 32>;
using WatchKey = Seed;

/// SHA-256.
Digest sha256(std::span<const uint8_t> data);

class Sha256 {
 public:
  Sha256();
  Sha256& update(std::span<const uint8_t> data);
  Sha256& update_u64(uint64_t v);
  Digest finish();

 private:
  alignas(64) std::array<uint8_t, 128> state_;
};

/// Fresh seed from the operating system.
Seed os_random_seed();
Seed seed_from_u64(uint64_t x);

/// Domain-separated child seed: SHA-256(master || label || index).
Seed derive_seed(const Seed& master, std::string_view label, uint64_t index = 0);

/// ChaCha20 keystream generator; satisfies UniformRandomBitGenerator.
class Prg {
 public:
  using result_type = uint64_t;
  explicit Prg(const Seed& seed, uint64_t stream = 0);
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();
  void fill(std::span<uint8_t> out);
  Seed next_seed();

 private:
  void refill();
  Seed key_;
  std::array<uint8_t, 12> nonce_{};
  uint32_t block_ = 0;
  std::array<uint8_t, 512> buf_{};
  std::size_t pos_ = 512;
};

// ---------------------------------------------------------------------------
// commitments

struct Commitment {
  Digest digest{};
};

struct Opening {
  std::vector<uint8_t> payload;
  std::array<uint8_t, 32> randomness{};
};

/// digest = SHA-256(payload || randomness)
Commitment commit_with(std::span<const uint8_t> payload, const std::array<uint8_t, 32>& randomness);
inline std::pair<Commitment, Opening> commit(std::span<const uint8_t> payload, Prg& rng) {
  Opening o{std::vector<uint8_t>(payload.begin(), payload.end()), {}};
  rng.fill(o.randomness);
  return {commit_with(payload, o.randomness), std::move(o)};
}
/// Returns the payload iff the opening matches.
std::optional<std::vector<uint8_t>> open(const Commitment& c, const Opening& o);

// ---------------------------------------------------------------------------
// watchlist channel encryption

constexpr std::size_t kTagBytes = 16;

/// plaintext XOR ChaCha20(key, nonce = counter).
std::vector<uint8_t> stream_xor(const WatchKey& key, uint64_t counter, std::span<const uint8_t> data);

/// Encryptor that refuses to reuse a counter under its key.
class StreamEncryptor {
 public:
  explicit StreamEncryptor(const WatchKey& key) : key_(key) {}
  std::vector<uint8_t> encrypt(uint64_t counter, std::span<const uint8_t> plaintext);
  /// stream_xor(plaintext) || SHA-256(key || counter || plaintext)[0..16)
  std::vector<uint8_t> seal(uint64_t counter, std::span<const uint8_t> plaintext);
  const WatchKey& key() const { return key_; }

 private:
  void claim(uint64_t counter);
  WatchKey key_;
  std::set<uint64_t> used_;
};

/// Inverse of seal; nullopt when the tag does not verify (e.g. wrong key).
std::optional<std::vector<uint8_t>> open_sealed(const WatchKey& key, uint64_t counter,
                                                std::span<const uint8_t> sealed);

// ---------------------------------------------------------------------------
// t-out-of-n OT of watchlist keys

struct WatchlistSelection {
  std::vector<std::size_t> servers;  // sorted, distinct
  bool contains(std::size_t j) const;
};

WatchlistSelection sample_selection(std::size_t n, std::size_t t, Prg& rng);
void validate_selection(const WatchlistSelection& s, std::size_t n, std::size_t t);

class OtBackend {
 public:
  virtual ~OtBackend() = default;
  /// Sender side: offers n keys, any t of which the receiver may learn.
  virtual void send(std::span<const WatchKey> keys, std::size_t t) = 0;
  /// Receiver side: returns keys[j] for every selected j, in selection order.
  virtual std::vector<WatchKey> receive(std::size_t n, const WatchlistSelection& selection) = 0;
};

/// Trusted in-process OT functionality shared by both parties of one session.
class IdealOtOracle {
 public:
  struct Offer {
    std::vector<WatchKey> keys;
    std::size_t t = 0;
  };
  void deposit(int sender, Offer offer);
  Offer take(int sender);
  /// Wakes blocked receivers with ConnectionLost (used when a party fails).
  void cancel();

 private:
  bool cancelled_ = false;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Offer> offers_[2];
};

/// One party's handle to the ideal oracle. `log()` records exactly the bytes
/// this party handed to the functionality.
class IdealOt final : public OtBackend {
 public:
  IdealOt(IdealOtOracle& oracle, int party) : oracle_(oracle), party_(party) {}
  void send(std::span<const WatchKey> keys, std::size_t t) override;
  std::vector<WatchKey> receive(std::size_t n, const WatchlistSelection& selection) override;
  const std::vector<uint8_t>& log() const { return log_; }

 private:
  IdealOtOracle& oracle_;
  int party_;
  std::vector<uint8_t> log_;
};

// ---------------------------------------------------------------------------
// coin tossing

class CoinTossError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

struct CoinTossHooks {
  bool zero_share = false;
  /// Replaces the honest share; called after the peer's commitment is known
  /// when this party receives first.
  std::function<std::vector<Fe>(const Commitment& peer)> choose_share;
};

/// Commit, exchange digests, open. Output is the coordinate-wise field sum of
/// both shares. `send_first` must differ between the two parties.
std::vector<Fe> coin_toss(FramedChannel& ch, bool send_first, const PrimeField& F, std::size_t width, Prg& rng,
                          const CoinTossHooks* hooks = nullptr);

/// Number of field elements tossed to obtain a 256-bit seed.
std::size_t coin_seed_width(const PrimeField& F);
Seed seed_from_coins(const PrimeField& F, std::span<const Fe> coins);

}  // namespace ips2pc
