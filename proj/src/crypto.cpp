#include "ips2pc/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace ips2pc {

namespace {

struct SodiumInit {
  SodiumInit() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  }
};

void ensure_sodium() { static SodiumInit once; }

crypto_hash_sha256_state* as_state(std::array<uint8_t, 128>& raw) {
  static_assert(sizeof(crypto_hash_sha256_state) <= 128);
  return reinterpret_cast<crypto_hash_sha256_state*>(raw.data());
}

std::array<uint8_t, 12> counter_nonce(uint64_t counter) {
  std::array<uint8_t, 12> n{};
  for (int i = 0; i < 8; ++i) n[i] = static_cast<uint8_t>(counter >> (8 * i));
  return n;
}

}  // namespace

Digest sha256(std::span<const uint8_t> data) {
  Digest d;
  crypto_hash_sha256(d.data(), data.data(), data.size());
  return d;
}

Sha256::Sha256() {
  ensure_sodium();
  crypto_hash_sha256_init(as_state(state_));
}

Sha256& Sha256::update(std::span<const uint8_t> data) {
  crypto_hash_sha256_update(as_state(state_), data.data(), data.size());
  return *this;
}

Sha256& Sha256::update_u64(uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  return update(b);
}

Digest Sha256::finish() {
  Digest d;
  crypto_hash_sha256_final(as_state(state_), d.data());
  return d;
}

Seed os_random_seed() {
  ensure_sodium();
  Seed s;
  randombytes_buf(s.data(), s.size());
  return s;
}

Seed seed_from_u64(uint64_t x) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(x >> (8 * i));
  return sha256(b);
}

Seed derive_seed(const Seed& master, std::string_view label, uint64_t index) {
  Sha256 h;
  h.update(master);
  h.update_u64(label.size());
  h.update(std::span(reinterpret_cast<const uint8_t*>(label.data()), label.size()));
  h.update_u64(index);
  return h.finish();
}

Prg::Prg(const Seed& seed, uint64_t stream) : key_(seed), nonce_(counter_nonce(stream)) { ensure_sodium(); }

void Prg::refill() {
  buf_.fill(0);
  crypto_stream_chacha20_ietf_xor_ic(buf_.data(), buf_.data(), buf_.size(), nonce_.data(), block_, key_.data());
  block_ += static_cast<uint32_t>(buf_.size() / 64);
  pos_ = 0;
}

Prg::result_type Prg::operator()() {
  if (pos_ + 8 > buf_.size()) refill();
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

void Prg::fill(std::span<uint8_t> out) {
  std::size_t off = 0;
  while (off < out.size()) {
    if (pos_ == buf_.size()) refill();
    const std::size_t k = std::min(out.size() - off, buf_.size() - pos_);
    std::memcpy(out.data() + off, buf_.data() + pos_, k);
    pos_ += k;
    off += k;
  }
}

Seed Prg::next_seed() {
  Seed s;
  fill(s);
  return s;
}

Commitment commit_with(std::span<const uint8_t> payload, const std::array<uint8_t, 32>& randomness) {
  Sha256 h;
  h.update(payload).update(randomness);
  return Commitment{h.finish()};
}

std::optional<std::vector<uint8_t>> open(const Commitment& c, const Opening& o) {
  const Commitment again = commit_with(o.payload, o.randomness);
  if (sodium_memcmp(again.digest.data(), c.digest.data(), c.digest.size()) != 0) return std::nullopt;
  return o.payload;
}

std::vector<uint8_t> stream_xor(const WatchKey& key, uint64_t counter, std::span<const uint8_t> data) {
  std::vector<uint8_t> out(data.size());
  const auto nonce = counter_nonce(counter);
  crypto_stream_chacha20_ietf_xor_ic(out.data(), data.data(), data.size(), nonce.data(), 0, key.data());
  return out;
}

namespace {

std::array<uint8_t, kTagBytes> watch_tag(const WatchKey& key, uint64_t counter, std::span<const uint8_t> pt) {
  Sha256 h;
  h.update(key).update_u64(counter).update(pt);
  const Digest d = h.finish();
  std::array<uint8_t, kTagBytes> tag;
  std::copy_n(d.begin(), kTagBytes, tag.begin());
  return tag;
}

}  // namespace

void StreamEncryptor::claim(uint64_t counter) {
  if (!used_.insert(counter).second)
    throw std::logic_error("stream cipher counter " + std::to_string(counter) + " reused under one key");
}

std::vector<uint8_t> StreamEncryptor::encrypt(uint64_t counter, std::span<const uint8_t> plaintext) {
  claim(counter);
  return stream_xor(key_, counter, plaintext);
}

std::vector<uint8_t> StreamEncryptor::seal(uint64_t counter, std::span<const uint8_t> plaintext) {
  std::vector<uint8_t> out = encrypt(counter, plaintext);
  const auto tag = watch_tag(key_, counter, plaintext);
  out.insert(out.end(), tag.begin(), tag.end());
  return out;
}

std::optional<std::vector<uint8_t>> open_sealed(const WatchKey& key, uint64_t counter,
                                                std::span<const uint8_t> sealed) {
  if (sealed.size() < kTagBytes) return std::nullopt;
  const std::size_t len = sealed.size() - kTagBytes;
  std::vector<uint8_t> pt = stream_xor(key, counter, sealed.first(len));
  const auto tag = watch_tag(key, counter, pt);
  if (sodium_memcmp(tag.data(), sealed.data() + len, kTagBytes) != 0) return std::nullopt;
  return pt;
}

bool WatchlistSelection::contains(std::size_t j) const {
  return std::binary_search(servers.begin(), servers.end(), j);
}

WatchlistSelection sample_selection(std::size_t n, std::size_t t, Prg& rng) {
  if (t > n) throw std::invalid_argument("watchlist size exceeds server count");
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  // partial Fisher-Yates with unbiased bounded sampling
  for (std::size_t i = 0; i < t; ++i) {
    const uint64_t range = n - i;
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % range;
    uint64_t r;
    do r = rng(); while (r >= limit);
    std::swap(all[i], all[i + r % range]);
  }
  WatchlistSelection s{std::vector<std::size_t>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(t))};
  std::sort(s.servers.begin(), s.servers.end());
  return s;
}

void validate_selection(const WatchlistSelection& s, std::size_t n, std::size_t t) {
  if (s.servers.size() != t)
    throw std::invalid_argument("watchlist selection has " + std::to_string(s.servers.size()) +
                                " entries, expected " + std::to_string(t));
  for (std::size_t i = 0; i < s.servers.size(); ++i) {
    if (s.servers[i] >= n) throw std::invalid_argument("watchlist index out of range");
    if (i && s.servers[i] <= s.servers[i - 1]) throw std::invalid_argument("watchlist indices not sorted/distinct");
  }
}

void IdealOtOracle::deposit(int sender, Offer offer) {
  std::lock_guard lock(mu_);
  offers_[sender].push_back(std::move(offer));
  cv_.notify_all();
}

IdealOtOracle::Offer IdealOtOracle::take(int sender) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !offers_[sender].empty() || cancelled_; });
  if (offers_[sender].empty()) throw ConnectionLost("OT session cancelled");
  Offer o = std::move(offers_[sender].front());
  offers_[sender].pop_front();
  return o;
}

void IdealOtOracle::cancel() {
  std::lock_guard lock(mu_);
  cancelled_ = true;
  cv_.notify_all();
}

void IdealOt::send(std::span<const WatchKey> keys, std::size_t t) {
  if (t > keys.size()) throw std::invalid_argument("OT: t exceeds n");
  for (const auto& k : keys) log_.insert(log_.end(), k.begin(), k.end());
  oracle_.deposit(party_, IdealOtOracle::Offer{std::vector<WatchKey>(keys.begin(), keys.end()), t});
}

std::vector<WatchKey> IdealOt::receive(std::size_t n, const WatchlistSelection& selection) {
  IdealOtOracle::Offer offer = oracle_.take(1 - party_);
  if (offer.keys.size() != n) throw ProtocolError("OT: sender offered a different number of keys");
  validate_selection(selection, n, offer.t);
  for (auto j : selection.servers) put_u32(log_, static_cast<uint32_t>(j));
  std::vector<WatchKey> out;
  for (auto j : selection.servers) out.push_back(offer.keys[j]);
  return out;
}

std::size_t coin_seed_width(const PrimeField& F) {
  const auto bits = static_cast<std::size_t>(std::floor(F.log2_size()));
  return (256 + bits - 1) / bits;
}

Seed seed_from_coins(const PrimeField& F, std::span<const Fe> coins) {
  std::vector<uint8_t> bytes;
  F.append(bytes, coins);
  return sha256(bytes);
}

std::vector<Fe> coin_toss(FramedChannel& ch, bool send_first, const PrimeField& F, std::size_t width, Prg& rng,
                          const CoinTossHooks* hooks) {
  std::vector<Fe> mine = F.sample_vec(rng, width);
  if (hooks && hooks->zero_share) std::fill(mine.begin(), mine.end(), F.zero());

  Commitment peer_commit;
  auto finish_commit = [&](const std::vector<uint8_t>& raw) {
    if (raw.size() != peer_commit.digest.size()) throw CoinTossError("malformed coin commitment");
    std::copy(raw.begin(), raw.end(), peer_commit.digest.begin());
  };

  std::vector<uint8_t> payload;
  Opening opening;
  Commitment my_commit;
  auto make_commit = [&] {
    payload.clear();
    F.append(payload, mine);
    auto [c, o] = commit(payload, rng);
    my_commit = c;
    opening = std::move(o);
  };

  if (send_first) {
    make_commit();
    ch.send(MsgType::CoinCommit, my_commit.digest, "coin-toss");
    finish_commit(ch.recv(MsgType::CoinCommit).payload);
  } else {
    finish_commit(ch.recv(MsgType::CoinCommit).payload);
    if (hooks && hooks->choose_share) {
      mine = hooks->choose_share(peer_commit);
      if (mine.size() != width) throw std::invalid_argument("coin toss hook returned wrong width");
    }
    make_commit();
    ch.send(MsgType::CoinCommit, my_commit.digest, "coin-toss");
  }

  std::vector<uint8_t> open_msg = opening.payload;
  open_msg.insert(open_msg.end(), opening.randomness.begin(), opening.randomness.end());
  const std::vector<uint8_t> peer_open = ch.exchange(MsgType::CoinOpen, open_msg, send_first, "coin-toss");
  if (peer_open.size() != width * PrimeField::kBytes + 32) throw CoinTossError("malformed coin opening");
  Opening po;
  po.payload.assign(peer_open.begin(), peer_open.end() - 32);
  std::copy(peer_open.end() - 32, peer_open.end(), po.randomness.begin());
  if (!open(peer_commit, po)) throw CoinTossError("coin opening does not match commitment");
  std::vector<Fe> theirs;
  try {
    theirs = F.read_vec(po.payload);
  } catch (const FieldError&) {
    throw CoinTossError("coin share is not a canonical field vector");
  }
  std::vector<Fe> out(width);
  for (std::size_t i = 0; i < width; ++i) out[i] = F.add(mine[i], theirs[i]);
  return out;
}

}  // namespace ips2pc
