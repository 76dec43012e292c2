#include <random>
#include <set>
#include <thread>

#include "doctest.h"
#include "ips2pc/crypto.hpp"

using namespace ips2pc;

namespace {

std::string hex(std::span<const uint8_t> b) {
  static const char* d = "0123456789abcdef";
  std::string s;
  for (uint8_t x : b) {
    s += d[x >> 4];
    s += d[x & 15];
  }
  return s;
}

std::pair<std::vector<Fe>, std::vector<Fe>> toss_pair(const PrimeField& F, std::size_t width, uint64_t seed,
                                                      const CoinTossHooks* h0 = nullptr,
                                                      const CoinTossHooks* h1 = nullptr) {
  auto [a, b] = make_memory_pipe();
  FramedChannel c0(std::move(a)), c1(std::move(b));
  Prg r0(seed_from_u64(seed), 0), r1(seed_from_u64(seed), 1);
  std::vector<Fe> out1;
  std::thread t([&] { out1 = coin_toss(c1, false, F, width, r1, h1); });
  auto out0 = coin_toss(c0, true, F, width, r0, h0);
  t.join();
  return {out0, out1};
}

}  // namespace

TEST_CASE("sha256 test vector") {
  const std::string abc = "abc";
  auto d = sha256(std::span(reinterpret_cast<const uint8_t*>(abc.data()), abc.size()));
  CHECK(hex(d) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 h;
  h.update(std::span(reinterpret_cast<const uint8_t*>(abc.data()), 1));
  h.update(std::span(reinterpret_cast<const uint8_t*>(abc.data()) + 1, 2));
  CHECK(h.finish() == d);
}

TEST_CASE("prg determinism and domain separation") {
  const Seed s = seed_from_u64(1);
  Prg a(s), b(s), c(s, 1), d(derive_seed(s, "x"));
  std::vector<uint64_t> va, vb, vc, vd;
  for (int i = 0; i < 200; ++i) {
    va.push_back(a());
    vb.push_back(b());
    vc.push_back(c());
    vd.push_back(d());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
  CHECK(derive_seed(s, "x", 1) != derive_seed(s, "x", 2));
  CHECK(derive_seed(s, "ab", 0) != derive_seed(s, "a", 0));
  // byte interface is the same stream
  Prg e(s);
  std::vector<uint8_t> bytes(16);
  e.fill(bytes);
  CHECK(get_u64(bytes.data()) == va[0]);
  CHECK(get_u64(bytes.data() + 8) == va[1]);
}

TEST_CASE("commitments") {
  Prg rng(seed_from_u64(2));
  std::mt19937_64 m(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<uint8_t> payload(m() % 64);
    for (auto& b : payload) b = static_cast<uint8_t>(m());
    auto [c, o] = commit(payload, rng);
    auto got = open(c, o);
    REQUIRE(got.has_value());
    CHECK(*got == payload);
    if (!payload.empty()) {
      Opening bad = o;
      bad.payload[m() % bad.payload.size()] ^= static_cast<uint8_t>(1u << (m() % 8));
      CHECK_FALSE(open(c, bad).has_value());
    }
  }
  std::set<Digest> seen;
  std::vector<uint8_t> same{1, 2, 3};
  for (int i = 0; i < 1000; ++i) seen.insert(commit(same, rng).first.digest);
  CHECK(seen.size() == 1000);
}

TEST_CASE("stream encryption") {
  const WatchKey k = seed_from_u64(3), k2 = seed_from_u64(4);
  StreamEncryptor enc(k);
  std::mt19937_64 m(3);
  for (uint64_t ctr = 0; ctr < 50; ++ctr) {
    std::vector<uint8_t> msg(m() % 200);
    for (auto& b : msg) b = static_cast<uint8_t>(m());
    auto ct = enc.encrypt(ctr, msg);
    CHECK(ct.size() == msg.size());
    CHECK(stream_xor(k, ctr, ct) == msg);
  }
  std::vector<uint8_t> zeros(64, 0);
  auto ks = stream_xor(k, 100, zeros);
  CHECK(enc.encrypt(100, zeros) == ks);
  CHECK(stream_xor(k, 101, zeros) != ks);
  CHECK_THROWS_AS(enc.encrypt(100, zeros), std::logic_error);

  std::vector<uint8_t> msg{9, 8, 7, 6};
  auto sealed = enc.seal(200, msg);
  CHECK(sealed.size() == msg.size() + kTagBytes);
  CHECK(open_sealed(k, 200, sealed) == msg);
  CHECK_FALSE(open_sealed(k2, 200, sealed).has_value());
  CHECK_FALSE(open_sealed(k, 201, sealed).has_value());
}

TEST_CASE("ideal t-out-of-n OT") {
  Prg rng(seed_from_u64(5));
  std::vector<WatchKey> keys(8);
  for (auto& k : keys) k = rng.next_seed();

  auto transfer = [&](const WatchlistSelection& sel, std::size_t t) {
    IdealOtOracle oracle;
    IdealOt sender(oracle, 0), receiver(oracle, 1);
    sender.send(keys, t);
    auto got = receiver.receive(8, sel);
    return std::make_pair(got, sender.log());
  };
  WatchlistSelection all{{0, 1, 2, 3, 4, 5, 6, 7}};
  CHECK(transfer(all, 8).first == keys);
  CHECK(transfer(WatchlistSelection{}, 0).first.empty());
  CHECK_THROWS_AS(transfer(WatchlistSelection{{1, 2}}, 3), std::invalid_argument);

  auto s1 = sample_selection(8, 3, rng), s2 = sample_selection(8, 3, rng);
  validate_selection(s1, 8, 3);
  auto [got1, log1] = transfer(s1, 3);
  auto [got2, log2] = transfer(s2, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(got1[i] == keys[s1.servers[i]]);
  CHECK(log1 == log2);  // sender-side bytes do not depend on the selection
}

TEST_CASE("watchlist selections are uniform t-subsets") {
  Prg rng(seed_from_u64(6));
  std::vector<int> hits(8, 0);
  for (int i = 0; i < 8000; ++i) {
    auto s = sample_selection(8, 2, rng);
    REQUIRE(s.servers.size() == 2);
    REQUIRE(s.servers[0] < s.servers[1]);
    for (auto j : s.servers) ++hits[j];
  }
  for (int h : hits) CHECK(std::abs(h - 2000) < 200);
}

TEST_CASE("coin toss") {
  const PrimeField F = PrimeField::toy();
  CoinTossHooks zero{true, {}};
  auto [z0, z1] = toss_pair(F, 5, 1, &zero, &zero);
  CHECK(z0 == std::vector<Fe>(5, F.zero()));
  CHECK(z1 == z0);

  for (uint64_t s = 0; s < 1000; ++s) {
    auto [a, b] = toss_pair(PrimeField::goldilocks(), 4, 100 + s);
    REQUIRE(a == b);
  }

  CHECK(coin_seed_width(PrimeField::goldilocks()) == 5);  // 63 full bits per element
  CHECK(coin_seed_width(PrimeField::toy()) == 32);
}

TEST_CASE("grinding receiver cannot bias the coin") {
  // The adversary commits after seeing the honest digest and tries once to
  // force the low byte of the output to zero using what it saw.
  const PrimeField F = PrimeField::goldilocks();
  CoinTossHooks grind;
  grind.choose_share = [&](const Commitment& peer) {
    std::vector<Fe> share{F.neg(F.from_u64(get_u64(peer.digest.data())))};
    return share;
  };
  std::vector<int> hist(256, 0);
  for (uint64_t s = 0; s < 10000; ++s) {
    auto [a, b] = toss_pair(F, 1, 5000 + s, nullptr, &grind);
    REQUIRE(a == b);
    ++hist[a[0].v & 0xff];
  }
  double chi = 0;
  const double expect = 10000.0 / 256;
  for (int h : hist) chi += (h - expect) * (h - expect) / expect;
  // 255 degrees of freedom; 330.5 is the 0.1% upper quantile
  CHECK(chi < 330.5);
}

TEST_CASE("coin opening mismatch aborts") {
  const PrimeField F = PrimeField::toy();
  auto [a, b] = make_memory_pipe();
  FramedChannel c0(std::move(a)), c1(std::move(b));
  std::thread t([&] {
    // a cheating sender that opens to a different value than it committed to
    std::vector<uint8_t> digest(32, 0xaa);
    c1.send(MsgType::CoinCommit, digest);
    c1.recv(MsgType::CoinCommit);
    std::vector<uint8_t> opening(8 + 32, 0);
    c1.recv(MsgType::CoinOpen);
    c1.send(MsgType::CoinOpen, opening);
  });
  Prg r(seed_from_u64(9));
  CHECK_THROWS_AS(coin_toss(c0, true, F, 1, r), CoinTossError);
  t.join();
}
