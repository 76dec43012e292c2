#include <random>

#include "doctest.h"
#include "ips2pc/field.hpp"

using namespace ips2pc;

namespace {

// Independent O(size^2) evaluation on the toy field with plain integer
// arithmetic; omega = 3^(256/size) mod 257.
std::vector<Fe> naive_dft(const std::vector<Fe>& coeffs, std::size_t size) {
  auto mulmod = [](uint64_t a, uint64_t b) { return a * b % 257; };
  uint64_t w = 1;
  for (std::size_t i = 0; i < 256 / size; ++i) w = mulmod(w, 3);
  std::vector<Fe> out(size);
  uint64_t x = 1;
  for (std::size_t i = 0; i < size; ++i) {
    uint64_t acc = 0, xp = 1;
    for (Fe c : coeffs) {
      acc = (acc + mulmod(c.v, xp)) % 257;
      xp = mulmod(xp, x);
    }
    out[i] = Fe{acc};
    x = mulmod(x, w);
  }
  return out;
}

}  // namespace

TEST_CASE("field constants") {
  const PrimeField G = PrimeField::goldilocks();
  CHECK(G.modulus() == 18446744069414584321ULL);
  CHECK(G.two_adicity() == 32);
  CHECK(G.pow(G.generator(), 1ULL << 32) == G.one());
  CHECK(G.pow(G.generator(), 1ULL << 31) != G.one());
  const PrimeField T = PrimeField::toy();
  CHECK(T.modulus() == 257);
  CHECK(T.pow(T.generator(), 256) == T.one());
  CHECK(T.pow(T.generator(), 128) != T.one());
  CHECK_THROWS_AS(PrimeField(257, 8, 4, "bad"), FieldError);  // 4 = 2^2 has order 64
}

TEST_CASE("field axioms on random triples") {
  for (const PrimeField& F : {PrimeField::goldilocks(), PrimeField::toy()}) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 10000; ++i) {
      Fe a = F.sample(rng), b = F.sample(rng), c = F.sample(rng);
      CHECK(F.add(F.add(a, b), c) == F.add(a, F.add(b, c)));
      CHECK(F.mul(F.mul(a, b), c) == F.mul(a, F.mul(b, c)));
      CHECK(F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c)));
      CHECK(F.sub(F.add(a, b), b) == a);
      CHECK(F.add(a, F.neg(a)) == F.zero());
      if (a.v != 0) CHECK(F.mul(a, F.inv(a)) == F.one());
    }
  }
}

TEST_CASE("goldilocks reduction agrees with 128-bit remainder") {
  const PrimeField G = PrimeField::goldilocks();
  std::mt19937_64 rng(11);
  const uint64_t p = G.modulus();
  std::vector<uint64_t> edge = {0, 1, 2, p - 1, p - 2, 0xffffffffULL, 0x100000000ULL, p / 2};
  for (int i = 0; i < 20000; ++i) edge.push_back(rng() % p);
  for (std::size_t i = 0; i + 1 < edge.size(); ++i) {
    const uint64_t a = edge[i], b = edge[edge.size() - 1 - i];
    const uint64_t want = static_cast<uint64_t>((static_cast<unsigned __int128>(a) * b) % p);
    REQUIRE(G.mul(Fe{a}, Fe{b}).v == want);
  }
}

TEST_CASE("signed embedding and serialization") {
  const PrimeField G = PrimeField::goldilocks();
  CHECK(G.to_signed(G.from_i64(-5)) == -5);
  CHECK(G.to_signed(G.from_i64(123456789)) == 123456789);
  CHECK(G.from_i64(-1).v == G.modulus() - 1);
  CHECK(G.to_signed(G.from_i64(-(int64_t{1} << 62))) == -(int64_t{1} << 62));
  CHECK(G.to_signed(G.from_i64(INT64_MIN)) != INT64_MIN);  // |x| > p/2 wraps
  uint8_t buf[8];
  G.write(Fe{0x0102030405060708ULL}, buf);
  CHECK(buf[0] == 0x08);
  CHECK(buf[7] == 0x01);
  CHECK(G.read(buf).v == 0x0102030405060708ULL);
  for (auto& b : buf) b = 0xff;
  CHECK_THROWS_AS(G.read(buf), FieldError);
  const PrimeField T = PrimeField::toy();
  T.write(Fe{256}, buf);
  CHECK(T.read(buf).v == 256);
  buf[0] = 1;
  buf[1] = 1;  // 257
  CHECK_THROWS_AS(T.read(buf), FieldError);
}

TEST_CASE("fft examples") {
  const PrimeField T = PrimeField::toy();
  auto out = fft(T, std::vector<Fe>{Fe{9}}, 4);
  CHECK(out == std::vector<Fe>(4, Fe{9}));
  CHECK(ifft(T, out) == std::vector<Fe>{Fe{9}, Fe{0}, Fe{0}, Fe{0}});

  // P(X) = X: the outputs are exactly the four 4th roots of unity mod 257.
  auto roots = fft(T, std::vector<Fe>{Fe{0}, Fe{1}}, 4);
  std::vector<uint64_t> got;
  for (Fe r : roots) got.push_back(r.v);
  std::sort(got.begin(), got.end());
  std::vector<uint64_t> fourth;
  for (uint64_t x = 1; x < 257; ++x)
    if (x * x % 257 * x % 257 * x % 257 == 1) fourth.push_back(x);
  CHECK(got == fourth);
  CHECK(fourth == std::vector<uint64_t>{1, 16, 241, 256});

  // size 2 inverse by hand: coefficients ((a+b)/2, (a-b)/2)
  const Fe a{10}, b{3};
  auto c = ifft(T, std::vector<Fe>{a, b});
  const Fe half = T.inv(Fe{2});
  CHECK(c[0] == T.mul(T.add(a, b), half));
  CHECK(c[1] == T.mul(T.sub(a, b), half));

  CHECK_THROWS_AS(fft(T, std::vector<Fe>{}, 3), FieldError);
  CHECK_THROWS_AS(fft(T, std::vector<Fe>{}, 512), FieldError);
}

TEST_CASE("fft matches naive evaluation for all sizes up to 32 on the toy field") {
  const PrimeField T = PrimeField::toy();
  std::mt19937_64 rng(3);
  for (std::size_t size = 1; size <= 32; size <<= 1) {
    for (int rep = 0; rep < 20; ++rep) {
      for (std::size_t len = 0; len <= size; ++len) {
        auto coeffs = T.sample_vec(rng, len);
        REQUIRE(fft(T, coeffs, size) == naive_dft(coeffs, size));
      }
    }
  }
}

TEST_CASE("fft roundtrip") {
  const PrimeField G = PrimeField::goldilocks();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    auto v = G.sample_vec(rng, 64);
    REQUIRE(ifft(G, fft(G, v, 64)) == v);
    REQUIRE(fft(G, ifft(G, v), 64) == v);
  }
  auto v = G.sample_vec(rng, 16);
  const Fe shift = G.root_of_unity(64);
  auto ev = coset_fft(G, v, 16, shift);
  const Fe w16 = G.root_of_unity(16);
  for (std::size_t i = 0; i < 16; ++i) CHECK(ev[i] == evaluate(G, v, G.mul(shift, G.pow(w16, i))));
  CHECK(coset_ifft(G, ev, shift) == v);
}

TEST_CASE("interpolate") {
  const PrimeField T = PrimeField::toy();
  std::vector<std::pair<Fe, Fe>> one{{Fe{1}, Fe{5}}};
  CHECK(interpolate(T, one) == Poly{Fe{5}});
  std::vector<std::pair<Fe, Fe>> sq{{Fe{0}, Fe{0}}, {Fe{1}, Fe{1}}, {Fe{2}, Fe{4}}};
  CHECK(interpolate(T, sq) == Poly{Fe{0}, Fe{0}, Fe{1}});
  std::vector<std::pair<Fe, Fe>> dup{{Fe{1}, Fe{0}}, {Fe{1}, Fe{1}}};
  CHECK_THROWS_AS(interpolate(T, dup), FieldError);

  const PrimeField G = PrimeField::goldilocks();
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    Poly P = G.sample_vec(rng, 8);
    std::vector<std::pair<Fe, Fe>> pts;
    while (pts.size() < 8) {
      Fe x = G.sample(rng);
      bool fresh = std::none_of(pts.begin(), pts.end(), [&](auto& q) { return q.first == x; });
      if (fresh) pts.emplace_back(x, evaluate(G, P, x));
    }
    REQUIRE(interpolate(G, pts) == P);
  }
}

TEST_CASE("vanishing polynomial") {
  const PrimeField T = PrimeField::toy();
  std::vector<Fe> roots{Fe{3}, Fe{7}, Fe{100}};
  Poly z = vanishing_poly(T, roots);
  CHECK(z.size() == 4);
  for (Fe r : roots) CHECK(evaluate(T, z, r) == T.zero());
  CHECK(evaluate(T, z, Fe{4}) != T.zero());
}
