#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ips2pc {

/// Canonical field element: an integer in [0, p). Arithmetic goes through a PrimeField.
struct Fe {
  uint64_t v = 0;
  constexpr Fe() = default;
  constexpr explicit Fe(uint64_t x) : v(x) {}
  friend constexpr bool operator==(Fe, Fe) = default;
  friend constexpr auto operator<=>(Fe, Fe) = default;
};

using Poly = std::vector<Fe>;  // coefficients, low degree first

class FieldError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Prime field F_p with a 2-adic subgroup. Cheap to copy; all methods are const.
class PrimeField {
 public:
  /// p = 2^64 - 2^32 + 1, two-adicity 32.
  static PrimeField goldilocks();
  /// p = 257, two-adicity 8. Small enough for exhaustive oracles.
  static PrimeField toy();

  /// Validates that `generator` has multiplicative order exactly 2^two_adicity
  /// and that 2^two_adicity divides p - 1. Primality is the caller's promise.
  PrimeField(uint64_t modulus, unsigned two_adicity, uint64_t generator, std::string name);

  uint64_t modulus() const { return p_; }
  unsigned two_adicity() const { return two_adicity_; }
  Fe generator() const { return Fe{g_}; }
  const std::string& name() const { return name_; }
  double log2_size() const;
  static constexpr std::size_t kBytes = 8;

  Fe zero() const { return Fe{0}; }
  Fe one() const { return Fe{1}; }
  Fe from_u64(uint64_t x) const { return Fe{x % p_}; }
  Fe from_i64(int64_t x) const;
  /// Centered lift into (-p/2, p/2]. Throws if the lift does not fit int64.
  int64_t to_signed(Fe a) const;
  bool is_canonical(uint64_t x) const { return x < p_; }

  Fe add(Fe a, Fe b) const {
    uint64_t s = a.v + b.v;
    if (s < a.v || s >= p_) s -= p_;
    return Fe{s};
  }
  Fe sub(Fe a, Fe b) const { return Fe{a.v >= b.v ? a.v - b.v : a.v - b.v + p_}; }
  Fe neg(Fe a) const { return Fe{a.v == 0 ? 0 : p_ - a.v}; }
  Fe mul(Fe a, Fe b) const {
    unsigned __int128 x = static_cast<unsigned __int128>(a.v) * b.v;
    return Fe{goldilocks_ ? reduce_goldilocks(x) : static_cast<uint64_t>(x % p_)};
  }
  Fe pow(Fe a, uint64_t e) const;
  Fe inv(Fe a) const;  // throws FieldError on zero
  Fe div(Fe a, Fe b) const { return mul(a, inv(b)); }

  /// Primitive root of unity of the given power-of-two order.
  Fe root_of_unity(std::size_t order) const;

  /// Uniform element by rejection sampling from any 64-bit bit generator.
  template <class Rng>
  Fe sample(Rng& rng) const {
    for (;;) {
      uint64_t x = static_cast<uint64_t>(rng()) & mask_;
      if (x < p_) return Fe{x};
    }
  }
  template <class Rng>
  Fe sample_nonzero(Rng& rng) const {
    for (;;) {
      Fe x = sample(rng);
      if (x.v != 0) return x;
    }
  }
  template <class Rng>
  std::vector<Fe> sample_vec(Rng& rng, std::size_t len) const {
    std::vector<Fe> out(len);
    for (auto& x : out) x = sample(rng);
    return out;
  }

  void write(Fe a, uint8_t* out) const;
  Fe read(const uint8_t* in) const;  // throws FieldError if the value is not < p
  void append(std::vector<uint8_t>& out, std::span<const Fe> xs) const;
  std::vector<Fe> read_vec(std::span<const uint8_t> in) const;

  friend bool operator==(const PrimeField& a, const PrimeField& b) { return a.p_ == b.p_; }

 private:
  static uint64_t reduce_goldilocks(unsigned __int128 x) {
    constexpr uint64_t kEps = 0xffffffffULL;  // 2^64 mod p
    constexpr uint64_t kP = 0xffffffff00000001ULL;
    const uint64_t lo = static_cast<uint64_t>(x);
    const uint64_t hi = static_cast<uint64_t>(x >> 64);
    const uint64_t hi_hi = hi >> 32;
    const uint64_t hi_lo = hi & kEps;
    uint64_t t0 = lo - hi_hi;
    if (lo < hi_hi) t0 -= kEps;
    const uint64_t t1 = hi_lo * kEps;
    uint64_t t2 = t0 + t1;
    if (t2 < t0) t2 += kEps;
    if (t2 >= kP) t2 -= kP;
    return t2;
  }

  uint64_t p_;
  unsigned two_adicity_;
  uint64_t g_;
  uint64_t mask_;
  bool goldilocks_;
  std::string name_;
};

bool is_power_of_two(std::size_t x);
unsigned log2_exact(std::size_t x);  // throws if not a power of two
std::size_t next_power_of_two(std::size_t x);
std::size_t bit_reverse(std::size_t i, unsigned bits);

/// Evaluates `coeffs` (zero-padded) at omega^i, i < size, omega of order `size`.
std::vector<Fe> fft(const PrimeField& F, std::span<const Fe> coeffs, std::size_t size);
/// Inverse of fft: coefficients of the unique degree < size polynomial.
Poly ifft(const PrimeField& F, std::span<const Fe> evals);
/// Evaluates at shift * omega^i.
std::vector<Fe> coset_fft(const PrimeField& F, std::span<const Fe> coeffs, std::size_t size, Fe shift);
/// Coefficients from values at shift * omega^i.
Poly coset_ifft(const PrimeField& F, std::span<const Fe> evals, Fe shift);

Fe evaluate(const PrimeField& F, std::span<const Fe> poly, Fe x);
/// Lagrange interpolation through arbitrary distinct points, O(count^2).
Poly interpolate(const PrimeField& F, std::span<const std::pair<Fe, Fe>> points);
/// Product of (X - r) over the roots.
Poly vanishing_poly(const PrimeField& F, std::span<const Fe> roots);
Poly poly_mul(const PrimeField& F, std::span<const Fe> a, std::span<const Fe> b);

}  // namespace ips2pc
