#include "ips2pc/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace ips2pc {

PrimeField PrimeField::goldilocks() {
  return PrimeField(0xffffffff00000001ULL, 32, 1753635133440165772ULL, "goldilocks");
}

PrimeField PrimeField::toy() { return PrimeField(257, 8, 3, "toy257"); }

PrimeField::PrimeField(uint64_t modulus, unsigned two_adicity, uint64_t generator, std::string name)
    : p_(modulus), two_adicity_(two_adicity), g_(generator), name_(std::move(name)) {
  if (p_ < 3 || (p_ & 1) == 0) throw FieldError("modulus must be an odd prime");
  if (two_adicity_ == 0 || two_adicity_ >= 64 || ((p_ - 1) & ((1ULL << two_adicity_) - 1)) != 0)
    throw FieldError("2^two_adicity does not divide p - 1");
  if (g_ == 0 || g_ >= p_) throw FieldError("generator out of range");
  goldilocks_ = (p_ == 0xffffffff00000001ULL);
  const unsigned bits = 64 - static_cast<unsigned>(std::countl_zero(p_));
  mask_ = bits == 64 ? ~0ULL : ((1ULL << bits) - 1);
  Fe half = pow(Fe{g_}, 1ULL << (two_adicity_ - 1));
  if (half.v == 1 || mul(half, half).v != 1)
    throw FieldError("generator does not have order 2^two_adicity");
}

double PrimeField::log2_size() const { return std::log2(static_cast<double>(p_)); }

Fe PrimeField::from_i64(int64_t x) const {
  if (x >= 0) return Fe{static_cast<uint64_t>(x) % p_};
  const uint64_t mag = static_cast<uint64_t>(-(x + 1)) + 1;  // safe for INT64_MIN
  return neg(Fe{mag % p_});
}

int64_t PrimeField::to_signed(Fe a) const {
  const uint64_t half = p_ / 2;
  if (a.v <= half) {
    if (a.v > static_cast<uint64_t>(std::numeric_limits<int64_t>::max()))
      throw FieldError("centered lift exceeds int64");
    return static_cast<int64_t>(a.v);
  }
  const uint64_t mag = p_ - a.v;
  if (mag > static_cast<uint64_t>(std::numeric_limits<int64_t>::max()))
    throw FieldError("centered lift exceeds int64");
  return -static_cast<int64_t>(mag);
}

Fe PrimeField::pow(Fe a, uint64_t e) const {
  Fe r = one();
  while (e) {
    if (e & 1) r = mul(r, a);
    a = mul(a, a);
    e >>= 1;
  }
  return r;
}

Fe PrimeField::inv(Fe a) const {
  if (a.v == 0) throw FieldError("inverse of zero");
  return pow(a, p_ - 2);
}

Fe PrimeField::root_of_unity(std::size_t order) const {
  const unsigned lg = log2_exact(order);
  if (lg > two_adicity_) throw FieldError("root of unity order exceeds 2^two_adicity");
  return pow(Fe{g_}, 1ULL << (two_adicity_ - lg));
}

void PrimeField::write(Fe a, uint8_t* out) const {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<uint8_t>(a.v >> (8 * i));
}

Fe PrimeField::read(const uint8_t* in) const {
  uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(in[i]) << (8 * i);
  if (x >= p_) throw FieldError("serialized field element is not canonical");
  return Fe{x};
}

void PrimeField::append(std::vector<uint8_t>& out, std::span<const Fe> xs) const {
  const std::size_t at = out.size();
  out.resize(at + kBytes * xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) write(xs[i], out.data() + at + kBytes * i);
}

std::vector<Fe> PrimeField::read_vec(std::span<const uint8_t> in) const {
  if (in.size() % kBytes != 0) throw FieldError("byte length is not a multiple of 8");
  std::vector<Fe> out(in.size() / kBytes);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = read(in.data() + kBytes * i);
  return out;
}

bool is_power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

unsigned log2_exact(std::size_t x) {
  if (!is_power_of_two(x)) throw FieldError("size is not a power of two: " + std::to_string(x));
  return static_cast<unsigned>(std::countr_zero(x));
}

std::size_t next_power_of_two(std::size_t x) { return x <= 1 ? 1 : std::bit_ceil(x); }

std::size_t bit_reverse(std::size_t i, unsigned bits) {
  std::size_t r = 0;
  for (unsigned b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
  return r;
}

namespace {

// In-place iterative radix-2 transform with the given primitive root.
void ntt_inplace(const PrimeField& F, std::vector<Fe>& a, Fe root) {
  const std::size_t n = a.size();
  const unsigned lg = log2_exact(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = bit_reverse(i, lg);
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<Fe> tw;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const Fe wl = F.pow(root, n / len);
    const std::size_t half = len / 2;
    tw.resize(half);
    tw[0] = F.one();
    for (std::size_t i = 1; i < half; ++i) tw[i] = F.mul(tw[i - 1], wl);
    for (std::size_t s = 0; s < n; s += len) {
      for (std::size_t i = 0; i < half; ++i) {
        const Fe u = a[s + i];
        const Fe v = F.mul(a[s + i + half], tw[i]);
        a[s + i] = F.add(u, v);
        a[s + i + half] = F.sub(u, v);
      }
    }
  }
}

}  // namespace

std::vector<Fe> fft(const PrimeField& F, std::span<const Fe> coeffs, std::size_t size) {
  const Fe w = F.root_of_unity(size);
  if (coeffs.size() > size) throw FieldError("more coefficients than fft size");
  std::vector<Fe> a(size);
  std::copy(coeffs.begin(), coeffs.end(), a.begin());
  ntt_inplace(F, a, w);
  return a;
}

Poly ifft(const PrimeField& F, std::span<const Fe> evals) {
  const std::size_t n = evals.size();
  const Fe w = F.root_of_unity(n);
  std::vector<Fe> a(evals.begin(), evals.end());
  ntt_inplace(F, a, F.inv(w));
  const Fe ninv = F.inv(F.from_u64(n));
  for (auto& x : a) x = F.mul(x, ninv);
  return a;
}

std::vector<Fe> coset_fft(const PrimeField& F, std::span<const Fe> coeffs, std::size_t size, Fe shift) {
  std::vector<Fe> scaled(coeffs.begin(), coeffs.end());
  Fe s = F.one();
  for (auto& c : scaled) {
    c = F.mul(c, s);
    s = F.mul(s, shift);
  }
  return fft(F, scaled, size);
}

Poly coset_ifft(const PrimeField& F, std::span<const Fe> evals, Fe shift) {
  Poly c = ifft(F, evals);
  const Fe sinv = F.inv(shift);
  Fe s = F.one();
  for (auto& x : c) {
    x = F.mul(x, s);
    s = F.mul(s, sinv);
  }
  return c;
}

Fe evaluate(const PrimeField& F, std::span<const Fe> poly, Fe x) {
  Fe acc = F.zero();
  for (std::size_t i = poly.size(); i-- > 0;) acc = F.add(F.mul(acc, x), poly[i]);
  return acc;
}

Poly poly_mul(const PrimeField& F, std::span<const Fe> a, std::span<const Fe> b) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, F.zero());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] = F.add(r[i + j], F.mul(a[i], b[j]));
  return r;
}

Poly vanishing_poly(const PrimeField& F, std::span<const Fe> roots) {
  Poly m{F.one()};
  for (Fe r : roots) {
    Poly next(m.size() + 1, F.zero());
    for (std::size_t i = 0; i < m.size(); ++i) {
      next[i + 1] = F.add(next[i + 1], m[i]);
      next[i] = F.sub(next[i], F.mul(m[i], r));
    }
    m = std::move(next);
  }
  return m;
}

Poly interpolate(const PrimeField& F, std::span<const std::pair<Fe, Fe>> points) {
  const std::size_t n = points.size();
  if (n == 0) throw FieldError("interpolate needs at least one point");
  std::vector<Fe> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = points[i].first;
  {
    std::vector<Fe> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw FieldError("interpolate: duplicate x-coordinates");
  }
  const Poly m = vanishing_poly(F, xs);  // degree n
  Poly out(n, F.zero());
  Poly q(n);
  for (std::size_t i = 0; i < n; ++i) {
    // q = m / (X - x_i) by synthetic division
    Fe carry = m[n];
    for (std::size_t d = n; d-- > 0;) {
      q[d] = carry;
      carry = F.add(m[d], F.mul(carry, xs[i]));
    }
    const Fe scale = F.div(points[i].second, evaluate(F, q, xs[i]));
    for (std::size_t d = 0; d < n; ++d) out[d] = F.add(out[d], F.mul(q[d], scale));
  }
  return out;
}

}  // namespace ips2pc
