#include "ips2pc/rscode.hpp"

#include <algorithm>
#include <numeric>

namespace ips2pc {

CodeSpec make_code_spec(const PrimeField& F, std::size_t n, std::size_t k, std::size_t w) {
  if (w == 0 || w > k || k > n) throw FieldError("code spec requires 1 <= w <= k <= n");
  CodeSpec s{F};
  s.n = n;
  s.k = k;
  s.w = w;
  s.domain = next_power_of_two(n);
  const unsigned lg_n = log2_exact(s.domain);
  if (lg_n + 1 > F.two_adicity()) throw FieldError("field has too few roots of unity for n = " + std::to_string(n));
  const Fe omega_n = F.root_of_unity(s.domain);
  s.coset_shift = F.root_of_unity(2 * s.domain);
  s.eta.resize(n);
  s.eta_index.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.eta_index[i] = bit_reverse(i, lg_n);
    s.eta[i] = F.pow(omega_n, s.eta_index[i]);
  }
  const std::size_t K = next_power_of_two(k);
  const Fe omega_k = F.root_of_unity(K);
  Fe z = s.coset_shift;
  for (std::size_t j = 0; j < k; ++j) {
    (j < w ? s.zeta : s.aux).push_back(z);
    z = F.mul(z, omega_k);
  }
  return s;
}

Codeword evaluate_on_eta(const CodeSpec& spec, std::span<const Fe> poly) {
  const std::vector<Fe> evals = fft(spec.field, poly, spec.domain);
  Codeword out(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) out[i] = evals[spec.eta_index[i]];
  return out;
}

Codeword encode_with_aux(const CodeSpec& spec, std::span<const Fe> block, std::span<const Fe> aux_values) {
  if (block.size() != spec.w) throw FieldError("block width mismatch");
  if (aux_values.size() != spec.k - spec.w) throw FieldError("auxiliary value count mismatch");
  const PrimeField& F = spec.field;
  std::vector<Fe> values(block.begin(), block.end());
  values.insert(values.end(), aux_values.begin(), aux_values.end());
  Poly p;
  if (is_power_of_two(spec.k)) {
    p = coset_ifft(F, values, spec.coset_shift);
  } else {
    std::vector<std::pair<Fe, Fe>> pts;
    for (std::size_t j = 0; j < spec.w; ++j) pts.emplace_back(spec.zeta[j], values[j]);
    for (std::size_t j = 0; j < spec.aux.size(); ++j) pts.emplace_back(spec.aux[j], values[spec.w + j]);
    p = interpolate(F, pts);
  }
  return evaluate_on_eta(spec, p);
}

Codeword encode_deterministic(const CodeSpec& spec, std::span<const Fe> block) {
  std::vector<Fe> zeros(spec.k - spec.w, spec.field.zero());
  return encode_with_aux(spec, block, zeros);
}

Codeword encode_zero_wide_from(const CodeSpec& spec, std::span<const Fe> randomness) {
  if (randomness.size() != 2 * spec.k - spec.w) throw FieldError("encode_zero_wide randomness size");
  if (spec.n < 2 * spec.k) throw FieldError("wide encoding requires n >= 2k");
  const Poly z = vanishing_poly(spec.field, spec.zeta);
  return evaluate_on_eta(spec, poly_mul(spec.field, randomness, z));
}

Poly interpolate_prefix(const CodeSpec& spec, std::span<const Fe> shares, std::size_t bound) {
  if (bound == 0) throw FieldError("degree bound must be positive");
  if (shares.size() < bound) throw FieldError("fewer shares than the degree bound");
  if (is_power_of_two(bound)) {
    const unsigned lg = log2_exact(bound);
    std::vector<Fe> nat(bound);
    for (std::size_t i = 0; i < bound; ++i) nat[bit_reverse(i, lg)] = shares[i];
    return ifft(spec.field, nat);
  }
  std::vector<std::pair<Fe, Fe>> pts(bound);
  for (std::size_t i = 0; i < bound; ++i) pts[i] = {spec.eta[i], shares[i]};
  return interpolate(spec.field, pts);
}

Block eval_at_zeta(const CodeSpec& spec, std::span<const Fe> poly) {
  Block out(spec.w);
  for (std::size_t j = 0; j < spec.w; ++j) out[j] = evaluate(spec.field, poly, spec.zeta[j]);
  return out;
}

Block decode(const CodeSpec& spec, std::span<const Fe> shares, std::size_t bound) {
  return eval_at_zeta(spec, interpolate_prefix(spec, shares, bound));
}

Block decode_from(const CodeSpec& spec, std::span<const std::size_t> positions, std::span<const Fe> values,
                  std::size_t bound) {
  if (positions.size() != values.size()) throw FieldError("positions/values length mismatch");
  if (positions.size() < bound) throw FieldError("fewer shares than the degree bound");
  std::vector<std::pair<Fe, Fe>> pts(bound);
  for (std::size_t i = 0; i < bound; ++i) {
    if (positions[i] >= spec.n) throw FieldError("share position out of range");
    pts[i] = {spec.eta[positions[i]], values[i]};
  }
  return eval_at_zeta(spec, interpolate(spec.field, pts));
}

bool is_codeword(const CodeSpec& spec, std::span<const Fe> shares, std::size_t bound) {
  if (shares.size() != spec.n) throw FieldError("codeword length mismatch");
  if (bound >= spec.n) return true;
  const Poly p = interpolate_prefix(spec, shares, bound);
  const Codeword re = evaluate_on_eta(spec, p);
  return std::equal(re.begin(), re.end(), shares.begin());
}

Distance distance_to_code(const CodeSpec& spec, std::span<const Fe> v, std::size_t max_subsets) {
  if (v.size() != spec.n) throw FieldError("vector length mismatch");
  const std::size_t n = spec.n, k = spec.k;
  // C(n, k), saturating at the limit
  double subsets = 1;
  for (std::size_t i = 0; i < k; ++i) subsets = subsets * static_cast<double>(n - i) / static_cast<double>(i + 1);
  if (subsets > static_cast<double>(max_subsets))
    throw FieldError("distance_to_code: parameters too large for exhaustive search");

  std::size_t best_d = n + 1;
  Codeword best;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::pair<Fe, Fe>> pts(k);
  for (;;) {
    for (std::size_t i = 0; i < k; ++i) pts[i] = {spec.eta[idx[i]], v[idx[i]]};
    const Poly p = interpolate(spec.field, pts);
    Codeword c(n);
    std::size_t d = 0;
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = evaluate(spec.field, p, spec.eta[i]);
      d += (c[i] != v[i]);
    }
    if (d < best_d || (d == best_d && c < best)) {
      best_d = d;
      best = std::move(c);
    }
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  Distance out;
  out.d = best_d;
  for (std::size_t i = 0; i < n; ++i)
    if (best[i] != v[i]) out.delta.push_back(i);
  return out;
}

std::vector<Fe> apply(const PrimeField& F, const Matrix& m, std::span<const Fe> x) {
  if (x.size() != m.cols) throw FieldError("matrix/vector dimension mismatch");
  std::vector<Fe> y(m.rows, F.zero());
  for (std::size_t r = 0; r < m.rows; ++r) {
    Fe acc = F.zero();
    const Fe* row = m.a.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) acc = F.add(acc, F.mul(row[c], x[c]));
    y[r] = acc;
  }
  return y;
}

Matrix degree_reduce_matrix(const CodeSpec& spec) {
  if (spec.n < 2 * spec.k) throw FieldError("degree reduction requires n >= 2k");
  const PrimeField& F = spec.field;
  Matrix A{spec.n, spec.n, std::vector<Fe>(spec.n * spec.n, F.zero())};
  std::vector<Fe> unit(spec.n, F.zero());
  for (std::size_t j = 0; j < 2 * spec.k; ++j) {
    unit[j] = F.one();
    const Codeword col = encode_deterministic(spec, decode(spec, unit, 2 * spec.k));
    unit[j] = F.zero();
    for (std::size_t r = 0; r < spec.n; ++r) A.a[r * spec.n + j] = col[r];
  }
  return A;
}

Matrix zeta_lagrange_at_eta(const CodeSpec& spec) {
  const PrimeField& F = spec.field;
  const std::size_t w = spec.w;
  Matrix m{spec.n, w, std::vector<Fe>(spec.n * w)};
  for (std::size_t s = 0; s < w; ++s) {
    Fe denom = F.one();
    for (std::size_t t = 0; t < w; ++t)
      if (t != s) denom = F.mul(denom, F.sub(spec.zeta[s], spec.zeta[t]));
    const Fe dinv = F.inv(denom);
    for (std::size_t c = 0; c < spec.n; ++c) {
      Fe num = F.one();
      for (std::size_t t = 0; t < w; ++t)
        if (t != s) num = F.mul(num, F.sub(spec.eta[c], spec.zeta[t]));
      m.a[c * w + s] = F.mul(num, dinv);
    }
  }
  return m;
}

}  // namespace ips2pc
