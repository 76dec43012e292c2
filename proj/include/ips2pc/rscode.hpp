#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ips2pc/field.hpp"

namespace ips2pc {

using Block = std::vector<Fe>;     // w secrets
using Codeword = std::vector<Fe>;  // n shares

/// Reed-Solomon code RS_{F,n,k,eta} together with the packing points.
///
/// eta_i = omega_N^{bitrev(i)} for i < n with N = next_pow2(n), so every
/// power-of-two prefix of the share positions is a multiplicative subgroup.
/// The w secret points zeta and the k - w auxiliary points lie on the coset
/// c * H_K (K = next_pow2(k), c of order 2N), disjoint from eta.
struct CodeSpec {
  PrimeField field;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t w = 0;
  std::size_t domain = 0;  // N
  Fe coset_shift;
  std::vector<Fe> eta;   // n
  std::vector<Fe> zeta;  // w
  std::vector<Fe> aux;   // k - w
  std::vector<std::size_t> eta_index;  // eta_i = omega_N^{eta_index[i]}
};

CodeSpec make_code_spec(const PrimeField& F, std::size_t n, std::size_t k, std::size_t w);

/// Evaluates a polynomial of degree < N at all share positions.
Codeword evaluate_on_eta(const CodeSpec& spec, std::span<const Fe> poly);

/// Encodes using explicit values at the auxiliary points.
Codeword encode_with_aux(const CodeSpec& spec, std::span<const Fe> block, std::span<const Fe> aux_values);

/// Auxiliary values fixed to zero: the unique deterministic encoding.
Codeword encode_deterministic(const CodeSpec& spec, std::span<const Fe> block);

template <class Rng>
Codeword encode(const CodeSpec& spec, std::span<const Fe> block, Rng& rng) {
  std::vector<Fe> aux = spec.field.sample_vec(rng, spec.k - spec.w);
  return encode_with_aux(spec, block, aux);
}

/// Uniform codeword of degree < 2k that vanishes on zeta (an L' encoding of zero).
Codeword encode_zero_wide_from(const CodeSpec& spec, std::span<const Fe> randomness);
template <class Rng>
Codeword encode_zero_wide(const CodeSpec& spec, Rng& rng) {
  std::vector<Fe> r = spec.field.sample_vec(rng, 2 * spec.k - spec.w);
  return encode_zero_wide_from(spec, r);
}

/// Polynomial of degree < bound through the first `bound` share positions.
Poly interpolate_prefix(const CodeSpec& spec, std::span<const Fe> shares, std::size_t bound);

/// Interpolates through the first `bound` positions and evaluates at zeta.
Block decode(const CodeSpec& spec, std::span<const Fe> shares, std::size_t bound);
inline Block decode(const CodeSpec& spec, std::span<const Fe> shares) { return decode(spec, shares, spec.k); }

/// Decodes from an arbitrary set of positions (at least `bound` of them; the first `bound` are used).
Block decode_from(const CodeSpec& spec, std::span<const std::size_t> positions, std::span<const Fe> values,
                  std::size_t bound);

Block eval_at_zeta(const CodeSpec& spec, std::span<const Fe> poly);

/// True iff the interpolant through all n positions has degree < bound.
bool is_codeword(const CodeSpec& spec, std::span<const Fe> shares, std::size_t bound);

struct Distance {
  std::size_t d = 0;
  std::vector<std::size_t> delta;
};

/// Exhaustive nearest-codeword search over k-subsets. Throws FieldError when
/// the number of subsets exceeds `max_subsets`.
Distance distance_to_code(const CodeSpec& spec, std::span<const Fe> v, std::size_t max_subsets = 1u << 20);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Fe> a;  // row-major
  Fe at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

std::vector<Fe> apply(const PrimeField& F, const Matrix& m, std::span<const Fe> x);

/// A = Enc_det o Eval_zeta o Interp_{2k}. Requires n >= 2k.
Matrix degree_reduce_matrix(const CodeSpec& spec);

/// Lagrange weights lambda_s(eta_c) for the degree < w polynomial through zeta:
/// entry (c, s). Used to evaluate per-row coefficient polynomials at the share points.
Matrix zeta_lagrange_at_eta(const CodeSpec& spec);

}  // namespace ips2pc
