#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ips2pc/field.hpp"

namespace ips2pc {

class ParamsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ProtocolParams {
  std::size_t n = 0;      // emulated servers
  std::size_t k = 0;      // degree bound of L
  std::size_t w = 0;      // block width
  std::size_t t = 0;      // privacy / watchlist size
  std::size_t e = 0;      // robustness
  std::size_t sigma = 1;  // test repetitions
  unsigned kappa = 128;   // computational security (bits)
  unsigned s = 40;        // statistical security (bits)
  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

std::string to_string(const ProtocolParams& p);

/// Every violated precondition, each naming its constraint. Empty when valid.
std::vector<std::string> param_violations(const ProtocolParams& p, const PrimeField& F);
/// Throws ParamsError listing the violations.
void validate_params(const ProtocolParams& p, const PrimeField& F);

/// (e + 2) / |F|^sigma
long double soundness_outer(std::size_t e, std::size_t sigma, long double field_size);
long double soundness_outer(const ProtocolParams& p, const PrimeField& F);
/// (1 - e/n)^t + ((3e + 2w + 2t) / n)^t
long double soundness_watchlist(const ProtocolParams& p);
/// Sum of the two.
long double soundness_combined(const ProtocolParams& p, const PrimeField& F);
/// log2 of soundness_outer, exact enough for tiny values.
double log2_soundness_outer(const ProtocolParams& p, const PrimeField& F);

/// Smallest sigma >= 1 with (e + 2) / |F|^sigma <= 2^-bits.
std::size_t min_sigma(std::size_t e, const PrimeField& F, unsigned bits);

/// Deterministic search: k over powers of two ascending, then e ascending,
/// then the smallest t >= 1 meeting the combined bound; keeps the first
/// candidate with strictly larger w = k - 1 - t - e. target_s = 0 imposes no
/// soundness requirement. Throws ParamsError naming the binding constraint.
ProtocolParams select_params(std::size_t n, unsigned target_s, const PrimeField& F, unsigned kappa = 128);

/// Small named parameter sets used by tests, experiments and the CLI.
ProtocolParams toy_params_a();   // n=16 k=4 w=1 t=1 e=1
ProtocolParams toy_params_b();   // n=32 k=8 w=2 t=2 e=3
ProtocolParams watch_params();   // n=8 k=4 w=1 t=2 e=0
ProtocolParams nn_params();      // n=64 k=16 w=8 t=4 e=3
ProtocolParams named_params(const std::string& name);

/// Key-value text, one `key = value` per line, `#` comments:
///
///   preset = toy-b   # optional starting point
///   n = 32
///   sigma = 4
///
/// Keys: preset n k w t e sigma kappa s. Later lines override earlier ones.
/// Not validated; call validate_params.
ProtocolParams parse_params(const std::string& text);
ProtocolParams load_params(const std::string& path);

}  // namespace ips2pc
