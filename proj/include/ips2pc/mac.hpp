#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ips2pc/circuit.hpp"
#include "ips2pc/combined.hpp"
#include "ips2pc/crypto.hpp"
#include "ips2pc/field.hpp"

namespace ips2pc {

class MacError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Affine one-time MAC: tag = k1 * x + k2.
struct MacKey {
  Fe k1, k2;
  friend bool operator==(const MacKey&, const MacKey&) = default;
};

Fe mac_tag(const PrimeField& F, const MacKey& key, Fe x);
/// k1 is drawn from the nonzero elements.
MacKey mac_keygen(const PrimeField& F, Prg& rng);

/// One party's authenticated inputs.
struct MacInput {
  std::vector<Fe> values;
  std::vector<MacKey> keys;
  std::vector<Fe> tags;
};

MacInput mac_input(const PrimeField& F, std::span<const Fe> values, Prg& rng);
/// Throws MacError on size mismatch or a key with k1 = 0.
void validate_mac_input(const MacInput& in);
/// values || k1 || k2 || tags, the party's input vector to the augmented circuit.
std::vector<Fe> flatten(const MacInput& in);

/// f extended with one more output, the coin-weighted sum of the MAC
/// differences of every party input.
struct MacCircuit {
  LayeredCircuit circuit;
  std::size_t outputs = 0;  // outputs of f; the flag follows them
  std::size_t inputs[2]{};  // party input counts of f
  std::size_t coins = 0;    // coins of f; the flag coefficients follow them
};

/// The flag sits alone in its output block.
MacCircuit augment_with_mac(const LayeredCircuit& f);

/// Flag computed in the clear, for reference.
Fe mac_flag(const PrimeField& F, const MacCircuit& m, const MacInput& x, const MacInput& y, std::span<const Fe> coins);

struct FPrimeResult {
  LocalRun run;
  bool accepted = false;  // protocol accepted and flag == 0
  std::vector<Fe> outputs;  // f(x, y), empty unless accepted
  Fe flag;
};

FPrimeResult run_f_prime(const CodeSpec& spec, const Schedule& s, const MacCircuit& m, const MacInput& x,
                         const MacInput& y, const LocalRunOptions& opt);

}  // namespace ips2pc
