#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ips2pc/field.hpp"

namespace ips2pc {

class CircuitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GateOp : uint8_t { Add, Sub, Mul };

/// Slot address. Layer 0 denotes the input blocks; layer j >= 1 the output
/// blocks of gate layer j.
struct SlotRef {
  uint32_t layer = 0;
  uint32_t block = 0;
  uint32_t slot = 0;
  friend auto operator<=>(const SlotRef&, const SlotRef&) = default;
};

enum class InputOwner : uint8_t { Party0, Party1, Public, Coin };

/// One input block. For party and coin blocks each entry is an input index
/// (or -1 for an unused slot, which must hold zero); for public blocks each
/// entry is the constant itself, embedded with the signed convention.
struct InputBlock {
  InputOwner owner = InputOwner::Public;
  std::vector<int64_t> entries;
  friend bool operator==(const InputBlock&, const InputBlock&) = default;
};

/// One gate layer: `blocks` aligned (left, right) block pairs, each slot wired
/// to an earlier slot or left unwired (constant zero).
struct Layer {
  GateOp op = GateOp::Add;
  uint32_t blocks = 0;
  std::vector<std::optional<SlotRef>> left, right;  // blocks * width entries
  friend bool operator==(const Layer&, const Layer&) = default;
};

struct LayeredCircuit {
  uint32_t width = 1;
  std::vector<InputBlock> inputs;
  std::vector<Layer> layers;  // layers[j - 1] is layer j
  std::vector<SlotRef> outputs;
  friend bool operator==(const LayeredCircuit&, const LayeredCircuit&) = default;

  std::size_t depth() const { return layers.size(); }
  std::size_t blocks_in(uint32_t layer) const { return layer == 0 ? inputs.size() : layers.at(layer - 1).blocks; }
  /// Number of inputs owned by a party (max index + 1), or of coins.
  std::size_t input_count(InputOwner owner) const;
  std::size_t mul_blocks() const;
};

/// Throws CircuitError describing the first violation.
void validate(const LayeredCircuit& c);

/// Per-slot values of an evaluation: input blocks, then per layer the left,
/// right and output blocks (flattened, block-major).
struct Trace {
  std::vector<Fe> inputs;
  std::vector<std::vector<Fe>> left, right, out;
};

Trace eval_trace(const PrimeField& F, const LayeredCircuit& c, std::span<const Fe> x, std::span<const Fe> y,
                 std::span<const Fe> coins = {});
std::vector<Fe> eval_plain(const PrimeField& F, const LayeredCircuit& c, std::span<const Fe> x,
                           std::span<const Fe> y, std::span<const Fe> coins = {});
/// Values of the input blocks (public constants and coins filled in).
std::vector<Fe> input_block_values(const PrimeField& F, const LayeredCircuit& c, std::span<const Fe> x,
                                   std::span<const Fe> y, std::span<const Fe> coins);

/// Layout of the concatenated block vector x: input blocks, then for every
/// layer its left, right and output blocks.
enum class Part : uint8_t { Input, Left, Right, Out };
struct XLayout {
  std::size_t width = 0;
  std::vector<std::size_t> layer_base;  // offset of layer j's left part (index j-1)
  std::vector<uint32_t> layer_blocks;
  std::size_t input_blocks = 0;
  std::size_t total_blocks = 0;
  std::size_t block_index(uint32_t layer, Part part, uint32_t block) const;
  std::size_t position(uint32_t layer, Part part, uint32_t block, uint32_t slot) const {
    return block_index(layer, part, block) * width + slot;
  }
  std::size_t source_position(const SlotRef& r) const {
    return position(r.layer, r.layer == 0 ? Part::Input : Part::Out, r.block, r.slot);
  }
};
XLayout x_layout(const LayeredCircuit& c);
std::vector<Fe> trace_vector(const LayeredCircuit& c, const Trace& t);

/// Homogeneous copy constraints: each row states x[dst] - x[src] = 0, or
/// x[dst] = 0 when src is absent.
struct PermConstraints {
  struct Row {
    std::size_t dst = 0;
    std::optional<std::size_t> src;
  };
  std::vector<Row> rows;
  std::size_t x_len = 0;
};

PermConstraints perm_constraints(const LayeredCircuit& c);
/// A_perm * x.
std::vector<Fe> apply_constraints(const PrimeField& F, const PermConstraints& pc, std::span<const Fe> x);
bool satisfies(const PrimeField& F, const PermConstraints& pc, std::span<const Fe> x);
/// r^T A_perm, a vector over x positions.
std::vector<Fe> combine_constraints(const PrimeField& F, const PermConstraints& pc, std::span<const Fe> r);

/// Worst-case magnitude by interval analysis, saturating at 2^126.
struct Magnitude {
  unsigned __int128 value = 0;
  bool saturated = false;
  bool fits(const PrimeField& F) const { return !saturated && value <= (F.modulus() - 1) / 2; }
  double log2() const;
  std::string to_string() const;
};

/// Party inputs lie in [-input_bound, input_bound], coins in [-coin_bound, coin_bound].
Magnitude check_no_overflow(const LayeredCircuit& c, uint64_t input_bound, uint64_t coin_bound = 0);

std::string print_circuit(const LayeredCircuit& c);
LayeredCircuit parse_circuit(const std::string& text);
LayeredCircuit load_circuit(const std::string& path);

struct RandomCircuitOptions {
  uint32_t width = 2;
  uint32_t max_depth = 6;
  uint32_t max_blocks = 4;
  std::size_t party0_inputs = 3;
  std::size_t party1_inputs = 3;
  bool public_block = true;
  double unwired_fraction = 0.1;
};

/// Random well-formed circuit; wiring draws from any earlier layer with replication.
LayeredCircuit random_circuit(std::mt19937_64& rng, const RandomCircuitOptions& opt);

}  // namespace ips2pc
