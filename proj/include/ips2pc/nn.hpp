#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ips2pc/circuit.hpp"
#include "ips2pc/field.hpp"

namespace ips2pc {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense layer with integer weights (row-major, rows x cols) and bias, both at
/// scale 2^f.
struct QuantLayer {
  std::size_t rows = 0, cols = 0;
  std::vector<int64_t> weights, bias;
  friend bool operator==(const QuantLayer&, const QuantLayer&) = default;
};

struct FeatureSpec {
  std::string name;
  int party = 0;
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// Dense layers with a squaring activation between consecutive layers.
/// Features are real values in [-input_range, input_range] quantized as
/// round(v * 2^f).
struct QuantModel {
  std::vector<QuantLayer> layers;
  int scale_f = 0;
  std::vector<FeatureSpec> features;
  double input_range = 1.0;
  double float_acc = 0, quant_acc = 0;
  friend bool operator==(const QuantModel&, const QuantModel&) = default;

  std::size_t inputs() const { return features.size(); }
  std::size_t classes() const { return layers.empty() ? 0 : layers.back().rows; }
  /// Magnitude bound of a quantized feature.
  uint64_t input_bound() const;
};

/// Throws ModelError on inconsistent shapes, ownership or scale.
void validate_model(const QuantModel& m);

QuantModel parse_model(const std::string& json_text);
std::string model_to_json(const QuantModel& m);
QuantModel load_model(const std::string& path);
void save_model(const QuantModel& m, const std::string& path);

/// Quantized rows in schema order, with the optional `label` column.
struct FeatureTable {
  std::vector<std::vector<int64_t>> rows;
  std::vector<int64_t> labels;  // empty when the file has no label column
};

/// CSV with a header naming every schema feature (extra columns ignored).
/// With `party` >= 0 only that party's columns are required; the others
/// read as zero.
FeatureTable parse_features(const QuantModel& m, const std::string& csv_text, int party = -1);
FeatureTable load_features(const QuantModel& m, const std::string& path, int party = -1);

/// The features owned by `party`, in schema order.
std::vector<int64_t> party_features(const QuantModel& m, std::span<const int64_t> row, int party);

/// Scale exponent of the value produced by each dense layer (before squaring).
/// Layer l's bias is lifted by 2^(scale - f) to match.
std::vector<int> layer_scales(const QuantModel& m);

struct InferenceResult {
  std::vector<int64_t> logits;
  std::size_t predicted = 0;
};

/// Lowest index among the maxima.
std::size_t argmax(std::span<const int64_t> v);

/// Exact integer inference. Throws ModelError if any intermediate leaves the
/// signed 63-bit range.
InferenceResult infer_clear(const QuantModel& m, std::span<const int64_t> features);

struct CompiledModel {
  LayeredCircuit circuit;
  std::size_t batch = 1;
  Magnitude bound;  // worst intermediate magnitude for in-range features
};

/// Circuit evaluating `batch` independent rows. Outputs are the logits of row
/// 0, then row 1, and so on. Throws ModelError with the computed bound when
/// it does not fit the field.
CompiledModel compile_to_circuit(const QuantModel& m, const PrimeField& F, std::size_t batch = 1,
                                 uint32_t width = 8);

/// Party inputs to the compiled circuit for the given rows.
std::vector<Fe> circuit_inputs(const PrimeField& F, const QuantModel& m, std::span<const std::vector<int64_t>> rows,
                               int party);
/// Per-row logits from circuit outputs.
std::vector<std::vector<int64_t>> decode_logits(const PrimeField& F, const QuantModel& m,
                                                std::span<const Fe> outputs);

}  // namespace ips2pc
