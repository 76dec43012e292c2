#include "ips2pc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace ips2pc {

using json = nlohmann::json;
using i128 = __int128;

uint64_t QuantModel::input_bound() const {
  return static_cast<uint64_t>(std::ceil(std::ldexp(input_range, scale_f)));
}

void validate_model(const QuantModel& m) {
  if (m.layers.empty()) throw ModelError("model has no layers");
  if (m.scale_f < 0 || m.scale_f > 30) throw ModelError("scale_f must lie in [0, 30]");
  if (!(m.input_range > 0) || !std::isfinite(m.input_range)) throw ModelError("input_range must be positive");
  if (m.features.empty()) throw ModelError("feature_schema is empty");
  std::map<std::string, int> seen;
  for (const auto& f : m.features) {
    if (f.party != 0 && f.party != 1) throw ModelError("feature '" + f.name + "' has party outside {0, 1}");
    if (seen[f.name]++) throw ModelError("feature '" + f.name + "' listed twice");
  }
  std::size_t width = m.features.size();
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    const std::string at = "layer " + std::to_string(l);
    if (L.rows == 0) throw ModelError(at + " has no rows");
    if (L.cols != width)
      throw ModelError(at + " expects " + std::to_string(L.cols) + " inputs, previous width is " + std::to_string(width));
    if (L.weights.size() != L.rows * L.cols) throw ModelError(at + " weight count does not match rows x cols");
    if (L.bias.size() != L.rows) throw ModelError(at + " bias count does not match rows");
    width = L.rows;
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

QuantModel from_json(const json& j) {
  QuantModel m;
  for (const auto& l : j.at("layers")) {
    QuantLayer L;
    L.rows = l.at("rows").get<std::size_t>();
    L.cols = l.at("cols").get<std::size_t>();
    L.weights = l.at("weights").get<std::vector<int64_t>>();
    L.bias = l.at("bias").get<std::vector<int64_t>>();
    m.layers.push_back(std::move(L));
  }
  m.scale_f = j.at("scale_f").get<int>();
  for (const auto& f : j.at("feature_schema")) m.features.push_back({f.at("name"), f.at("party").get<int>()});
  m.input_range = j.value("input_range", 1.0);
  if (j.contains("metadata")) {
    const auto& md = j.at("metadata");
    m.float_acc = md.value("float_acc", 0.0);
    m.quant_acc = md.value("quant_acc", 0.0);
  }
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

QuantModel parse_model(const std::string& text) {
  QuantModel m;
  try {
    m = from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ModelError(std::string("model schema: ") + e.what());
  }
  validate_model(m);
  return m;
}

std::string model_to_json(const QuantModel& m) {
  json j;
  j["layers"] = json::array();
  for (const auto& L : m.layers)
    j["layers"].push_back({{"rows", L.rows}, {"cols", L.cols}, {"weights", L.weights}, {"bias", L.bias}});
  j["scale_f"] = m.scale_f;
  j["feature_schema"] = json::array();
  for (const auto& f : m.features) j["feature_schema"].push_back({{"name", f.name}, {"party", f.party}});
  j["input_range"] = m.input_range;
  j["metadata"] = {{"float_acc", m.float_acc}, {"quant_acc", m.quant_acc}};
  return j.dump(1);
}

QuantModel load_model(const std::string& path) { return parse_model(read_file(path)); }

void save_model(const QuantModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path);
  out << model_to_json(m) << '\n';
}

// ---------------------------------------------------------------------------
// features

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r"), e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, std::size_t line, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ModelError("features line " + std::to_string(line) + ": column '" + column + "' is not a number: '" + cell + "'");
}

}  // namespace

FeatureTable parse_features(const QuantModel& m, const std::string& text, int party) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ModelError("features file is empty");
  const auto header = split_csv_line(line);
  constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  std::vector<std::size_t> column;
  for (const auto& f : m.features) {
    if (party >= 0 && f.party != party) {
      column.push_back(kAbsent);
      continue;
    }
    const auto it = std::find(header.begin(), header.end(), f.name);
    if (it == header.end()) throw ModelError("features file is missing column '" + f.name + "'");
    column.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  const auto label_it = std::find(header.begin(), header.end(), "label");
  const bool has_label = label_it != header.end();
  const double scale = std::ldexp(1.0, m.scale_f);
  const auto bound = static_cast<int64_t>(m.input_bound());

  FeatureTable t;
  for (std::size_t ln = 2; std::getline(in, line); ++ln) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ModelError("features line " + std::to_string(ln) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(header.size()));
    std::vector<int64_t> row;
    for (std::size_t i = 0; i < column.size(); ++i) {
      if (column[i] == kAbsent) {
        row.push_back(0);
        continue;
      }
      const int64_t q = std::llround(parse_number(cells[column[i]], ln, m.features[i].name) * scale);
      if (q > bound || q < -bound)
        throw ModelError("features line " + std::to_string(ln) + ": '" + m.features[i].name + "' outside the input range");
      row.push_back(q);
    }
    t.rows.push_back(std::move(row));
    if (has_label) {
      const auto c = static_cast<std::size_t>(label_it - header.begin());
      t.labels.push_back(std::llround(parse_number(cells[c], ln, "label")));
    }
  }
  return t;
}

FeatureTable load_features(const QuantModel& m, const std::string& path, int party) {
  return parse_features(m, read_file(path), party);
}

std::vector<int64_t> party_features(const QuantModel& m, std::span<const int64_t> row, int party) {
  if (row.size() != m.features.size()) throw ModelError("feature row has the wrong length");
  std::vector<int64_t> out;
  for (std::size_t i = 0; i < row.size(); ++i)
    if (m.features[i].party == party) out.push_back(row[i]);
  return out;
}

// ---------------------------------------------------------------------------
// clear inference

std::vector<int> layer_scales(const QuantModel& m) {
  std::vector<int> out;
  int s = m.scale_f;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    out.push_back(s + m.scale_f);
    s = 2 * out.back();
  }
  return out;
}

std::size_t argmax(std::span<const int64_t> v) {
  if (v.empty()) throw ModelError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

namespace {

constexpr i128 kMax63 = (static_cast<i128>(1) << 63) - 1;

i128 checked(i128 v, const char* what, std::size_t layer) {
  if (v > kMax63 || v < -kMax63)
    throw ModelError(std::string(what) + " in layer " + std::to_string(layer) + " exceeds 63 bits; lower scale_f");
  return v;
}

// bias * 2^(scale - f), refusing values that leave 63 bits
int64_t lifted_bias(const QuantModel& m, std::size_t l, std::size_t o, int prev_scale) {
  if (prev_scale >= 63 && m.layers[l].bias[o] != 0) checked(kMax63 + 1, "bias", l);
  if (prev_scale >= 63) return 0;
  return static_cast<int64_t>(checked(static_cast<i128>(m.layers[l].bias[o]) << prev_scale, "bias", l));
}

}  // namespace

InferenceResult infer_clear(const QuantModel& m, std::span<const int64_t> features) {
  validate_model(m);
  if (features.size() != m.inputs()) throw ModelError("feature row has the wrong length");
  std::vector<int64_t> a(features.begin(), features.end());
  int s = m.scale_f;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    std::vector<int64_t> z(L.rows);
    for (std::size_t o = 0; o < L.rows; ++o) {
      i128 acc = lifted_bias(m, l, o, s);
      for (std::size_t j = 0; j < L.cols; ++j)
        acc = checked(acc + checked(static_cast<i128>(L.weights[o * L.cols + j]) * a[j], "product", l), "sum", l);
      z[o] = static_cast<int64_t>(acc);
    }
    s += m.scale_f;
    if (l + 1 == m.layers.size()) {
      a = std::move(z);
      break;
    }
    for (auto& v : z) v = static_cast<int64_t>(checked(static_cast<i128>(v) * v, "activation", l));
    a = std::move(z);
    s *= 2;
  }
  InferenceResult r;
  r.logits = std::move(a);
  r.predicted = argmax(r.logits);
  return r;
}

// ---------------------------------------------------------------------------
// circuit

namespace {

using Wire = std::optional<SlotRef>;

struct Builder {
  LayeredCircuit& c;

  std::vector<SlotRef> layer(GateOp op, const std::vector<Wire>& left, const std::vector<Wire>& right) {
    Layer l;
    l.op = op;
    l.blocks = static_cast<uint32_t>((left.size() + c.width - 1) / c.width);
    l.left.resize(static_cast<std::size_t>(l.blocks) * c.width);
    l.right.resize(l.left.size());
    std::copy(left.begin(), left.end(), l.left.begin());
    std::copy(right.begin(), right.end(), l.right.begin());
    c.layers.push_back(std::move(l));
    const auto j = static_cast<uint32_t>(c.layers.size());
    std::vector<SlotRef> out;
    for (std::size_t i = 0; i < left.size(); ++i)
      out.push_back({j, static_cast<uint32_t>(i / c.width), static_cast<uint32_t>(i % c.width)});
    return out;
  }

  // Sums each consecutive group of `group` wires with a halving tree.
  std::vector<SlotRef> sum_groups(std::vector<Wire> leaves, std::size_t group) {
    const std::size_t groups = leaves.size() / group;
    do {
      const std::size_t half = (group + 1) / 2;
      std::vector<Wire> left, right;
      for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t i = 0; i < half; ++i) {
          left.push_back(leaves[g * group + 2 * i]);
          right.push_back(2 * i + 1 < group ? leaves[g * group + 2 * i + 1] : std::nullopt);
        }
      const auto out = layer(GateOp::Add, left, right);
      leaves.assign(out.begin(), out.end());
      group = half;
    } while (group > 1);
    return to_refs(leaves);
  }

  static std::vector<SlotRef> to_refs(const std::vector<Wire>& w) {
    std::vector<SlotRef> out;
    for (const auto& x : w) out.push_back(*x);
    return out;
  }
};

}  // namespace

CompiledModel compile_to_circuit(const QuantModel& m, const PrimeField& F, std::size_t batch, uint32_t width) {
  validate_model(m);
  if (batch == 0) throw ModelError("batch must be positive");
  if (width == 0) throw ModelError("block width must be positive");
  CompiledModel out;
  out.batch = batch;
  LayeredCircuit& c = out.circuit;
  c.width = width;

  // party inputs, row-major per party
  std::vector<std::vector<SlotRef>> act(batch);
  std::size_t owned[2] = {0, 0};
  for (const auto& f : m.features) ++owned[f.party];
  std::vector<SlotRef> party_slot[2];
  for (int p = 0; p < 2; ++p) {
    const auto owner = p == 0 ? InputOwner::Party0 : InputOwner::Party1;
    for (std::size_t i = 0; i < batch * owned[p]; ++i) {
      if (i % width == 0) c.inputs.push_back({owner, std::vector<int64_t>(width, -1)});
      c.inputs.back().entries[i % width] = static_cast<int64_t>(i);
      party_slot[p].push_back({0, static_cast<uint32_t>(c.inputs.size() - 1), static_cast<uint32_t>(i % width)});
    }
  }
  for (std::size_t r = 0; r < batch; ++r) {
    std::size_t next[2] = {0, 0};
    for (const auto& f : m.features) act[r].push_back(party_slot[f.party][r * owned[f.party] + next[f.party]++]);
  }

  // distinct public constants
  std::map<int64_t, SlotRef> constant;
  auto want = [&](int64_t v) { constant.emplace(v, SlotRef{}); };
  int s = m.scale_f;
  std::vector<std::vector<int64_t>> bias(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (int64_t w : m.layers[l].weights)
      if (w != 0) want(w);
    for (std::size_t o = 0; o < m.layers[l].rows; ++o) {
      bias[l].push_back(lifted_bias(m, l, o, s));
      if (bias[l].back() != 0) want(bias[l].back());
    }
    s = 2 * (s + m.scale_f);
  }
  std::size_t i = 0;
  for (auto& [v, ref] : constant) {
    if (i % width == 0) c.inputs.push_back({InputOwner::Public, std::vector<int64_t>(width, 0)});
    c.inputs.back().entries[i % width] = v;
    ref = {0, static_cast<uint32_t>(c.inputs.size() - 1), static_cast<uint32_t>(i % width)};
    ++i;
  }
  if (c.inputs.empty()) c.inputs.push_back({InputOwner::Public, std::vector<int64_t>(width, 0)});

  Builder b{c};
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    std::vector<Wire> left, right;
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t o = 0; o < L.rows; ++o)
        for (std::size_t j = 0; j < L.cols; ++j) {
          const int64_t w = L.weights[o * L.cols + j];
          left.push_back(w ? Wire(act[r][j]) : std::nullopt);
          right.push_back(w ? Wire(constant.at(w)) : std::nullopt);
        }
    const auto prod = b.layer(GateOp::Mul, left, right);
    std::vector<Wire> leaves;
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t o = 0; o < L.rows; ++o) {
        for (std::size_t j = 0; j < L.cols; ++j) leaves.push_back(prod[(r * L.rows + o) * L.cols + j]);
        leaves.push_back(bias[l][o] ? Wire(constant.at(bias[l][o])) : std::nullopt);
      }
    auto z = b.sum_groups(std::move(leaves), L.cols + 1);
    if (l + 1 < m.layers.size()) {
      const std::vector<Wire> zw(z.begin(), z.end());
      z = b.layer(GateOp::Mul, zw, zw);
    }
    for (std::size_t r = 0; r < batch; ++r) act[r].assign(z.begin() + r * L.rows, z.begin() + (r + 1) * L.rows);
  }
  for (const auto& row : act) c.outputs.insert(c.outputs.end(), row.begin(), row.end());
  validate(c);

  out.bound = check_no_overflow(c, m.input_bound());
  if (!out.bound.fits(F))
    throw ModelError("model overflows the field: worst intermediate magnitude " + out.bound.to_string() +
                     " exceeds (p-1)/2; lower scale_f");
  return out;
}

std::vector<Fe> circuit_inputs(const PrimeField& F, const QuantModel& m, std::span<const std::vector<int64_t>> rows,
                               int party) {
  std::vector<Fe> out;
  for (const auto& row : rows)
    for (int64_t v : party_features(m, row, party)) out.push_back(F.from_i64(v));
  return out;
}

std::vector<std::vector<int64_t>> decode_logits(const PrimeField& F, const QuantModel& m, std::span<const Fe> outputs) {
  const std::size_t k = m.classes();
  if (k == 0 || outputs.size() % k) throw ModelError("output count is not a multiple of the class count");
  std::vector<std::vector<int64_t>> out(outputs.size() / k);
  for (std::size_t i = 0; i < outputs.size(); ++i) out[i / k].push_back(F.to_signed(outputs[i]));
  return out;
}

}  // namespace ips2pc
