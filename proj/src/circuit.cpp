#include "ips2pc/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ips2pc {

namespace {

const char* op_name(GateOp op) {
  switch (op) {
    case GateOp::Add: return "add";
    case GateOp::Sub: return "sub";
    case GateOp::Mul: return "mul";
  }
  return "?";
}

GateOp parse_op(const std::string& s) {
  if (s == "add") return GateOp::Add;
  if (s == "sub") return GateOp::Sub;
  if (s == "mul") return GateOp::Mul;
  throw CircuitError("unknown gate op '" + s + "'");
}

const char* owner_name(InputOwner o) {
  switch (o) {
    case InputOwner::Party0: return "party0";
    case InputOwner::Party1: return "party1";
    case InputOwner::Public: return "public";
    case InputOwner::Coin: return "coin";
  }
  return "?";
}

InputOwner parse_owner(const std::string& s) {
  if (s == "party0") return InputOwner::Party0;
  if (s == "party1") return InputOwner::Party1;
  if (s == "public") return InputOwner::Public;
  if (s == "coin") return InputOwner::Coin;
  throw CircuitError("unknown input owner '" + s + "'");
}

std::string ref_str(const SlotRef& r) {
  return "(" + std::to_string(r.layer) + "," + std::to_string(r.block) + "," + std::to_string(r.slot) + ")";
}

void check_ref(const LayeredCircuit& c, const SlotRef& r, uint32_t below_layer, const std::string& what) {
  if (r.layer >= below_layer) throw CircuitError(what + " references layer " + std::to_string(r.layer) + " not earlier than " + std::to_string(below_layer));
  if (r.block >= c.blocks_in(r.layer) || r.slot >= c.width) throw CircuitError(what + " references missing slot " + ref_str(r));
}

}  // namespace

std::size_t LayeredCircuit::input_count(InputOwner owner) const {
  std::size_t n = 0;
  if (owner == InputOwner::Public) return 0;
  for (const auto& b : inputs) {
    if (b.owner != owner) continue;
    for (int64_t e : b.entries)
      if (e >= 0) n = std::max<std::size_t>(n, static_cast<std::size_t>(e) + 1);
  }
  return n;
}

std::size_t LayeredCircuit::mul_blocks() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    if (l.op == GateOp::Mul) n += l.blocks;
  return n;
}

void validate(const LayeredCircuit& c) {
  if (c.width == 0) throw CircuitError("block width must be positive");
  std::map<InputOwner, std::vector<int>> used;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    const auto& b = c.inputs[i];
    if (b.entries.size() != c.width) throw CircuitError("input block " + std::to_string(i) + " has wrong width");
    if (b.owner == InputOwner::Public) continue;
    for (int64_t e : b.entries) {
      if (e < -1) throw CircuitError("input block " + std::to_string(i) + " has negative index");
      if (e < 0) continue;
      auto& u = used[b.owner];
      if (u.size() <= static_cast<std::size_t>(e)) u.resize(e + 1, 0);
      if (u[e]++) throw CircuitError(std::string(owner_name(b.owner)) + " input " + std::to_string(e) + " placed twice");
    }
  }
  for (auto& [owner, u] : used)
    for (std::size_t i = 0; i < u.size(); ++i)
      if (!u[i]) throw CircuitError(std::string(owner_name(owner)) + " input " + std::to_string(i) + " missing");

  for (uint32_t j = 1; j <= c.layers.size(); ++j) {
    const Layer& l = c.layers[j - 1];
    const std::size_t slots = static_cast<std::size_t>(l.blocks) * c.width;
    if (l.blocks == 0) throw CircuitError("layer " + std::to_string(j) + " is empty");
    if (l.left.size() != slots || l.right.size() != slots)
      throw CircuitError("layer " + std::to_string(j) + " wiring has wrong size");
    for (std::size_t s = 0; s < slots; ++s) {
      if (l.left[s]) check_ref(c, *l.left[s], j, "layer " + std::to_string(j) + " left wire");
      if (l.right[s]) check_ref(c, *l.right[s], j, "layer " + std::to_string(j) + " right wire");
    }
  }
  for (const auto& o : c.outputs) check_ref(c, o, static_cast<uint32_t>(c.layers.size() + 1), "output");
}

std::vector<Fe> input_block_values(const PrimeField& F, const LayeredCircuit& c, std::span<const Fe> x,
                                   std::span<const Fe> y, std::span<const Fe> coins) {
  if (x.size() != c.input_count(InputOwner::Party0)) throw CircuitError("party 0 input length mismatch");
  if (y.size() != c.input_count(InputOwner::Party1)) throw CircuitError("party 1 input length mismatch");
  if (coins.size() < c.input_count(InputOwner::Coin)) throw CircuitError("too few coins");
  std::vector<Fe> out;
  out.reserve(c.inputs.size() * c.width);
  for (const auto& b : c.inputs) {
    for (int64_t e : b.entries) {
      switch (b.owner) {
        case InputOwner::Public: out.push_back(F.from_i64(e)); break;
        case InputOwner::Party0: out.push_back(e < 0 ? F.zero() : x[e]); break;
        case InputOwner::Party1: out.push_back(e < 0 ? F.zero() : y[e]); break;
        case InputOwner::Coin: out.push_back(e < 0 ? F.zero() : coins[e]); break;
      }
    }
  }
  return out;
}

Trace eval_trace(const PrimeField& F, const LayeredCircuit& c, std::span<const Fe> x, std::span<const Fe> y,
                 std::span<const Fe> coins) {
  Trace t;
  t.inputs = input_block_values(F, c, x, y, coins);
  const uint32_t w = c.width;
  auto value = [&](const std::optional<SlotRef>& r) {
    if (!r) return F.zero();
    const auto& src = r->layer == 0 ? t.inputs : t.out[r->layer - 1];
    return src[static_cast<std::size_t>(r->block) * w + r->slot];
  };
  for (const Layer& l : c.layers) {
    const std::size_t slots = static_cast<std::size_t>(l.blocks) * w;
    std::vector<Fe> a(slots), b(slots), o(slots);
    for (std::size_t s = 0; s < slots; ++s) {
      a[s] = value(l.left[s]);
      b[s] = value(l.right[s]);
      switch (l.op) {
        case GateOp::Add: o[s] = F.add(a[s], b[s]); break;
        case GateOp::Sub: o[s] = F.sub(a[s], b[s]); break;
        case GateOp::Mul: o[s] = F.mul(a[s], b[s]); break;
      }
    }
    t.left.push_back(std::move(a));
    t.right.push_back(std::move(b));
    t.out.push_back(std::move(o));
  }
  return t;
}

std::vector<Fe> eval_plain(const PrimeField& F, const LayeredCircuit& c, std::span<const Fe> x,
                           std::span<const Fe> y, std::span<const Fe> coins) {
  Trace t = eval_trace(F, c, x, y, coins);
  std::vector<Fe> out;
  out.reserve(c.outputs.size());
  for (const auto& r : c.outputs) {
    const auto& src = r.layer == 0 ? t.inputs : t.out[r.layer - 1];
    out.push_back(src[static_cast<std::size_t>(r.block) * c.width + r.slot]);
  }
  return out;
}

std::size_t XLayout::block_index(uint32_t layer, Part part, uint32_t block) const {
  if (layer == 0) return block;
  const uint32_t m = layer_blocks.at(layer - 1);
  const std::size_t base = layer_base[layer - 1];
  switch (part) {
    case Part::Left: return base + block;
    case Part::Right: return base + m + block;
    case Part::Out: return base + 2 * static_cast<std::size_t>(m) + block;
    case Part::Input: break;
  }
  throw CircuitError("input part requested for a gate layer");
}

XLayout x_layout(const LayeredCircuit& c) {
  XLayout L;
  L.width = c.width;
  L.input_blocks = c.inputs.size();
  std::size_t next = L.input_blocks;
  for (const auto& l : c.layers) {
    L.layer_base.push_back(next);
    L.layer_blocks.push_back(l.blocks);
    next += 3 * static_cast<std::size_t>(l.blocks);
  }
  L.total_blocks = next;
  return L;
}

std::vector<Fe> trace_vector(const LayeredCircuit& c, const Trace& t) {
  std::vector<Fe> x(t.inputs);
  for (std::size_t j = 0; j < c.layers.size(); ++j) {
    x.insert(x.end(), t.left[j].begin(), t.left[j].end());
    x.insert(x.end(), t.right[j].begin(), t.right[j].end());
    x.insert(x.end(), t.out[j].begin(), t.out[j].end());
  }
  return x;
}

PermConstraints perm_constraints(const LayeredCircuit& c) {
  const XLayout L = x_layout(c);
  PermConstraints pc;
  pc.x_len = L.total_blocks * c.width;
  for (uint32_t b = 0; b < c.inputs.size(); ++b) {
    const auto& blk = c.inputs[b];
    if (blk.owner != InputOwner::Party0 && blk.owner != InputOwner::Party1) continue;
    for (uint32_t s = 0; s < c.width; ++s)
      if (blk.entries[s] < 0) pc.rows.push_back({L.position(0, Part::Input, b, s), std::nullopt});
  }
  for (uint32_t j = 1; j <= c.layers.size(); ++j) {
    const Layer& l = c.layers[j - 1];
    for (Part part : {Part::Left, Part::Right}) {
      const auto& wires = part == Part::Left ? l.left : l.right;
      for (uint32_t b = 0; b < l.blocks; ++b)
        for (uint32_t s = 0; s < c.width; ++s) {
          const auto& r = wires[static_cast<std::size_t>(b) * c.width + s];
          PermConstraints::Row row{L.position(j, part, b, s), std::nullopt};
          if (r) row.src = L.source_position(*r);
          pc.rows.push_back(row);
        }
    }
  }
  return pc;
}

std::vector<Fe> apply_constraints(const PrimeField& F, const PermConstraints& pc, std::span<const Fe> x) {
  if (x.size() != pc.x_len) throw CircuitError("constraint vector length mismatch");
  std::vector<Fe> out;
  out.reserve(pc.rows.size());
  for (const auto& r : pc.rows) out.push_back(r.src ? F.sub(x[r.dst], x[*r.src]) : x[r.dst]);
  return out;
}

bool satisfies(const PrimeField& F, const PermConstraints& pc, std::span<const Fe> x) {
  for (Fe v : apply_constraints(F, pc, x))
    if (v != F.zero()) return false;
  return true;
}

std::vector<Fe> combine_constraints(const PrimeField& F, const PermConstraints& pc, std::span<const Fe> r) {
  if (r.size() != pc.rows.size()) throw CircuitError("coin vector length mismatch");
  std::vector<Fe> out(pc.x_len, F.zero());
  for (std::size_t i = 0; i < pc.rows.size(); ++i) {
    const auto& row = pc.rows[i];
    out[row.dst] = F.add(out[row.dst], r[i]);
    if (row.src) out[*row.src] = F.sub(out[*row.src], r[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// interval analysis

namespace {

using i128 = __int128;
constexpr i128 kCap = static_cast<i128>(1) << 126;

struct Interval {
  i128 lo = 0, hi = 0;
};

i128 clamp(i128 v, bool& sat) {
  if (v > kCap) { sat = true; return kCap; }
  if (v < -kCap) { sat = true; return -kCap; }
  return v;
}

i128 sat_mul(i128 a, i128 b, bool& sat) {
  if (a == 0 || b == 0) return 0;
  const i128 ma = a < 0 ? -a : a, mb = b < 0 ? -b : b;
  if (ma > kCap / mb) {
    sat = true;
    return (a < 0) != (b < 0) ? -kCap : kCap;
  }
  return clamp(a * b, sat);
}

}  // namespace

double Magnitude::log2() const {
  if (value == 0) return -INFINITY;
  return std::log2(static_cast<long double>(value));
}

std::string Magnitude::to_string() const {
  if (value == 0) return "0";
  std::string s;
  unsigned __int128 v = value;
  while (v) {
    s += static_cast<char>('0' + static_cast<int>(v % 10));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return saturated ? ">=" + s : s;
}

Magnitude check_no_overflow(const LayeredCircuit& c, uint64_t input_bound, uint64_t coin_bound) {
  bool sat = false;
  std::vector<Interval> in;
  for (const auto& b : c.inputs)
    for (int64_t e : b.entries) {
      switch (b.owner) {
        case InputOwner::Public: in.push_back({e, e}); break;
        case InputOwner::Party0:
        case InputOwner::Party1:
          in.push_back(e < 0 ? Interval{} : Interval{-static_cast<i128>(input_bound), static_cast<i128>(input_bound)});
          break;
        case InputOwner::Coin:
          in.push_back(e < 0 ? Interval{} : Interval{-static_cast<i128>(coin_bound), static_cast<i128>(coin_bound)});
          break;
      }
    }
  i128 worst = 0;
  auto note = [&](const Interval& v) { worst = std::max({worst, v.hi, -v.lo}); };
  for (const auto& v : in) note(v);

  std::vector<std::vector<Interval>> out;
  auto get = [&](const std::optional<SlotRef>& r) -> Interval {
    if (!r) return {};
    const auto& src = r->layer == 0 ? in : out[r->layer - 1];
    return src[static_cast<std::size_t>(r->block) * c.width + r->slot];
  };
  for (const Layer& l : c.layers) {
    std::vector<Interval> o(l.left.size());
    for (std::size_t s = 0; s < o.size(); ++s) {
      const Interval a = get(l.left[s]), b = get(l.right[s]);
      switch (l.op) {
        case GateOp::Add: o[s] = {clamp(a.lo + b.lo, sat), clamp(a.hi + b.hi, sat)}; break;
        case GateOp::Sub: o[s] = {clamp(a.lo - b.hi, sat), clamp(a.hi - b.lo, sat)}; break;
        case GateOp::Mul: {
          const i128 p[4] = {sat_mul(a.lo, b.lo, sat), sat_mul(a.lo, b.hi, sat), sat_mul(a.hi, b.lo, sat),
                             sat_mul(a.hi, b.hi, sat)};
          o[s] = {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
          break;
        }
      }
      note(o[s]);
    }
    out.push_back(std::move(o));
  }
  return {static_cast<unsigned __int128>(worst), sat};
}

// ---------------------------------------------------------------------------
// text format

std::string print_circuit(const LayeredCircuit& c) {
  std::ostringstream os;
  os << "ips2pc-circuit 1\n";
  os << "width " << c.width << "\n";
  os << "depth " << c.layers.size() << "\n";
  for (std::size_t j = 0; j < c.layers.size(); ++j)
    os << "layer " << j + 1 << " " << op_name(c.layers[j].op) << " " << c.layers[j].blocks << "\n";
  for (std::size_t j = 0; j < c.layers.size(); ++j) {
    const Layer& l = c.layers[j];
    for (int side = 0; side < 2; ++side) {
      const auto& wires = side == 0 ? l.left : l.right;
      for (std::size_t s = 0; s < wires.size(); ++s) {
        if (!wires[s]) continue;
        const auto& r = *wires[s];
        os << "wire " << j + 1 << " " << (side == 0 ? 'L' : 'R') << " " << s / c.width << " " << s % c.width << " "
           << r.layer << " " << r.block << " " << r.slot << "\n";
      }
    }
  }
  os << "inputs " << c.inputs.size() << "\n";
  for (const auto& b : c.inputs) {
    os << "input " << owner_name(b.owner);
    for (int64_t e : b.entries) os << " " << e;
    os << "\n";
  }
  os << "outputs " << c.outputs.size() << "\n";
  for (const auto& o : c.outputs) os << "output " << o.layer << " " << o.block << " " << o.slot << "\n";
  return os.str();
}

LayeredCircuit parse_circuit(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  LayeredCircuit c;
  bool header = false;
  auto fail = [&](const std::string& msg) -> CircuitError {
    return CircuitError("circuit line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    if (!header) {
      int version = 0;
      if (kw != "ips2pc-circuit" || !(ls >> version) || version != 1) throw fail("expected 'ips2pc-circuit 1'");
      header = true;
      continue;
    }
    if (kw == "width") {
      if (!(ls >> c.width)) throw fail("bad width");
    } else if (kw == "depth") {
      std::size_t d = 0;
      if (!(ls >> d)) throw fail("bad depth");
      c.layers.resize(d);
    } else if (kw == "layer") {
      std::size_t j = 0;
      std::string op;
      uint32_t m = 0;
      if (!(ls >> j >> op >> m) || j == 0 || j > c.layers.size()) throw fail("bad layer line");
      Layer& l = c.layers[j - 1];
      l.op = parse_op(op);
      l.blocks = m;
      l.left.assign(static_cast<std::size_t>(m) * c.width, std::nullopt);
      l.right.assign(static_cast<std::size_t>(m) * c.width, std::nullopt);
    } else if (kw == "wire") {
      std::size_t j = 0, b = 0, s = 0;
      char side = 0;
      SlotRef r;
      if (!(ls >> j >> side >> b >> s >> r.layer >> r.block >> r.slot) || j == 0 || j > c.layers.size())
        throw fail("bad wire line");
      Layer& l = c.layers[j - 1];
      if (side != 'L' && side != 'R') throw fail("wire side must be L or R");
      auto& wires = side == 'L' ? l.left : l.right;
      const std::size_t idx = b * c.width + s;
      if (s >= c.width || idx >= wires.size()) throw fail("wire slot out of range");
      if (wires[idx]) throw fail("slot wired twice");
      wires[idx] = r;
    } else if (kw == "inputs") {
      std::size_t m = 0;
      if (!(ls >> m)) throw fail("bad inputs count");
      c.inputs.reserve(m);
    } else if (kw == "input") {
      std::string owner;
      if (!(ls >> owner)) throw fail("bad input line");
      InputBlock b{parse_owner(owner), {}};
      int64_t e = 0;
      while (ls >> e) b.entries.push_back(e);
      if (!ls.eof()) throw fail("bad input entry");
      c.inputs.push_back(std::move(b));
    } else if (kw == "outputs") {
      std::size_t m = 0;
      if (!(ls >> m)) throw fail("bad outputs count");
      c.outputs.reserve(m);
    } else if (kw == "output") {
      SlotRef r;
      if (!(ls >> r.layer >> r.block >> r.slot)) throw fail("bad output line");
      c.outputs.push_back(r);
    } else {
      throw fail("unknown keyword '" + kw + "'");
    }
  }
  if (!header) throw CircuitError("empty circuit file");
  validate(c);
  return c;
}

LayeredCircuit load_circuit(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CircuitError("cannot open circuit file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_circuit(ss.str());
}

// ---------------------------------------------------------------------------

LayeredCircuit random_circuit(std::mt19937_64& rng, const RandomCircuitOptions& opt) {
  LayeredCircuit c;
  c.width = opt.width;
  auto uniform = [&](uint64_t n) { return std::uniform_int_distribution<uint64_t>(0, n - 1)(rng); };
  auto place = [&](InputOwner owner, std::size_t count) {
    for (std::size_t i = 0; i < count; i += c.width) {
      InputBlock b{owner, std::vector<int64_t>(c.width, -1)};
      for (std::size_t s = 0; s < c.width && i + s < count; ++s) b.entries[s] = static_cast<int64_t>(i + s);
      c.inputs.push_back(std::move(b));
    }
  };
  place(InputOwner::Party0, opt.party0_inputs);
  place(InputOwner::Party1, opt.party1_inputs);
  if (opt.public_block) {
    InputBlock b{InputOwner::Public, {}};
    for (uint32_t s = 0; s < c.width; ++s) b.entries.push_back(static_cast<int64_t>(uniform(11)) - 5);
    c.inputs.push_back(std::move(b));
  }
  if (c.inputs.empty()) c.inputs.push_back({InputOwner::Public, std::vector<int64_t>(c.width, 1)});

  const uint32_t depth = 1 + static_cast<uint32_t>(uniform(opt.max_depth));
  std::bernoulli_distribution unwired(opt.unwired_fraction);
  for (uint32_t j = 1; j <= depth; ++j) {
    Layer l;
    l.op = static_cast<GateOp>(uniform(3));
    l.blocks = 1 + static_cast<uint32_t>(uniform(opt.max_blocks));
    const std::size_t slots = static_cast<std::size_t>(l.blocks) * c.width;
    for (auto* wires : {&l.left, &l.right}) {
      wires->resize(slots);
      for (auto& wref : *wires) {
        if (unwired(rng)) continue;
        SlotRef r;
        // bias toward the previous layer so depth actually accumulates
        r.layer = uniform(2) ? j - 1 : static_cast<uint32_t>(uniform(j));
        r.block = static_cast<uint32_t>(uniform(c.blocks_in(r.layer)));
        r.slot = static_cast<uint32_t>(uniform(c.width));
        wref = r;
      }
    }
    c.layers.push_back(std::move(l));
  }
  for (uint32_t b = 0; b < c.layers.back().blocks; ++b)
    for (uint32_t s = 0; s < c.width; ++s) c.outputs.push_back({depth, b, s});
  validate(c);
  return c;
}

}  // namespace ips2pc
