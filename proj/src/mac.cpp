#include "ips2pc/mac.hpp"

#include <map>
#include <string>

namespace ips2pc {

Fe mac_tag(const PrimeField& F, const MacKey& key, Fe x) { return F.add(F.mul(key.k1, x), key.k2); }

MacKey mac_keygen(const PrimeField& F, Prg& rng) {
  MacKey k;
  k.k1 = F.sample_nonzero(rng);
  k.k2 = F.sample(rng);
  return k;
}

MacInput mac_input(const PrimeField& F, std::span<const Fe> values, Prg& rng) {
  MacInput in;
  in.values.assign(values.begin(), values.end());
  for (Fe v : values) {
    in.keys.push_back(mac_keygen(F, rng));
    in.tags.push_back(mac_tag(F, in.keys.back(), v));
  }
  return in;
}

void validate_mac_input(const MacInput& in) {
  if (in.keys.size() != in.values.size() || in.tags.size() != in.values.size())
    throw MacError("MAC input has " + std::to_string(in.values.size()) + " values, " + std::to_string(in.keys.size()) +
                   " keys and " + std::to_string(in.tags.size()) + " tags");
  for (std::size_t i = 0; i < in.keys.size(); ++i)
    if (in.keys[i].k1 == Fe{0}) throw MacError("MAC key " + std::to_string(i) + " has k1 = 0");
}

std::vector<Fe> flatten(const MacInput& in) {
  validate_mac_input(in);
  std::vector<Fe> out = in.values;
  for (const auto& k : in.keys) out.push_back(k.k1);
  for (const auto& k : in.keys) out.push_back(k.k2);
  out.insert(out.end(), in.tags.begin(), in.tags.end());
  return out;
}

namespace {

using Slots = std::vector<std::optional<SlotRef>>;

// Appends input blocks holding `count` consecutive indices from `first`;
// returns the slot of each.
std::vector<SlotRef> place(LayeredCircuit& c, InputOwner owner, std::size_t first, std::size_t count) {
  std::vector<SlotRef> at;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % c.width == 0) c.inputs.push_back({owner, std::vector<int64_t>(c.width, -1)});
    c.inputs.back().entries[i % c.width] = static_cast<int64_t>(first + i);
    at.push_back({0, static_cast<uint32_t>(c.inputs.size() - 1), static_cast<uint32_t>(i % c.width)});
  }
  return at;
}

// Appends a layer computing left[i] op right[i] into slot i; returns the output slots.
std::vector<SlotRef> gate_layer(LayeredCircuit& c, GateOp op, const Slots& left, const Slots& right) {
  const std::size_t n = left.size();
  Layer l;
  l.op = op;
  l.blocks = static_cast<uint32_t>((n + c.width - 1) / c.width);
  l.left.resize(static_cast<std::size_t>(l.blocks) * c.width);
  l.right.resize(l.left.size());
  std::copy(left.begin(), left.end(), l.left.begin());
  std::copy(right.begin(), right.end(), l.right.begin());
  c.layers.push_back(std::move(l));
  const auto j = static_cast<uint32_t>(c.layers.size());
  std::vector<SlotRef> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({j, static_cast<uint32_t>(i / c.width), static_cast<uint32_t>(i % c.width)});
  return out;
}

Slots wires(const std::vector<SlotRef>& v) { return {v.begin(), v.end()}; }

}  // namespace

MacCircuit augment_with_mac(const LayeredCircuit& f) {
  validate(f);
  MacCircuit m;
  m.circuit = f;
  m.outputs = f.outputs.size();
  m.inputs[0] = f.input_count(InputOwner::Party0);
  m.inputs[1] = f.input_count(InputOwner::Party1);
  m.coins = f.input_count(InputOwner::Coin);
  LayeredCircuit& c = m.circuit;

  std::map<std::pair<InputOwner, int64_t>, SlotRef> where;
  for (uint32_t b = 0; b < f.inputs.size(); ++b)
    for (uint32_t s = 0; s < f.width; ++s)
      if (f.inputs[b].entries[s] >= 0) where[{f.inputs[b].owner, f.inputs[b].entries[s]}] = {0, b, s};

  std::vector<SlotRef> x, k1, k2, tag;
  for (int p = 0; p < 2; ++p) {
    const auto owner = p == 0 ? InputOwner::Party0 : InputOwner::Party1;
    const std::size_t n = m.inputs[p];
    for (std::size_t i = 0; i < n; ++i) x.push_back(where.at({owner, static_cast<int64_t>(i)}));
    for (auto [dst, first] : {std::pair{&k1, n}, {&k2, 2 * n}, {&tag, 3 * n}}) {
      auto at = place(c, owner, first, n);
      dst->insert(dst->end(), at.begin(), at.end());
    }
  }
  const std::size_t total = x.size();
  if (total == 0) throw MacError("circuit has no party inputs to authenticate");
  const auto r = place(c, InputOwner::Coin, m.coins, total);

  const auto kx = gate_layer(c, GateOp::Mul, wires(k1), wires(x));
  const auto expected = gate_layer(c, GateOp::Add, wires(kx), wires(k2));
  const auto diff = gate_layer(c, GateOp::Sub, wires(tag), wires(expected));
  auto terms = gate_layer(c, GateOp::Mul, wires(r), wires(diff));
  while (terms.size() > 1) {
    Slots left, right;
    for (std::size_t i = 0; i < terms.size(); i += 2) {
      left.push_back(terms[i]);
      right.push_back(i + 1 < terms.size() ? std::optional<SlotRef>(terms[i + 1]) : std::nullopt);
    }
    terms = gate_layer(c, GateOp::Add, left, right);
  }
  c.outputs.push_back(terms.front());
  validate(c);
  return m;
}

Fe mac_flag(const PrimeField& F, const MacCircuit& m, const MacInput& x, const MacInput& y,
            std::span<const Fe> coins) {
  if (coins.size() < m.coins + m.inputs[0] + m.inputs[1]) throw MacError("too few flag coefficients");
  Fe flag = F.zero();
  std::size_t i = m.coins;
  for (const MacInput* in : {&x, &y})
    for (std::size_t j = 0; j < in->values.size(); ++j) {
      const Fe d = F.sub(in->tags[j], mac_tag(F, in->keys[j], in->values[j]));
      flag = F.add(flag, F.mul(coins[i++], d));
    }
  return flag;
}

FPrimeResult run_f_prime(const CodeSpec& spec, const Schedule& s, const MacCircuit& m, const MacInput& x,
                         const MacInput& y, const LocalRunOptions& opt) {
  if (x.values.size() != m.inputs[0] || y.values.size() != m.inputs[1])
    throw MacError("MAC input lengths do not match the circuit");
  const auto fx = flatten(x), fy = flatten(y);
  FPrimeResult res;
  res.run = run_local(spec, s, fx, fy, opt);
  if (!res.run.accepted()) return res;
  const auto& out = res.run.party[0].outputs;
  res.flag = out.at(m.outputs);
  res.accepted = res.flag == Fe{0};
  if (res.accepted) res.outputs.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m.outputs));
  return res;
}

}  // namespace ips2pc
