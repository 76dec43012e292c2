#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ips2pc/harness.hpp"

namespace py = pybind11;
using namespace ips2pc;

namespace {

PrimeField field_named(const std::string& name) {
  if (name == "goldilocks") return PrimeField::goldilocks();
  if (name == "toy") return PrimeField::toy();
  throw std::invalid_argument("unknown field '" + name + "' (known: goldilocks, toy)");
}

std::vector<Fe> lift(const PrimeField& F, const std::vector<int64_t>& v) {
  std::vector<Fe> out;
  for (auto x : v) out.push_back(F.from_i64(x));
  return out;
}

std::vector<int64_t> lower(const PrimeField& F, std::span<const Fe> v) {
  std::vector<int64_t> out;
  for (Fe x : v) out.push_back(F.to_signed(x));
  return out;
}

py::dict params_dict(const ProtocolParams& p) {
  py::dict d;
  d["n"] = p.n;
  d["k"] = p.k;
  d["w"] = p.w;
  d["t"] = p.t;
  d["e"] = p.e;
  d["sigma"] = p.sigma;
  d["kappa"] = p.kappa;
  d["s"] = p.s;
  return d;
}

ProtocolParams params_from(const py::dict& d) {
  ProtocolParams p;
  for (auto [k, v] : d) {
    const auto key = k.cast<std::string>();
    const auto val = v.cast<std::size_t>();
    if (key == "n") p.n = val;
    else if (key == "k") p.k = val;
    else if (key == "w") p.w = val;
    else if (key == "t") p.t = val;
    else if (key == "e") p.e = val;
    else if (key == "sigma") p.sigma = val;
    else if (key == "kappa") p.kappa = static_cast<unsigned>(val);
    else if (key == "s") p.s = static_cast<unsigned>(val);
    else throw std::invalid_argument("unknown parameter '" + key + "'");
  }
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-party computation over packed secret sharing";

  py::register_exception<ParamsError>(m, "ParamsError", PyExc_ValueError);
  py::register_exception<CircuitError>(m, "CircuitError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);

  m.def("field_modulus", [](const std::string& f) { return field_named(f).modulus(); });
  m.def("named_params", [](const std::string& name) { return params_dict(named_params(name)); });
  m.def("parse_params", [](const std::string& text) { return params_dict(parse_params(text)); });
  m.def(
      "select_params",
      [](std::size_t n, unsigned target_s, const std::string& f) {
        return params_dict(select_params(n, target_s, field_named(f)));
      },
      py::arg("n"), py::arg("target_s") = 40, py::arg("field") = "goldilocks");
  m.def(
      "param_violations",
      [](const py::dict& p, const std::string& f) { return param_violations(params_from(p), field_named(f)); },
      py::arg("params"), py::arg("field") = "goldilocks");
  m.def(
      "soundness",
      [](const py::dict& p, const std::string& f) {
        const auto pp = params_from(p);
        const auto F = field_named(f);
        py::dict d;
        d["outer"] = static_cast<double>(soundness_outer(pp, F));
        d["watchlist"] = static_cast<double>(soundness_watchlist(pp));
        d["log2_outer"] = log2_soundness_outer(pp, F);
        return d;
      },
      py::arg("params"), py::arg("field") = "goldilocks");

  m.def("circuit_info", [](const std::string& text) {
    const auto c = parse_circuit(text);
    py::dict d;
    d["width"] = c.width;
    d["depth"] = c.depth();
    d["mul_blocks"] = c.mul_blocks();
    d["inputs0"] = c.input_count(InputOwner::Party0);
    d["inputs1"] = c.input_count(InputOwner::Party1);
    d["outputs"] = c.outputs.size();
    return d;
  });
  m.def("normalize_circuit", [](const std::string& text) { return print_circuit(parse_circuit(text)); });
  m.def(
      "eval_plain",
      [](const std::string& text, const std::vector<int64_t>& x, const std::vector<int64_t>& y, const std::string& f) {
        const auto F = field_named(f);
        return lower(F, eval_plain(F, parse_circuit(text), lift(F, x), lift(F, y)));
      },
      py::arg("circuit"), py::arg("x"), py::arg("y"), py::arg("field") = "goldilocks");

  m.def(
      "bench",
      [](const std::string& text, const std::vector<int64_t>& x, const std::vector<int64_t>& y, const py::dict& p,
         const std::string& f, uint64_t seed) {
        const auto F = field_named(f);
        const auto c = parse_circuit(text);
        py::gil_scoped_release nogil;
        return to_json(bench(F, params_from(p), c, lift(F, x), lift(F, y), 1, seed));
      },
      py::arg("circuit"), py::arg("x"), py::arg("y"), py::arg("params"), py::arg("field") = "goldilocks",
      py::arg("seed") = 1);

  m.def(
      "run_experiment",
      [](const std::string& adversary, std::size_t trials, const py::dict& p, const std::string& f, uint64_t seed,
         const std::optional<std::string>& circuit) {
        const auto F = field_named(f);
        ExperimentConfig cfg;
        cfg.field = &F;
        cfg.params = params_from(p);
        cfg.adversary = parse_adversary(adversary);
        cfg.trials = trials;
        cfg.seed = seed;
        if (circuit) cfg.circuit = parse_circuit(*circuit);
        py::gil_scoped_release nogil;
        return to_json(run_adversary_experiment(cfg), cfg);
      },
      py::arg("adversary"), py::arg("trials"), py::arg("params"), py::arg("field") = "goldilocks",
      py::arg("seed") = 1, py::arg("circuit") = py::none());

  m.def("validate_model", [](const std::string& json_text) { return model_to_json(parse_model(json_text)); });
  m.def("infer_clear", [](const std::string& json_text, const std::vector<int64_t>& features) {
    const auto r = infer_clear(parse_model(json_text), features);
    return py::make_tuple(r.logits, r.predicted);
  });
  m.def("quantize_features", [](const std::string& json_text, const std::string& csv_text) {
    const auto t = parse_features(parse_model(json_text), csv_text);
    return py::make_tuple(t.rows, t.labels);
  });
  m.def(
      "infer_private",
      [](const std::string& json_text, const std::vector<std::vector<int64_t>>& rows, const py::dict& p,
         uint64_t seed) {
        const auto F = PrimeField::goldilocks();
        const auto model = parse_model(json_text);
        const auto pp = params_from(p);
        const auto cm = compile_to_circuit(model, F, rows.size(), static_cast<uint32_t>(pp.w));
        BenchReport r;
        {
          py::gil_scoped_release nogil;
          r = bench(F, pp, cm.circuit, circuit_inputs(F, model, rows, 0), circuit_inputs(F, model, rows, 1),
                    rows.size(), seed);
        }
        std::vector<std::vector<int64_t>> logits;
        if (r.accepted) logits = decode_logits(F, model, lift(F, r.outputs));
        return py::make_tuple(logits, to_json(r));
      },
      py::arg("model"), py::arg("rows"), py::arg("params"), py::arg("seed") = 1);
}
