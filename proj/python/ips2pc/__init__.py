"""Two-party computation over packed secret sharing.

Circuits and models travel as text (the circuit format and the model JSON);
reports come back as dicts.
"""

import json

from ._core import (
    CircuitError,
    ModelError,
    ParamsError,
    circuit_info,
    eval_plain,
    field_modulus,
    infer_clear,
    named_params,
    normalize_circuit,
    param_violations,
    parse_params,
    quantize_features,
    select_params,
    soundness,
    validate_model,
)
from . import _core

__all__ = [
    "CircuitError",
    "ModelError",
    "ParamsError",
    "bench",
    "circuit_info",
    "eval_plain",
    "field_modulus",
    "infer_clear",
    "infer_private",
    "named_params",
    "normalize_circuit",
    "param_violations",
    "parse_params",
    "quantize_features",
    "run_experiment",
    "select_params",
    "soundness",
    "validate_model",
]


def _params(params):
    return named_params(params) if isinstance(params, str) else dict(params)


def bench(circuit, x, y, params="toy-b", field="goldilocks", seed=1):
    """Honest two-party run of `circuit`; the report includes the outputs."""
    return json.loads(_core.bench(circuit, list(x), list(y), _params(params), field, seed))


def run_experiment(adversary, trials, params="toy-b", field="toy", seed=1, circuit=None):
    """Counts of aborts, silent corruptions and correct outputs."""
    return json.loads(_core.run_experiment(adversary, trials, _params(params), field, seed, circuit))


def infer_private(model_json, rows, params="nn", seed=1):
    """Logits per row from one batched protocol run, and the bench report."""
    logits, report = _core.infer_private(model_json, [list(r) for r in rows], _params(params), seed)
    return logits, json.loads(report)
