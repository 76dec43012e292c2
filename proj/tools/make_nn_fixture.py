#!/usr/bin/env python3
"""Build the committed NN fixture: a small quadratic-activation MLP trained on
synthetic two-party data, quantized, plus a labelled test set.

    python3 tools/make_nn_fixture.py --out tests/data
"""
import argparse
import csv
import json
import math
from pathlib import Path

import numpy as np

P = 2**64 - 2**32 + 1
PARTY0 = ["age", "gender", "education", "nscore", "escore", "oscore", "ascore", "cscore"]
PARTY1 = ["cannabis", "ecstasy", "mushrooms", "ketamine"]
HIDDEN = 20


def make_data(rng, n):
    x = rng.uniform(-1.0, 1.0, size=(n, len(PARTY0) + len(PARTY1)))
    # a rule mixing both parties' columns, with label noise
    score = 0.9 * x[:, 8] + 0.6 * x[:, 9] * x[:, 3] + 0.5 * x[:, 0] ** 2 - 0.4 * x[:, 7] + 0.3 * x[:, 10] - 0.1
    y = (score + 0.15 * rng.standard_normal(n) > 0).astype(int)
    return np.round(x, 3), y


def forward(params, x):
    acts = [x]
    a = x
    for i, (w, b) in enumerate(params):
        z = a @ w.T + b
        a = z * z if i + 1 < len(params) else z
        acts.append((z, a))
    return acts


def train(rng, x, y, steps=3000, lr=0.01):
    sizes = [x.shape[1], HIDDEN, HIDDEN, 2]
    params = [
        (rng.normal(0, 0.5 / math.sqrt(i), size=(o, i)), np.zeros(o)) for i, o in zip(sizes[:-1], sizes[1:])
    ]
    m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    onehot = np.eye(2)[y]
    for t in range(1, steps + 1):
        acts = forward(params, x)
        logits = acts[-1][1]
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        grad = (e / e.sum(axis=1, keepdims=True) - onehot) / len(x)
        grads = []
        for i in reversed(range(len(params))):
            w, _ = params[i]
            z, _ = acts[i + 1]
            if i + 1 < len(params):
                grad = grad * 2 * z
            prev = acts[i] if i == 0 else acts[i][1]
            grads.append((grad.T @ prev, grad.sum(axis=0)))
            grad = grad @ w
        grads.reverse()
        for i, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
            (mw, mb), (vw, vb) = m[i], v[i]
            mw, mb = 0.9 * mw + 0.1 * gw, 0.9 * mb + 0.1 * gb
            vw, vb = 0.999 * vw + 0.001 * gw**2, 0.999 * vb + 0.001 * gb**2
            m[i], v[i] = (mw, mb), (vw, vb)
            c1, c2 = 1 - 0.9**t, 1 - 0.999**t
            params[i] = (
                w - lr * (mw / c1) / (np.sqrt(vw / c2) + 1e-8),
                b - lr * (mb / c1) / (np.sqrt(vb / c2) + 1e-8),
            )
    return params


def quantize(params, f):
    q = []
    for w, b in params:
        qw = np.round(w * 2**f).astype(np.int64)
        qb = np.round(b * 2**f).astype(np.int64)
        if np.abs(qw).max() > 127 or np.abs(qb).max() > 127:
            return None
        q.append((qw.tolist(), qb.tolist()))
    return q


def worst_magnitude(q, f, n_in):
    # interval bound over every intermediate, matching the circuit layout
    bound = [2**f] * n_in
    worst = max(bound)
    s = f
    for i, (w, b) in enumerate(q):
        z = [sum(abs(wj) * bj for wj, bj in zip(row, bound)) + abs(bo) * 2**s for row, bo in zip(w, b)]
        worst = max(worst, max(z))
        s += f
        if i + 1 < len(q):
            bound = [v * v for v in z]
            worst = max(worst, max(bound))
            s *= 2
    return worst


def infer(q, f, row):
    a = list(row)
    s = f
    for i, (w, b) in enumerate(q):
        z = [sum(wj * aj for wj, aj in zip(wr, a)) + bo * 2**s for wr, bo in zip(w, b)]
        s += f
        if i + 1 < len(q):
            a = [v * v for v in z]
            s *= 2
        else:
            a = z
    return max(range(len(a)), key=lambda k: (a[k], -k))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/data")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--test-rows", type=int, default=48)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    x_train, y_train = make_data(rng, 1500)
    x_test, y_test = make_data(rng, args.test_rows)
    params = train(rng, x_train, y_train)
    float_pred = forward(params, x_test)[-1][1].argmax(axis=1)
    float_acc = float((float_pred == y_test).mean())

    names = PARTY0 + PARTY1
    best = None
    for f in range(1, 9):
        q = quantize(params, f)
        if q is None or worst_magnitude(q, f, len(names)) > (P - 1) // 2:
            break
        best = (f, q)
    if best is None:
        raise SystemExit("no scale fits the field")
    f, q = best
    quant_pred = [infer(q, f, [round(v * 2**f) for v in row]) for row in x_test]
    quant_acc = float(np.mean(np.array(quant_pred) == y_test))

    model = {
        "layers": [
            {"rows": len(w), "cols": len(w[0]), "weights": [v for r in w for v in r], "bias": b} for w, b in q
        ],
        "scale_f": f,
        "feature_schema": [{"name": n, "party": 0 if n in PARTY0 else 1} for n in names],
        "input_range": 1.0,
        "metadata": {"float_acc": float_acc, "quant_acc": quant_acc, "synthetic": True, "seed": args.seed},
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "nn_model.json").write_text(json.dumps(model, indent=1) + "\n")
    with open(out / "nn_features.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(names + ["label"])
        for row, label in zip(x_test, y_test):
            wr.writerow([f"{v:.3f}" for v in row] + [int(label)])
    print(f"scale_f={f} float_acc={float_acc:.4f} quant_acc={quant_acc:.4f}")


if __name__ == "__main__":
    main()
