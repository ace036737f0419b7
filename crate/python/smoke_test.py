#!/usr/bin/env python3
"""Smoke test for the qonline_py extension module.

Builds nothing itself: locate the compiled cdylib under target/, stage it as
an importable module, and exercise the main surface. Run after

    cargo build --release -p qonline-py

from the repository root:

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def stage_module() -> Path:
    candidates = [
        REPO_ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libqonline_py.so", "qonline_py.so", "libqonline_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "qonline_py cdylib not found; run `cargo build --release -p qonline-py` first"
        )
    stage = Path(tempfile.mkdtemp(prefix="qonline_py_"))
    shutil.copy2(built, stage / "qonline_py.so")
    return stage


sys.path.insert(0, str(stage_module()))

import qonline_py as q  # noqa: E402

LN2 = math.log(2.0)


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


# Bound calculators against the closed forms.
approx(q.theoretical_regret_bound("mmw", 100, 1), 2.0 * math.sqrt(LN2 * 100.0))
approx(q.theoretical_regret_bound("rftl", 100, 1), 2.0 * math.sqrt(2.0 * LN2 * 100.0))
approx(q.mistake_bound("mmw", 2, 0.1), 36.0 * LN2 * 2.0 / 0.01)
approx(q.serial_encoding_max_bits(3, 1.0), 3.0)
assert q.rac_bound_check(4, 4, 0.0)
assert not q.rac_bound_check(1, 10, 0.0)

# States and measurements.
mixed = q.DensityMatrix.maximally_mixed(2)
approx(mixed.entropy(), 2.0 * LN2)
proj = q.Measurement.basis_projector(1, 0)
half = q.DensityMatrix.maximally_mixed(1)
approx(q.born_probability(proj, half), 0.5)

state, prob = q.postselect(proj, half)
approx(prob, 0.5)
approx(q.born_probability(proj, state), 1.0)

re, im = mixed.to_lists()
rebuilt = q.DensityMatrix.from_lists(re, im)
approx(rebuilt.trace_distance(mixed), 0.0, tol=1e-12)

# Determinism of the seeded generators.
a = q.DensityMatrix.random(1, 42)
b = q.DensityMatrix.random(1, 42)
approx(a.trace_distance(b), 0.0, tol=1e-15)

# A small online-learning run stays under its regret bound.
T, n, seed = 200, 1, 7
hidden = q.DensityMatrix.random(n, seed)
learner = q.Learner(n, "mmw", T)
regret = 0.0
for t in range(T):
    e = q.Measurement.random(n, 10_000 + t)
    truth = q.born_probability(e, hidden)
    prediction = learner.step(e, truth, "l1")
    regret += abs(prediction - truth)
bound = q.theoretical_regret_bound("mmw", T, n)
assert regret <= bound + 1e-6, f"regret {regret} above bound {bound}"
assert learner.t == T and learner.update_count == T

# Mistake-filtered stepping only updates on large errors.
learner = q.Learner(1, "mmw", 100)
_, updated = learner.mistake_step(q.Measurement.identity(1), 1.0, 0.3)
assert not updated  # prediction 1.0 matches b exactly
_, updated = learner.mistake_step(proj, 1.0, 0.3)
assert updated  # |0.5 - 1.0| > 0.2

# Union bound on near-certain measurements.
phi = q.DensityMatrix.random(2, 3)
ident = q.Measurement.identity(2)
success, dist, ok = q.union_bound_check(phi, [ident, ident, ident])
approx(success, 1.0)
approx(dist, 0.0, tol=1e-9)
assert ok

# The JSON-config harness, matching the CLI.
summary = json.loads(
    q.run_experiment(
        json.dumps(
            {
                "kind": "regret",
                "n": 1,
                "t": 50,
                "seed": 42,
                "variant": "mmw",
                "loss": "l1",
                "feedback": {"mode": "exact"},
                "adversary": "random",
            }
        )
    )
)
assert summary["kind"] == "regret"
assert summary["pass"] is True
assert summary["regret"] <= summary["bound"]

print("qonline_py smoke test passed")
