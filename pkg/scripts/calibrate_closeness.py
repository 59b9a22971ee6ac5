#!/usr/bin/env python3
"""Grid-search the closeness tester multipliers and freeze the winners.

The closeness statistic draws Poissonized count vectors X, Y at per-stream
rate lambda = C_close * M * sqrt(b) / eps^2 and rejects a repetition when
Z = sum (X_i - Y_i)^2 - X_i - Y_i exceeds C_thr * lambda^2 eps^2 / M. This
script measures the per-repetition error of that rule over a grid of
(C_close, C_thr) on matched null/alternative instances:

  null: p = q = uniform on [M]
  alt:  p = uniform, q = uniform +- 2 eps / M alternating, so tv(p, q) = eps
        and ||p - q||_2^2 = 4 eps^2 / M (the extremal spread pair)

with M in {10, 50, 200}, eps in {0.1, 0.3}, and the tight norm bound
b = 1/M (= min(||p||_2^2, ||q||_2^2) exactly). A combination passes when
every cell's per-repetition error is below 1/3. Among passers, the winner is
the smallest C_close whose worst error also clears a robustness buffer
(<= 0.25; closeness sample cost is linear in C_close, so this is the cheapest
point that is not a statistical coin flip away from the bar), then the C_thr
with the widest margin.

Writes calibration.json next to pyproject.toml and prints the chosen pair.
The chosen values are frozen as EstimatorConfig defaults.
"""

from __future__ import annotations

import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from augtest.domain import Rng
from augtest.estimators import EstimatorConfig, closeness_params

SEED = 20260814
TRIALS = 4000
ERROR_BAR = 1.0 / 3.0
ROBUST_BAR = 0.25
SAMPLE_MULTS = [1.0, 2.0, 3.0, 4.0, 6.0]
THRESHOLD_MULTS = [0.5, 0.75, 1.0, 1.25, 1.5, 2.0]
SIZES = [10, 50, 200]
EPSILONS = [0.1, 0.3]


def spread_pair(M: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Uniform p and the alternating perturbation q with tv(p, q) = eps."""
    p = np.full(M, 1.0 / M)
    signs = np.where(np.arange(M) % 2 == 0, 1.0, -1.0)
    q = p + signs * (2.0 * eps / M)
    assert q.min() > 0 and abs(q.sum() - 1.0) < 1e-12
    assert abs(0.5 * np.abs(p - q).sum() - eps) < 1e-12
    return p, q


def z_samples(p: np.ndarray, q: np.ndarray, lam: float, trials: int, rng: Rng) -> np.ndarray:
    """`trials` independent draws of the per-repetition statistic Z."""
    x = rng.split(0).gen.poisson(lam * p, size=(trials, p.size)).astype(np.float64)
    y = rng.split(1).gen.poisson(lam * q, size=(trials, q.size)).astype(np.float64)
    d = x - y
    return (d * d - x - y).sum(axis=1)


def main() -> int:
    root = pathlib.Path(__file__).resolve().parents[1]
    rng = Rng(SEED)
    cells = [
        (M, eps, case)
        for M in SIZES
        for eps in EPSILONS
        for case in ("null", "alt")
    ]

    results = []
    # Z's law depends on C_close and the cell only; thresholds are linear in
    # C_thr, so one batch of Z draws serves the whole threshold row.
    for ci, c_close in enumerate(SAMPLE_MULTS):
        cell_z = {}
        cell_lam_thr = {}
        for ki, (M, eps, case) in enumerate(cells):
            cfg = EstimatorConfig(closeness_sample_mult=c_close, closeness_threshold_mult=1.0)
            lam, thr_unit = closeness_params(M, 1.0 / M, eps, cfg)
            p, q = spread_pair(M, eps)
            if case == "null":
                q = p
            cell_z[(M, eps, case)] = z_samples(p, q, lam, TRIALS, rng.split(ci).split(ki))
            cell_lam_thr[(M, eps, case)] = (lam, thr_unit)
        for c_thr in THRESHOLD_MULTS:
            errors = {}
            for (M, eps, case), z in cell_z.items():
                thr = c_thr * cell_lam_thr[(M, eps, case)][1]
                rej = float(np.mean(z > thr))
                errors[f"M={M},eps={eps},{case}"] = rej if case == "null" else 1.0 - rej
            max_err = max(errors.values())
            results.append(
                {
                    "closeness_sample_mult": c_close,
                    "closeness_threshold_mult": c_thr,
                    "max_error": max_err,
                    "pass": bool(max_err < ERROR_BAR),
                    "errors": errors,
                }
            )

    passing = [r for r in results if r["pass"]]
    if not passing:
        print("no grid point met the per-repetition error bar", file=sys.stderr)
        return 1
    robust = [r for r in passing if r["max_error"] <= ROBUST_BAR] or passing
    best_close = min(r["closeness_sample_mult"] for r in robust)
    shortlist = [r for r in robust if r["closeness_sample_mult"] == best_close]
    chosen = max(
        shortlist,
        key=lambda r: (ERROR_BAR - r["max_error"], -r["closeness_threshold_mult"]),
    )

    out = {
        "seed": SEED,
        "trials_per_cell": TRIALS,
        "criterion": "per-repetition error < 1/3 on every null/alternative cell",
        "norm_bound": "b = 1/M (exactly min(||p||_2^2, ||q||_2^2))",
        "grid": {
            "closeness_sample_mult": SAMPLE_MULTS,
            "closeness_threshold_mult": THRESHOLD_MULTS,
            "M": SIZES,
            "eps": EPSILONS,
        },
        "chosen": {
            "closeness_sample_mult": chosen["closeness_sample_mult"],
            "closeness_threshold_mult": chosen["closeness_threshold_mult"],
            "max_error": chosen["max_error"],
            "margin": ERROR_BAR - chosen["max_error"],
            "errors": chosen["errors"],
        },
        "results": results,
    }
    path = root / "calibration.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"wrote {path}")
    print(
        "chosen: closeness_sample_mult="
        f"{chosen['closeness_sample_mult']}, closeness_threshold_mult="
        f"{chosen['closeness_threshold_mult']} (max per-rep error "
        f"{chosen['max_error']:.4f})"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
