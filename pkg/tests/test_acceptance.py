"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records a one-line verdict (printed in the terminal summary) before asserting.
"""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from cylhom.cli import main
from cylhom.effective import homogenize, lower_bound_check
from cylhom.errors import THEOREM_TAGS, fiber_errors, uniform_bounds
from cylhom.fiber import Quasimomentum, adjoint_crosscheck, build_engine, identity_residual_U, identity_residual_V
from cylhom.rates import k_grid, sweep

from conftest import ACCEPTANCE, CONFIGS, config
from fields import UNIT, const, matrix, sin_field

SWEEP_EPS = [2.0**-j for j in range(2, 7)]


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, detail


def test_criterion_1_effective_exactness(ref1):
    start = time.perf_counter()
    _, eff = homogenize(ref1, (64, 12))
    elapsed = time.perf_counter() - start
    err = abs(eff.A0.coefficient((0, 0))[0, 0] - np.sqrt(3))
    expected = matrix([[const(UNIT, np.sqrt(3)), const(UNIT, 0.0)],
                       [const(UNIT, 0.0), 1 + sin_field(UNIT, 1, 0.5)]])
    full = eff.A0.max_abs_difference(expected)
    record(1, err <= 1e-8 and full <= 1e-8 and elapsed < 5,
           f"|A0_11 - sqrt3| = {err:.2e}, max entry error {full:.2e}, {elapsed:.2f} s")


def test_criterion_2_lower_bound_margin():
    margins = {}
    for name in ("ref1", "coupled", "stress", "constant", "identity", "synthetic", "ref1_small"):
        cfg = config(name)
        p = cfg.params
        _, eff = homogenize(cfg.coefficients, (p.N1,) * cfg.geometry.d1 + (p.N2,) * cfg.geometry.d2,
                            certify=False)
        margins[name] = lower_bound_check(eff, cfg.coefficients, enforce=False).margin
    worst = min(margins.values())
    detail = ", ".join(f"{k} {v:.2e}" for k, v in margins.items())
    record(2, worst >= -1e-10, f"min margin {worst:.2e} ({detail})")


def test_criterion_3_identity_residuals(ref1, stress):
    fs = build_engine(ref1, 12, 12).fiber(Quasimomentum((0.1,), 0.25))
    ref = max(identity_residual_U(fs), identity_residual_V(fs))
    start = time.perf_counter()
    res = []
    for N in (8, 16, 32):
        f = build_engine(stress, N, N).fiber(Quasimomentum((0.1,), 0.25))
        res.append(max(identity_residual_U(f), identity_residual_V(f)))
    elapsed = time.perf_counter() - start
    ratios = [a / b for a, b in zip(res, res[1:])]
    ok = ref <= 1e-8 and all(r >= 4 for r in ratios) and elapsed < 60
    record(3, ok, f"REF1 {ref:.2e}; stress N=8,16,32 residuals {[f'{r:.2e}' for r in res]}, "
                  f"ratios {[f'{r:.2f}' for r in ratios]}, {elapsed:.1f} s")


def test_criterion_4_uniform_bounds():
    bands = {}
    for name in ("ref1", "coupled"):
        eng = build_engine(config(name).coefficients, 6, 6)
        vals: dict[str, list[float]] = {}
        for eps in SWEEP_EPS:
            for k in k_grid(UNIT, eps, 16):
                for key, v in uniform_bounds(eng.fiber(Quasimomentum(tuple(k), eps))).items():
                    vals.setdefault(key, []).append(v)
        for key, v in vals.items():
            bands[f"{name}:{key}"] = max(v) / min(v)
    worst = max(bands, key=bands.get)
    record(4, bands[worst] <= 100, f"largest max/min {bands[worst]:.2f} ({worst}); "
                                   f"{len(bands)} quantities checked")


def test_criterion_5_rate_reproduction(tmp_path, capsys):
    start = time.perf_counter()
    code = main(["verify", "--config", str(CONFIGS / "coupled.cfg"), "--out", str(tmp_path)])
    elapsed = time.perf_counter() - start
    capsys.readouterr()
    data = json.loads((tmp_path / "report.json").read_text())
    slopes = {t: data["theorems"][t]["slope"] for t in THEOREM_TAGS}
    n_samples = len((tmp_path / "report.csv").read_text().splitlines()) - 1
    ok = code == 0 and data["pass"] and elapsed < 600 and n_samples == 4 * 5 * 16
    record(5, ok, "slopes " + ", ".join(f"{t} {s:.3f}" for t, s in slopes.items())
           + f"; N1 = N2 = 24, {elapsed:.0f} s")


def test_criterion_6_symbol_tail(ref1, coupled):
    r = UNIT.lattice().brillouin_radius
    ks = r * np.geomspace(1, 8, 12)

    def scaled(c):
        eng = build_engine(c, 8, 8)
        return np.array([np.linalg.norm(eng.symbol_L(k), 2) * k for k in ks])

    ref_vals = scaled(ref1)
    coup_vals = scaled(coupled)
    coup_ratio = coup_vals.max() / coup_vals.min()
    if ref_vals.max() <= 1e-12:
        # L vanishes identically on REF1 (odd-in-k cancellation); the band holds trivially
        ref_text = f"REF1 degenerate (max {ref_vals.max():.1e}, L = 0)"
        ref_ok = True
    else:
        ref_ratio = ref_vals.max() / ref_vals.min()
        ref_text = f"REF1 max/min {ref_ratio:.2f}"
        ref_ok = ref_ratio <= 20
    record(6, ref_ok and coup_ratio <= 20, f"{ref_text}; coupled max/min {coup_ratio:.2f}")


def test_criterion_7_degenerate_exactness(constant):
    eng = build_engine(constant, 4, 8)
    worst, nonzero = 0.0, 0
    for eps in SWEEP_EPS:
        for k in k_grid(UNIT, eps, 16):
            fs = eng.fiber(Quasimomentum(tuple(k), eps))
            worst = max(worst, max(fiber_errors(fs).values()))
            nonzero += int(np.count_nonzero(fs.K) + np.count_nonzero(fs.L)
                           + np.count_nonzero(fs.K_plus) + np.count_nonzero(fs.L_plus))
    record(7, worst <= 1e-10 and nonzero == 0,
           f"max error {worst:.2e} over 80 fibers; nonzero K/L entries {nonzero}")


def test_criterion_8_adjoint_crosscheck():
    worst = {}
    for name in ("ref1", "coupled", "stress", "constant", "identity"):
        eng = build_engine(config(name).coefficients, 8, 8)
        w = 0.0
        for tau in (Quasimomentum((0.1,), 0.25), Quasimomentum((-2.9,), 0.03125),
                    Quasimomentum((1.3,), 1.0)):
            fs = eng.fiber(tau)
            w = max(w, max(adjoint_crosscheck(fs).values()))
            other = eng.adjoint.fiber(tau)
            # L of the adjoint problem against the constructed L+
            size = np.linalg.norm(fs.L_plus_block)
            diff = np.linalg.norm(other.L_block - fs.L_plus_block)
            w = max(w, diff / size if size > 0 else diff)
        worst[name] = w
    top = max(worst.values())
    record(8, top <= 1e-10, "max relative " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_9_determinism(tmp_path, capsys):
    outputs = []
    for jobs in (1, 8):
        out = tmp_path / f"jobs{jobs}"
        code = main(["verify", "--config", str(CONFIGS / "ref1_small.cfg"), "--out", str(out),
                     "--jobs", str(jobs)])
        outputs.append((code, (out / "report.json").read_bytes(), (out / "report.csv").read_bytes()))
    capsys.readouterr()
    same = outputs[0] == outputs[1]
    record(9, same and outputs[0][0] == 0,
           f"report.json {'identical' if outputs[0][1] == outputs[1][1] else 'DIFFERENT'} "
           f"across --jobs 1 and --jobs 8 ({len(outputs[0][1])} bytes)")
