"""Epsilon sweeps of the fiber errors and log-log rate fits."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .coefficients import coercivity_constants
from .config import RunConfig, fmt
from .errors import THEOREM_TAGS, fiber_errors
from .fiber import FiberBasis, FiberEngine, FiberError, Quasimomentum
from .geometry import DomainGeometry

# global error = eps**power * fiber error (scaling plus Gelfand transform)
GLOBAL_POWER = {"T1_resolvent": 2, "T1_D2": 1, "T2_D1corr": 1, "T3_full": 2}
EXPECTED_RATE = {"T1_resolvent": 1, "T1_D2": 1, "T2_D1corr": 1, "T3_full": 2}
SLOPE_WINDOWS = {"T1_resolvent": (0.9, 1.3), "T1_D2": (0.9, 1.3), "T2_D1corr": (0.9, 1.3),
                 "T3_full": (1.8, 2.4)}
DEGENERATE_TOL = 1e-10
SHARPNESS_BAND = 4.0
MIN_EPS_POINTS = 4


class SweepError(RuntimeError):
    pass


def k_grid(geometry: DomainGeometry, eps: float, npoints: int = 16) -> np.ndarray:
    """Symmetric quasimomentum grid: +-r * geomspace(eps/4, 1) along the longest period axis.

    r is the inscribed radius of the Brillouin zone, so the outermost points lie on the
    zone boundary and the innermost at |k| ~ eps*r/4, where |tau| ~ eps dominates.
    """
    if npoints < 2 or npoints % 2:
        raise ValueError("the k grid needs an even number of points >= 2")
    r = geometry.lattice().brillouin_radius
    t = r * np.geomspace(eps / 4, 1.0, npoints // 2)
    direction = np.zeros(geometry.d1)
    direction[int(np.argmax(geometry.period))] = 1.0
    radii = np.concatenate([-t[::-1], t])
    return radii[:, None] * direction[None, :]


def fit_slope(eps, errors) -> tuple[float, float, float]:
    """OLS fit of log(error) = slope*log(eps) + intercept; returns (slope, intercept, rms residual)."""
    x = np.log(np.asarray(eps, float))
    y = np.log(np.asarray(errors, float))
    if x.size < MIN_EPS_POINTS:
        raise SweepError(f"rate fit needs at least {MIN_EPS_POINTS} eps values, got {x.size}")
    X = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


@dataclass(frozen=True)
class ErrorSample:
    tag: str
    eps: float
    k: tuple[float, ...]
    fiber_error: float
    global_error: float


@dataclass
class TheoremFit:
    tag: str
    eps: list[float]
    errors: list[float]
    k_argmax: list[tuple[float, ...]]
    window: tuple[float, float]
    slope: float | None = None
    intercept: float | None = None
    residual: float | None = None
    status: str = "pending"

    @property
    def passed(self) -> bool:
        return self.status in ("pass", "degenerate-zero", "not-applicable")


@dataclass
class RateReport:
    samples: list[ErrorSample]
    fits: dict[str, TheoremFit]
    warnings: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.fits.values())


def tags_for(geometry: DomainGeometry) -> tuple[str, ...]:
    return tuple(t for t in THEOREM_TAGS if geometry.d2 > 0 or t != "T1_D2")


# workers -----------------------------------------------------------------------------------------

_ENGINE: FiberEngine | None = None


def _make_engine(config: RunConfig) -> FiberEngine:
    p = config.params
    basis = FiberBasis(config.geometry, p.N1, p.N2)
    engine = FiberEngine(config.coefficients, basis, p.mu)
    engine.adjoint  # build eagerly so every worker does identical work up front
    return engine


def _init_worker(config: RunConfig) -> None:
    global _ENGINE
    with threadpool_limits(1):
        _ENGINE = _make_engine(config)


def _task_seed(seed: int, ie: int, ik: int) -> int:
    return int(np.random.SeedSequence([seed, ie, ik]).generate_state(1)[0])


def _synthetic_errors(tags, eps: float) -> dict[str, float]:
    """Test hook: exact power laws global = eps**rate, independent of k."""
    return {t: eps ** (EXPECTED_RATE[t] - GLOBAL_POWER[t]) for t in tags}


def _run_task(task) -> tuple[int, int, dict[str, float]]:
    ie, ik, eps, k, seed, tags, synthetic = task
    if synthetic:
        return ie, ik, _synthetic_errors(tags, eps)
    with threadpool_limits(1):
        try:
            fs = _ENGINE.fiber(Quasimomentum(tuple(k), eps))
            errs = fiber_errors(fs, _task_seed(seed, ie, ik), tags)
        except (FiberError, np.linalg.LinAlgError) as exc:
            raise SweepError(f"fiber failure at eps={fmt(eps)}, k={[fmt(v) for v in k]}: {exc}") from exc
    return ie, ik, errs


def sweep(config: RunConfig, eps_list=None, jobs: int | None = None) -> RateReport:
    """Evaluate all theorem errors on the (eps, k) grid and fit the rates."""
    p = config.params
    eps_list = [float(e) for e in (eps_list if eps_list is not None else p.eps)]
    if len(eps_list) < MIN_EPS_POINTS:
        raise SweepError(f"need at least {MIN_EPS_POINTS} eps values, got {len(eps_list)}")
    jobs = p.jobs if jobs is None else jobs
    g = config.geometry
    tags = tags_for(g)
    grids = [k_grid(g, e, p.k_points) for e in eps_list]
    tasks = [(ie, ik, e, tuple(float(v) for v in k), p.seed, tags, p.synthetic)
             for ie, e in enumerate(eps_list) for ik, k in enumerate(grids[ie])]
    if p.synthetic:
        results = [_run_task(t) for t in tasks]
    elif jobs <= 1:
        _init_worker(config)
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(config,)) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=1))
    results.sort(key=lambda r: (r[0], r[1]))
    samples = []
    for ie, ik, errs in results:
        e = eps_list[ie]
        k = tuple(float(v) for v in grids[ie][ik])
        for t in tags:
            samples.append(ErrorSample(t, e, k, errs[t], e ** GLOBAL_POWER[t] * errs[t]))
    report = RateReport(samples, {}, meta={
        "N1": p.N1, "N2": p.N2, "k_points": p.k_points, "seed": p.seed,
        "mu": None if p.synthetic else [resolve_mu(config).real, resolve_mu(config).imag],
        "synthetic": bool(p.synthetic), "eps": eps_list})
    _fit_all(report, eps_list, tags)
    if g.d2 == 0:
        report.fits["T1_D2"] = TheoremFit("T1_D2", [], [], [], SLOPE_WINDOWS["T1_D2"],
                                          status="not-applicable")
    return report


def resolve_mu(config: RunConfig) -> complex:
    if config.params.mu is not None:
        return complex(config.params.mu)
    return coercivity_constants(config.coefficients).mu


def _fit_all(report: RateReport, eps_list: list[float], tags) -> None:
    for t in tags:
        errors, argmax = [], []
        for e in eps_list:
            rows = [s for s in report.samples if s.tag == t and s.eps == e]
            best = max(rows, key=lambda s: s.global_error)
            errors.append(best.global_error)
            argmax.append(best.k)
        fit = TheoremFit(t, list(eps_list), errors, argmax, SLOPE_WINDOWS[t])
        if max(errors) <= DEGENERATE_TOL:
            fit.status = "degenerate-zero"
        elif min(errors) <= 0:
            fit.status = "fail"
        else:
            fit.slope, fit.intercept, fit.residual = fit_slope(eps_list, errors)
            lo, hi = fit.window
            fit.status = "pass" if lo <= fit.slope <= hi else "fail"
        report.fits[t] = fit
    t1 = report.fits.get("T1_resolvent")
    if t1 is not None and t1.status not in ("degenerate-zero",):
        ratios = [err / e for err, e in zip(t1.errors, t1.eps)]
        if min(ratios) <= 0 or max(ratios) / min(ratios) > SHARPNESS_BAND:
            report.warnings.append(
                "sharpness witness: T1 error / eps varies by more than a factor "
                f"{fmt(SHARPNESS_BAND)} across the sweep")


# serialisation -------------------------------------------------------------------------------------


def _json_value(value, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            return "null"
        text = format(v, ".17g")
        return text if any(ch in text for ch in ".en") else text + ".0"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f'{pad}{_json_value(str(k), indent, level + 1)}: {_json_value(v, indent, level + 1)}'
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in value):
            return "[" + ", ".join(_json_value(v, indent, level + 1) for v in value) + "]"
        items = [pad + _json_value(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps_json(value, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _json_value(value, indent, 0) + "\n"


def report_dict(report: RateReport) -> dict:
    theorems = {}
    for t, f in report.fits.items():
        theorems[t] = {
            "samples": [{"eps": e, "error": err, "k_argmax": list(k)}
                        for e, err, k in zip(f.eps, f.errors, f.k_argmax)],
            "slope": f.slope, "intercept": f.intercept, "residual": f.residual,
            "window": list(f.window), "status": f.status, "pass": f.passed,
        }
    return {"meta": report.meta, "theorems": theorems, "warnings": list(report.warnings),
            "pass": report.passed}


def report_csv(report: RateReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theorem", "eps", "k", "fiber_error", "global_error"])
    for s in report.samples:
        w.writerow([s.tag, fmt(s.eps), ";".join(fmt(v) for v in s.k), fmt(s.fiber_error),
                    fmt(s.global_error)])
    return buf.getvalue()
