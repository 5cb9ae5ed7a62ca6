"""Command-line interface: validate | cell | effective | fibers | verify.

Exit codes: 0 success, 2 configuration error, 3 coercivity or sector violation,
4 solver failure, 5 rate gate failure (the report is still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .cell import CellSolveError
from .coefficients import CoercivityError, coercivity_constants, sector_contains
from .config import ConfigError, RunConfig, dump_field, fmt, load_config
from .effective import LowerBoundViolation, TruncationMismatch, homogenize
from .errors import uniform_bounds
from .fiber import (FiberBasis, FiberEngine, FiberError, Quasimomentum, SectorError,
                    adjoint_crosscheck, identity_residual_U, identity_residual_V)
from .rates import SweepError, dumps_json, k_grid, report_csv, report_dict, sweep

EXIT_OK, EXIT_CONFIG, EXIT_COERCIVITY, EXIT_SOLVER, EXIT_GATE = 0, 2, 3, 4, 5

# fiber operators written by ``fibers --dump``
DUMP_ROLES = ("A_mu", "A0_mu", "S", "T", "K", "L", "A_mu+", "A0_mu+", "S+", "T+", "K+", "L+")


def parse_mu(text: str) -> complex:
    try:
        re, im = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--mu expects RE,IM") from None
    return complex(re, im)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cylhom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("validate", "check the configuration and the coercivity hypothesis"),
        ("cell", "solve the cell problems and write N, M"),
        ("effective", "write the effective coefficients and the lower-bound margin"),
        ("fibers", "fiber diagnostics on the quasimomentum grid of the first eps"),
        ("verify", "full eps sweep; writes report.json and report.csv"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mu", type=parse_mu, default=None, help="spectral parameter RE,IM")
        if name == "fibers":
            p.add_argument("--dump", action="store_true",
                           help="also write raw fiber matrices at the first grid point")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        changes["jobs"] = args.jobs
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mu is not None:
        changes["mu"] = args.mu
    if not changes:
        return cfg
    return dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, **changes))


def _validate(cfg: RunConfig, out=print):
    data = coercivity_constants(cfg.coefficients)
    mu = cfg.params.mu if cfg.params.mu is not None else data.mu
    data = dataclasses.replace(data, mu=mu)
    out(f"c_star = {fmt(data.c_star)}")
    out(f"c_natural = {fmt(data.c_natural)}")
    out(f"C_flat = {fmt(data.C_flat)}")
    out(f"mu = {fmt(mu.real)} {fmt(mu.imag)}")
    out(f"sector S1: |Im z| <= {fmt(data.C_flat / data.c_star)} (Re z + {fmt(data.c_star + data.c_natural)})")
    if sector_contains(data, complex(mu), "S1"):
        raise CoercivityError(f"spectral parameter {fmt(mu.real)}{mu.imag:+.17g}i lies inside the sector S1")
    return data


def _engine(cfg: RunConfig) -> FiberEngine:
    p = cfg.params
    return FiberEngine(cfg.coefficients, FiberBasis(cfg.geometry, p.N1, p.N2), p.mu)


def cmd_validate(cfg: RunConfig, args) -> int:
    _validate(cfg)
    print("coercivity hypothesis: satisfied")
    return EXIT_OK


def _truncation(cfg: RunConfig) -> tuple[int, ...]:
    g, p = cfg.geometry, cfg.params
    return (p.N1,) * g.d1 + (p.N2,) * g.d2


def cmd_cell(cfg: RunConfig, args) -> int:
    _validate(cfg, out=lambda s: None)
    cell, _ = homogenize(cfg.coefficients, _truncation(cfg), certify=False)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "cell.txt").write_text(dump_field("N", cell.N.trimmed()) + "\n"
                                       + dump_field("M", cell.M.trimmed()))
    print(f"N support bandwidth = {list(cell.N.support_bandwidth())}")
    print(f"M support bandwidth = {list(cell.M.support_bandwidth())}")
    print(f"torus-derivative consistency = {fmt(cell.derivative_consistency)}")
    return EXIT_OK


def cmd_effective(cfg: RunConfig, args) -> int:
    _validate(cfg, out=lambda s: None)
    _, eff = homogenize(cfg.coefficients, _truncation(cfg))
    g = cfg.geometry
    args.out.mkdir(parents=True, exist_ok=True)
    text = "".join(dump_field(name, f) + "\n" for name, f in
                   [("A0", eff.A0), ("a1_0", eff.a1_0), ("a2_0", eff.a2_0), ("q0", eff.q0)])
    (args.out / "effective.txt").write_text(text)
    rows = ["entry,re,im"]
    mean = eff.A0.coef[(...,) + tuple(b for b in eff.A0.bandwidth)]
    for i in range(g.d):
        for j in range(g.d):
            z = complex(mean[i, j])
            print(f"A0[{i + 1},{j + 1}] x2-mean = {fmt(z.real)} {fmt(z.imag)}")
            rows.append(f"A0[{i + 1};{j + 1}],{fmt(z.real)},{fmt(z.imag)}")
    q0 = complex(eff.q0.coef[tuple(eff.q0.bandwidth)])
    print(f"q0 x2-mean = {fmt(q0.real)} {fmt(q0.imag)}")
    rows.append(f"q0,{fmt(q0.real)},{fmt(q0.imag)}")
    (args.out / "effective.csv").write_text("\n".join(rows) + "\n")
    print(f"lower-bound margin = {fmt(eff.certificate.margin)}")
    return EXIT_OK


def _dump_matrix(path: Path, matrix: np.ndarray) -> None:
    data = np.ascontiguousarray(matrix, dtype="<c16")
    path.with_suffix(".bin").write_bytes(data.tobytes())
    path.with_suffix(".json").write_text(json.dumps(
        {"dtype": "complex128-le", "order": "row-major", "shape": list(data.shape)}) + "\n")


def cmd_fibers(cfg: RunConfig, args) -> int:
    _validate(cfg, out=lambda s: None)
    engine = _engine(cfg)
    eps = cfg.params.eps[0]
    rows = []
    for i, k in enumerate(k_grid(cfg.geometry, eps, cfg.params.k_points)):
        fs = engine.fiber(Quasimomentum(tuple(k), eps))
        if i == 0 and getattr(args, "dump", False):
            dump_dir = args.out / "matrices"
            dump_dir.mkdir(parents=True, exist_ok=True)
            for role in DUMP_ROLES:
                _dump_matrix(dump_dir / role.replace("+", "_plus"), fs.operator(role).matrix)
        row = {"eps": eps, "k": list(k), "tau": fs.tau.tau_norm,
               "decomposition": fs.decomposition_residual(),
               "intertwining": fs.intertwining_residual(),
               "identity_U": identity_residual_U(fs), "identity_V": identity_residual_V(fs),
               "adjoint": adjoint_crosscheck(fs),
               "bounds": uniform_bounds(fs, cfg.params.seed)}
        rows.append(row)
        print(f"k = {fmt(k[0])}: U {fmt(row['identity_U'])}  V {fmt(row['identity_V'])}  "
              f"decomposition {fmt(row['decomposition'])}")
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "fibers.json").write_text(dumps_json({"mu": [engine.mu.real, engine.mu.imag],
                                                      "fibers": rows}))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    _validate(cfg, out=lambda s: None)
    _engine_check(cfg)
    start = time.perf_counter()
    report = sweep(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.json").write_text(dumps_json(report_dict(report)))
    (args.out / "report.csv").write_text(report_csv(report))
    for tag, fit in report.fits.items():
        slope = "-" if fit.slope is None else f"{fit.slope:.3f}"
        print(f"{tag}: slope {slope} window [{fit.window[0]}, {fit.window[1]}] {fit.status}")
    for w in report.warnings:
        print(f"warning: {w}")
    print(f"elapsed: {time.perf_counter() - start:.1f} s")
    return EXIT_OK if report.passed else EXIT_GATE


def _engine_check(cfg: RunConfig) -> None:
    """Reject a spectral parameter inside the full sector before launching workers."""
    if not cfg.params.synthetic:
        _engine(cfg)


COMMANDS = {"validate": cmd_validate, "cell": cmd_cell, "effective": cmd_effective,
            "fibers": cmd_fibers, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CoercivityError as exc:
        print(f"coercivity error: {exc}", file=sys.stderr)
        return EXIT_COERCIVITY
    except SectorError as exc:
        print(f"coercivity error: {exc}", file=sys.stderr)
        return EXIT_COERCIVITY
    except (FiberError, CellSolveError, LowerBoundViolation, TruncationMismatch, SweepError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
