"""Plain-text run configuration: geometry, numerics and coefficient record tables.

Grammar (one item per line, ``#`` starts a comment)::

    [geometry]
    d1 = 1
    d2 = 1
    period = 1.0               # one value per periodic axis (or a single shared value)
    torus_length = 1.0         # one value per torus axis

    [numerics]
    N1 = 8                     # fiber basis half-width in the periodic modes
    N2 = 8                     # fiber basis half-width in the torus modes
    eps = 0.25 0.125 0.0625 0.03125 0.015625
    k_points = 16
    mu = -1.0 0.0              # optional override (real and imaginary part)
    seed = 0
    jobs = 1

    [field A real]             # optional "real" flag demands Hermitian symmetry
    n.. m.. row col re im      # record: d1 + d2 mode integers, 1-based indices, value

Vector fields (``a1``, ``a2``) have one index column, the scalar ``q`` none.
Absent fields are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import CoefficientSet
from .geometry import DomainGeometry, Lattice
from .trigfield import TrigField

FIELD_RANKS = {"A": 2, "a1": 1, "a2": 1, "q": 0}
DEFAULT_EPS = (0.25, 0.125, 0.0625, 0.03125, 0.015625)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RunParameters:
    N1: int = 8
    N2: int = 8
    eps: tuple[float, ...] = DEFAULT_EPS
    k_points: int = 16
    mu: complex | None = None
    seed: int = 0
    jobs: int = 1
    synthetic: bool = False


@dataclass(frozen=True)
class RunConfig:
    geometry: DomainGeometry
    coefficients: CoefficientSet
    params: RunParameters
    real_fields: tuple[str, ...] = field(default_factory=tuple)

    @property
    def lattice(self) -> Lattice:
        return self.geometry.lattice()


def fmt(x: float) -> str:
    """Shortest text that round-trips; 17 significant digits at most."""
    x = float(x)
    if x == 0.0:
        return "0"
    return format(x, ".17g")


_GEOMETRY_KEYS = {"d1", "d2", "period", "torus_length"}
_NUMERIC_KEYS = {"N1", "N2", "eps", "k_points", "mu", "seed", "jobs", "synthetic"}


def parse_config(text: str) -> RunConfig:
    sections: dict[str, dict] = {"geometry": {}, "numerics": {}}
    fields: dict[str, list[tuple[int, list[str]]]] = {}
    real_flags: list[str] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            words = line[1:-1].split()
            if not words:
                raise ConfigError("empty section header", lineno)
            if words[0] in ("geometry", "numerics") and len(words) == 1:
                current = words[0]
            elif words[0] == "field" and len(words) in (2, 3):
                name = words[1]
                if name not in FIELD_RANKS:
                    raise ConfigError(f"unknown field {name!r}", lineno)
                if len(words) == 3:
                    if words[2] != "real":
                        raise ConfigError(f"unknown field flag {words[2]!r}", lineno)
                    real_flags.append(name)
                if name in fields:
                    raise ConfigError(f"field {name!r} defined twice", lineno)
                fields[name] = []
                current = ("field", name)
            else:
                raise ConfigError(f"unknown section {line!r}", lineno)
            continue
        if current is None:
            raise ConfigError("content before the first section", lineno)
        if isinstance(current, tuple):
            fields[current[1]].append((lineno, line.split()))
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' in [{current}]", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        allowed = _GEOMETRY_KEYS if current == "geometry" else _NUMERIC_KEYS
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{current}]", lineno)
        sections[current][key] = (lineno, value)

    geometry = _parse_geometry(sections["geometry"])
    params = _parse_numerics(sections["numerics"])
    built = {}
    for name, rows in fields.items():
        built[name] = _parse_field(name, rows, geometry, params)
    for name in real_flags:
        f = built[name]
        if not f.is_hermitian_symmetric():
            raise ConfigError(f"field {name!r} is flagged real but is not Hermitian symmetric")
    if "A" not in built:
        raise ConfigError("missing required field 'A'")
    coeffs = CoefficientSet.from_matrix(geometry, built["A"], built.get("a1"), built.get("a2"),
                                        built.get("q"))
    return RunConfig(geometry, coeffs, params, tuple(sorted(real_flags)))


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def _parse_geometry(entries: dict) -> DomainGeometry:
    for key in ("d1", "d2", "period"):
        if key not in entries:
            raise ConfigError(f"missing key {key!r} in [geometry]")
    if _int(entries["d2"]) > 0 and "torus_length" not in entries:
        raise ConfigError("missing key 'torus_length' in [geometry]")
    d1 = _int(entries["d1"])
    d2 = _int(entries["d2"])
    period = _floats(entries["period"])
    length = _floats(entries["torus_length"]) if "torus_length" in entries else ()
    try:
        return DomainGeometry(d1, d2, tuple(period), tuple(length))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_numerics(entries: dict) -> RunParameters:
    kw = {}
    for key in ("N1", "N2", "k_points", "seed", "jobs"):
        if key in entries:
            kw[key] = _int(entries[key])
    if "eps" in entries:
        kw["eps"] = tuple(_floats(entries["eps"]))
        if any(not 0 < e <= 1 for e in kw["eps"]):
            raise ConfigError("eps values must lie in (0, 1]", entries["eps"][0])
    if "mu" in entries:
        vals = _floats(entries["mu"])
        if len(vals) != 2:
            raise ConfigError("mu needs real and imaginary parts", entries["mu"][0])
        kw["mu"] = complex(vals[0], vals[1])
    if "synthetic" in entries:
        lineno, value = entries["synthetic"]
        if value not in ("true", "false"):
            raise ConfigError("synthetic must be true or false", lineno)
        kw["synthetic"] = value == "true"
    params = RunParameters(**kw)
    if params.N1 < 1 or params.N2 < 0 or params.k_points < 2 or params.jobs < 1:
        raise ConfigError("numerics out of range (N1 >= 1, N2 >= 0, k_points >= 2, jobs >= 1)")
    return params


def _int(entry) -> int:
    lineno, value = entry
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {value!r}", lineno) from None


def _floats(entry) -> list[float]:
    lineno, value = entry
    try:
        return [float(v) for v in value.split()]
    except ValueError:
        raise ConfigError(f"expected numbers, got {value!r}", lineno) from None


def _parse_field(name: str, rows, geometry: DomainGeometry, params: RunParameters) -> TrigField:
    rank = FIELD_RANKS[name]
    d = geometry.d
    width = d + rank + 2
    shape = (d,) * rank
    modes: dict[tuple[int, ...], np.ndarray] = {}
    for lineno, words in rows:
        if len(words) != width:
            raise ConfigError(f"field {name!r} record needs {width} columns, got {len(words)}", lineno)
        try:
            ints = [int(w) for w in words[: d + rank]]
            re, im = float(words[-2]), float(words[-1])
        except ValueError:
            raise ConfigError(f"malformed record in field {name!r}", lineno) from None
        mode = tuple(ints[:d])
        index = tuple(i - 1 for i in ints[d:])
        if any(not 0 <= i < geometry.d for i in index):
            raise ConfigError(f"component index out of range in field {name!r}", lineno)
        budget = (params.N1,) * geometry.d1 + (params.N2,) * geometry.d2
        if any(abs(p) > b for p, b in zip(mode, budget)):
            raise ConfigError(f"mode {mode} of field {name!r} exceeds the truncation budget {budget}", lineno)
        value = modes.setdefault(mode, np.zeros(shape, complex))
        value[index] += complex(re, im)
    return TrigField.from_modes(geometry, modes, shape) if modes else TrigField.zeros(geometry, shape)


# serialisation ------------------------------------------------------------------------------


def field_records(f: TrigField) -> list[str]:
    """Record lines ``n.. m.. [row [col]] re im`` for every nonzero coefficient."""
    lines = []
    bw = np.asarray(f.bandwidth)
    for pos in np.argwhere(np.ones(f.grid_shape, bool)):
        mode = tuple(int(v) for v in pos - bw)
        value = f.coef[(...,) + tuple(pos)]
        for index in np.ndindex(f.shape):
            c = complex(value[index])
            if c == 0:
                continue
            cols = [str(m) for m in mode] + [str(i + 1) for i in index] + [fmt(c.real), fmt(c.imag)]
            lines.append(" ".join(cols))
    return lines


def dump_field(name: str, f: TrigField, real: bool = False) -> str:
    header = f"[field {name} real]" if real else f"[field {name}]"
    return "\n".join([header] + field_records(f)) + "\n"


def dump_config(cfg: RunConfig) -> str:
    g, p = cfg.geometry, cfg.params
    out = [
        "[geometry]",
        f"d1 = {g.d1}",
        f"d2 = {g.d2}",
        "period = " + " ".join(fmt(v) for v in g.period),
    ]
    if g.d2:
        out.append("torus_length = " + " ".join(fmt(v) for v in g.torus_length))
    out += [
        "",
        "[numerics]",
        f"N1 = {p.N1}",
        f"N2 = {p.N2}",
        "eps = " + " ".join(fmt(e) for e in p.eps),
        f"k_points = {p.k_points}",
    ]
    if p.mu is not None:
        out.append(f"mu = {fmt(p.mu.real)} {fmt(p.mu.imag)}")
    out += [f"seed = {p.seed}", f"jobs = {p.jobs}"]
    if p.synthetic:
        out.append("synthetic = true")
    text = "\n".join(out) + "\n"
    for name, f in cfg.coefficients.fields().items():
        if f.is_zero() and name != "A":
            continue
        text += "\n" + dump_field(name, f, name in cfg.real_fields)
    return text
