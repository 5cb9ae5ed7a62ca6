"""Cylinder geometry R^{d1} x T^{d2} and the period lattice of the periodic directions."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class DomainGeometry:
    """Cell geometry: ``d1`` periodic axes with given periods, ``d2`` torus axes of given lengths.

    Axis order everywhere in the package is periodic axes first, then torus axes.
    """

    d1: int
    d2: int
    period: tuple[float, ...]
    torus_length: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.d1 < 1:
            raise ValueError("d1 must be at least 1")
        if self.d2 < 0:
            raise ValueError("d2 must be non-negative")
        period = _expand(self.period, self.d1, "period")
        length = _expand(self.torus_length, self.d2, "torus_length")
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "torus_length", length)

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def axis_lengths(self) -> tuple[float, ...]:
        return self.period + self.torus_length

    @property
    def cell_volume(self) -> float:
        """Volume of the periodic cell in the y1 variables."""
        return float(np.prod(self.period))

    @property
    def volume(self) -> float:
        """Volume of the fundamental domain (periodic cell times torus)."""
        return float(np.prod(self.axis_lengths))

    def wavenumbers(self, axis: int, modes: np.ndarray) -> np.ndarray:
        """Angular wavenumbers 2*pi*n/length for integer modes along ``axis``."""
        return 2.0 * np.pi * np.asarray(modes, dtype=float) / self.axis_lengths[axis]

    def lattice(self) -> Lattice:
        return Lattice(self)


def _expand(values, count: int, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
    if arr.size == 1 and count > 1:
        arr = np.repeat(arr, count)
    if arr.size != count:
        raise ValueError(f"{name} needs {count} entries, got {arr.size}")
    if count and np.any(arr <= 0):
        raise ValueError(f"{name} entries must be positive")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class Lattice:
    """Rectangular period lattice diag(period) Z^{d1} and its dual."""

    geometry: DomainGeometry

    @cached_property
    def basis(self) -> np.ndarray:
        return np.diag(self.geometry.period)

    @cached_property
    def dual_basis(self) -> np.ndarray:
        return 2.0 * np.pi * np.diag(1.0 / np.asarray(self.geometry.period))

    @property
    def brillouin_radius(self) -> float:
        """Half the length of the shortest nonzero dual vector."""
        return 0.5 * float(np.min(np.linalg.norm(self.dual_basis, axis=1)))

    @property
    def poincare_constant(self) -> float:
        return 1.0 / self.brillouin_radius

    def reduce(self, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split ``k`` as ``k_zone + 2*pi*n/period`` with ``k_zone`` in [-pi/period, pi/period).

        Returns ``(k_zone, n)`` with integer ``n``.
        """
        k = np.asarray(k, dtype=float)
        step = 2.0 * np.pi / np.asarray(self.geometry.period)
        n = np.floor(k / step + 0.5).astype(np.int64)
        return k - n * step, n

    def in_open_zone(self, k: np.ndarray) -> np.ndarray:
        """True where every component satisfies |k_i| < pi/period_i."""
        k = np.asarray(k, dtype=float)
        half = np.pi / np.asarray(self.geometry.period)
        return np.all(np.abs(k) < half, axis=-1)
