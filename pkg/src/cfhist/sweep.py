"""Reflectivity sweeps of the consistency functional.

``max_offdiag`` is non-negative, so its zeros are touching minima rather than
sign changes.  To bisect we follow one Gram entry instead: near a grid
minimum, take the off-diagonal entry that dominates at the left end of a
bracket and project it onto its own phase there.  That real function is
positive at the left end and changes sign across an isolated zero.  A root is
reported only if the full ``max_offdiag`` there is below the tolerance.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .histories import HistoryFamily, gram_matrix
from .protocols import CircuitModel, ConfigError
from .statespace import ZERO_TOL

ModelBuilder = Callable[[float], CircuitModel]
FamilyBuilder = Callable[[CircuitModel], HistoryFamily]


@dataclass(frozen=True)
class SweepPoint:
    reflectivity: float
    max_offdiag: float
    consistent: bool


@dataclass(frozen=True)
class Crossing:
    reflectivity: float
    max_offdiag: float


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    minima: tuple[int, ...]
    crossings: tuple[Crossing, ...]
    tolerance: float

    @property
    def everywhere_consistent(self) -> bool:
        return all(p.consistent for p in self.points)

    @property
    def min_offdiag(self) -> float:
        return min(p.max_offdiag for p in self.points)


def _local_minima(values: np.ndarray) -> list[int]:
    n = len(values)
    out = []
    for i in range(n):
        left = values[i - 1] if i > 0 else np.inf
        right = values[i + 1] if i < n - 1 else np.inf
        if values[i] <= left and values[i] <= right:
            out.append(i)
    return out


def sweep_consistency(
    model_builder: ModelBuilder,
    family_builder: FamilyBuilder,
    r_range: tuple[float, float] = (0.05, 0.95),
    steps: int = 181,
    tol: float = ZERO_TOL,
    xtol: float = 1e-12,
) -> SweepResult:
    """Evaluate ``max_offdiag`` on a linear reflectivity grid and bisect its zeros."""
    lo, hi = r_range
    if steps < 2:
        raise ConfigError("a sweep needs at least two grid points")
    if not 0.0 < lo < hi < 1.0:
        raise ConfigError(f"reflectivity range ({lo}, {hi}) must satisfy 0 < lo < hi < 1")

    def report(r: float):
        return gram_matrix(family_builder(model_builder(r)), tol)

    grid = np.linspace(lo, hi, steps)
    reports = [report(float(r)) for r in grid]
    values = np.array([rep.max_offdiag for rep in reports])
    points = tuple(
        SweepPoint(float(r), float(v), bool(v < tol)) for r, v in zip(grid, values)
    )
    minima = _local_minima(values)
    result_minima = tuple(minima)
    if all(p.consistent for p in points):
        return SweepResult(points, result_minima, (), tol)

    roots: list[Crossing] = []
    for i in minima:
        candidates = []
        for a, b in ((i - 1, i), (i, i + 1)):
            if a < 0 or b >= steps:
                continue
            root = _bisect_entry(report, float(grid[a]), float(grid[b]), reports[a], xtol)
            if root is not None:
                candidates.append(root)
        if not candidates and values[i] < tol:
            candidates.append(float(grid[i]))
        for r in candidates:
            m = report(r).max_offdiag
            if m < tol and all(abs(r - c.reflectivity) > 1e-8 for c in roots):
                roots.append(Crossing(r, m))
    roots.sort(key=lambda c: c.reflectivity)
    return SweepResult(points, result_minima, tuple(roots), tol)


def _bisect_entry(report, a: float, b: float, rep_a, xtol: float) -> float | None:
    if rep_a.argmax is None:
        return None
    alpha, beta = rep_a.argmax
    ref = np.conj(rep_a.entry(alpha, beta))

    def g(r: float) -> float:
        return float(np.real(ref * report(r).entry(alpha, beta)))

    gb = g(b)
    if gb > 0:
        return None
    if gb == 0:
        return b
    while b - a > xtol:
        mid = 0.5 * (a + b)
        gm = g(mid)
        if gm == 0:
            return mid
        if gm > 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)
