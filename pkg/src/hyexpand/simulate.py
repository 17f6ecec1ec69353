"""Exact Gaussian and Euler-refined simulation of the observed pair.

Without drift the increments over each cell of the merged grid are drawn
exactly from ``N(0, [[v1, v], [v, v2]])``. With drift, every merged cell is
split into ``substeps`` pieces; martingale increments stay exact and the
drift is integrated by a left-point Euler rule.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelSpec
from .sampling import SamplingScheme

__all__ = [
    "ObservedPath",
    "SimulationError",
    "merged_grid",
    "cell_cholesky",
    "exact_from_normals",
    "drift_from_normals",
    "simulate_exact",
    "simulate_with_drift",
]

JITTER = 1e-15


class SimulationError(RuntimeError):
    """A cell covariance failed to factor."""


@dataclass(frozen=True)
class ObservedPath:
    times1: np.ndarray
    values1: np.ndarray
    times2: np.ndarray
    values2: np.ndarray

    def __post_init__(self):
        if self.times1.shape != self.values1.shape or self.times2.shape != self.values2.shape:
            raise ValueError("times and values must have equal length")

    @property
    def dx1(self) -> np.ndarray:
        return np.diff(self.values1)

    @property
    def dx2(self) -> np.ndarray:
        return np.diff(self.values2)

    @classmethod
    def from_increments(cls, scheme: SamplingScheme, dx1, dx2) -> "ObservedPath":
        return cls(
            scheme.pi1.breakpoints.copy(),
            np.concatenate([[0.0], np.cumsum(dx1)]),
            scheme.pi2.breakpoints.copy(),
            np.concatenate([[0.0], np.cumsum(dx2)]),
        )

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "series", "value"])
        for t, x in zip(self.times1, self.values1):
            w.writerow([repr(float(t)), 1, repr(float(x))])
        for t, x in zip(self.times2, self.values2):
            w.writerow([repr(float(t)), 2, repr(float(x))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def merged_grid(scheme: SamplingScheme) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Union of both breakpoint sets, with the I and J index of every cell."""
    s, t = scheme.pi1.breakpoints, scheme.pi2.breakpoints
    g = np.union1d(s, t)
    ci = np.searchsorted(s, g[:-1], side="right") - 1
    cj = np.searchsorted(t, g[:-1], side="right") - 1
    return g, ci, cj


def cell_cholesky(v1, v, v2, lo=None):
    """Lower Cholesky factors ``(L11, L21, L22)`` of ``[[v1, v], [v, v2]]``.

    A Schur complement within rounding of zero is set to zero; a slightly
    negative one gets a single ``1e-15`` jitter, and anything still negative
    raises :class:`SimulationError`.
    """
    v1, v, v2 = (np.asarray(x, dtype=float) for x in (v1, v, v2))
    L11 = np.sqrt(v1)
    L21 = np.divide(v, L11, out=np.zeros_like(v), where=L11 > 0)
    d = v2 - L21 * L21
    d = np.where(np.abs(d) <= 16.0 * np.finfo(float).eps * v2, 0.0, d)
    d = np.where(d < 0, d + JITTER, d)
    if np.any(d < 0) or np.any(v1 < 0):
        k = int(np.argmin(d))
        where = "" if lo is None else f" starting at t={float(np.asarray(lo)[k])!r}"
        raise SimulationError(
            f"cell covariance not positive semidefinite{where}: "
            f"v1={float(v1[k])!r}, v={float(v[k])!r}, v2={float(v2[k])!r}"
        )
    return L11, L21, np.sqrt(d)


def _aggregate(scheme: SamplingScheme, ci, cj, d1, d2) -> ObservedPath:
    dx1 = np.bincount(ci, weights=d1, minlength=scheme.N1)
    dx2 = np.bincount(cj, weights=d2, minlength=scheme.N2)
    return ObservedPath.from_increments(scheme, dx1, dx2)


def exact_from_normals(model: ModelSpec, scheme: SamplingScheme, z: np.ndarray) -> ObservedPath:
    """Exact path from standard normals ``z`` of shape ``(cells, 2)``."""
    if model.T != scheme.T:
        raise ValueError("model and scheme horizons differ")
    g, ci, cj = merged_grid(scheme)
    ig = model.integrals
    lo, hi = g[:-1], g[1:]
    L11, L21, L22 = cell_cholesky(ig.v1(lo, hi), ig.v(lo, hi), ig.v2(lo, hi), lo)
    d1 = L11 * z[:, 0]
    d2 = L21 * z[:, 0] + L22 * z[:, 1]
    return _aggregate(scheme, ci, cj, d1, d2)


def drift_from_normals(model: ModelSpec, scheme: SamplingScheme, substeps: int,
                       z: np.ndarray) -> ObservedPath:
    """Euler-refined path from standard normals of shape ``(cells * substeps, 2)``."""
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    if model.T != scheme.T:
        raise ValueError("model and scheme horizons differ")
    g, ci, cj = merged_grid(scheme)
    m = substeps
    frac = np.arange(m + 1) / m
    lo_c, hi_c = g[:-1], g[1:]
    pts = lo_c[:, None] + (hi_c - lo_c)[:, None] * frac[None, :]
    pts[:, -1] = hi_c
    lo = pts[:, :-1].ravel()
    hi = pts[:, 1:].ravel()
    ig = model.integrals
    v1, v2 = ig.v1(lo, hi), ig.v2(lo, hi)
    L11, L21, L22 = cell_cholesky(v1, ig.v(lo, hi), v2, lo)
    dm1 = L11 * z[:, 0]
    dm2 = L21 * z[:, 0] + L22 * z[:, 1]
    d1, d2 = dm1, dm2
    drift = model.drift
    if drift is not None and not drift.is_zero():
        dt = hi - lo
        # Brownian increments implied by the exact martingale increments
        db1 = dm1 * np.sqrt(dt / v1)
        db2 = dm2 * np.sqrt(dt / v2)
        beta = []
        for i in range(2):
            step = (drift.beta_bv[i](lo) * dt + drift.beta_diff[i][0](lo) * db1
                    + drift.beta_diff[i][1](lo) * db2)
            level = drift.beta0[i] + np.concatenate([[0.0], np.cumsum(step)[:-1]])
            beta.append(level)
        d1 = dm1 + beta[0] * dt
        d2 = dm2 + beta[1] * dt
    return _aggregate(scheme, np.repeat(ci, m), np.repeat(cj, m), d1, d2)


def _cells(scheme: SamplingScheme) -> int:
    return np.union1d(scheme.pi1.breakpoints, scheme.pi2.breakpoints).size - 1


def simulate_exact(model: ModelSpec, scheme: SamplingScheme, seed=None) -> ObservedPath:
    """Exact drift-free observations; ``X_0 = (0, 0)``."""
    rng = np.random.default_rng(seed)
    return exact_from_normals(model, scheme, rng.standard_normal((_cells(scheme), 2)))


def simulate_with_drift(model: ModelSpec, scheme: SamplingScheme, substeps: int = 4,
                        seed=None) -> ObservedPath:
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((_cells(scheme) * substeps, 2))
    return drift_from_normals(model, scheme, substeps, z)
