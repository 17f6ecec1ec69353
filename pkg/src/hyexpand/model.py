"""Deterministic coefficient curves, the bivariate diffusion model and its
integrated quantities.

The model is ``dX = beta dt + diag(sigma) dB`` with ``corr(dB1, dB2) = rho``
and deterministic ``sigma1``, ``sigma2``, ``rho``. Integrals of the curves
are computed two ways:

* :func:`adaptive_simpson`, the reference quadrature used by the public
  ``integrated_*`` functions and by the asymptotic constants;
* :class:`CurveIntegrals`, an antiderivative table with cubic Hermite
  interpolation inside each cell, used by the vectorized engines and the
  compiled Monte Carlo kernel.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Curve",
    "Constant",
    "Linear",
    "Sinusoidal",
    "PiecewiseLinear",
    "curve_from_config",
    "DriftSpec",
    "ModelSpec",
    "CurveIntegrals",
    "adaptive_simpson",
    "integrated_v",
    "integrated_v1",
    "integrated_v2",
    "theta",
]

ABS_TOL = 1e-12
REL_TOL = 1e-10


class Curve:
    """A deterministic function of time, vectorized over numpy arrays."""

    #: interior points where the curve is not smooth
    knots: tuple[float, ...] = ()

    def __call__(self, t):
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Curve):
    value: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, float(self.value)) if t.ndim else float(self.value)

    def to_config(self) -> dict:
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class Linear(Curve):
    """``intercept + slope * t``."""

    intercept: float
    slope: float

    def __call__(self, t):
        return self.intercept + self.slope * np.asarray(t, dtype=float)

    def to_config(self) -> dict:
        return {"kind": "linear", "intercept": self.intercept, "slope": self.slope}


@dataclass(frozen=True)
class Sinusoidal(Curve):
    """``mean + amplitude * sin(2 pi frequency t + phase)``."""

    mean: float
    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.mean + self.amplitude * np.sin(
            2.0 * np.pi * self.frequency * t + self.phase
        )

    def to_config(self) -> dict:
        return {
            "kind": "sinusoidal",
            "mean": self.mean,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class PiecewiseLinear(Curve):
    """Linear interpolation through ``(times, values)``; flat outside."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(x) for x in self.times)
        values = tuple(float(x) for x in self.values)
        if len(times) != len(values) or len(times) < 1:
            raise ValueError("table needs matching, nonempty times and values")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("table times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def knots(self) -> tuple[float, ...]:  # type: ignore[override]
        return self.times

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.times, self.values)
        return out if t.ndim else float(out)

    def to_config(self) -> dict:
        return {"kind": "table", "times": list(self.times), "values": list(self.values)}


_CURVE_KINDS = {
    "constant": (Constant, {"value"}),
    "linear": (Linear, {"intercept", "slope"}),
    "sinusoidal": (Sinusoidal, {"mean", "amplitude", "frequency", "phase"}),
    "table": (PiecewiseLinear, {"times", "values"}),
}


def curve_from_config(cfg) -> Curve:
    """Build a curve from a number or a ``{"kind": ..., ...}`` mapping."""
    if isinstance(cfg, Curve):
        return cfg
    if isinstance(cfg, bool):
        raise ValueError("curve must be a number or a mapping")
    if isinstance(cfg, (int, float)):
        return Constant(float(cfg))
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ValueError(f"curve must be a number or a mapping with 'kind', got {cfg!r}")
    kind = cfg["kind"]
    if kind not in _CURVE_KINDS:
        raise ValueError(f"unknown curve kind {kind!r}")
    cls, allowed = _CURVE_KINDS[kind]
    extra = set(cfg) - allowed - {"kind"}
    if extra:
        raise ValueError(f"unknown keys for curve kind {kind!r}: {sorted(extra)}")
    kwargs = {k: v for k, v in cfg.items() if k != "kind"}
    if kind == "table":
        kwargs = {"times": tuple(cfg["times"]), "values": tuple(cfg["values"])}
    return cls(**kwargs)


def _eval_grid(T: float, curves: Sequence[Curve], size: int = 2049) -> np.ndarray:
    knots = [k for c in curves for k in c.knots if 0.0 < k < T]
    return np.union1d(np.linspace(0.0, T, size), knots)


@dataclass(frozen=True)
class DriftSpec:
    """Drift ``beta`` with ``d beta_i = b0_i dt + b1_i1 dB1 + b1_i2 dB2``.

    ``beta0`` holds the initial levels, ``beta_bv`` the ``dt`` coefficients
    and ``beta_diff[i][j]`` the loading of ``beta_i`` on ``B_j``.
    """

    beta0: tuple[float, float] = (0.0, 0.0)
    beta_bv: tuple[Curve, Curve] = (Constant(0.0), Constant(0.0))
    beta_diff: tuple[tuple[Curve, Curve], tuple[Curve, Curve]] = (
        (Constant(0.0), Constant(0.0)),
        (Constant(0.0), Constant(0.0)),
    )

    def curves(self) -> list[Curve]:
        return [*self.beta_bv, *self.beta_diff[0], *self.beta_diff[1]]

    def is_zero(self) -> bool:
        return self.beta0 == (0.0, 0.0) and all(
            isinstance(c, Constant) and c.value == 0.0 for c in self.curves()
        )

    @classmethod
    def constant(cls, b1: float, b2: float) -> "DriftSpec":
        return cls(beta0=(float(b1), float(b2)))

    @classmethod
    def from_config(cls, cfg: dict) -> "DriftSpec":
        extra = set(cfg) - {"beta0", "beta_bv", "beta_diff"}
        if extra:
            raise ValueError(f"unknown drift keys: {sorted(extra)}")
        b0 = cfg.get("beta0", [0.0, 0.0])
        bv = cfg.get("beta_bv", [0.0, 0.0])
        bd = cfg.get("beta_diff", [[0.0, 0.0], [0.0, 0.0]])
        if len(b0) != 2 or len(bv) != 2 or len(bd) != 2 or any(len(r) != 2 for r in bd):
            raise ValueError("drift entries must have shape 2 (beta0, beta_bv) and 2x2 (beta_diff)")
        return cls(
            beta0=(float(b0[0]), float(b0[1])),
            beta_bv=(curve_from_config(bv[0]), curve_from_config(bv[1])),
            beta_diff=tuple(
                (curve_from_config(r[0]), curve_from_config(r[1])) for r in bd
            ),  # type: ignore[arg-type]
        )

    def to_config(self) -> dict:
        return {
            "beta0": list(self.beta0),
            "beta_bv": [c.to_config() for c in self.beta_bv],
            "beta_diff": [[c.to_config() for c in row] for row in self.beta_diff],
        }


@dataclass(frozen=True)
class ModelSpec:
    """Deterministic volatilities, correlation and optional drift on ``[0, T]``."""

    sigma1: Curve
    sigma2: Curve
    rho: Curve
    T: float = 1.0
    drift: DriftSpec | None = None

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "rho"):
            object.__setattr__(self, name, curve_from_config(getattr(self, name)))
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError("horizon T must be positive")
        grid = _eval_grid(self.T, [self.sigma1, self.sigma2, self.rho])
        if np.any(np.asarray(self.sigma1(grid)) <= 0) or np.any(np.asarray(self.sigma2(grid)) <= 0):
            raise ValueError("sigma1 and sigma2 must be positive on [0, T]")
        if np.any(np.abs(np.asarray(self.rho(grid))) > 1.0):
            raise ValueError("rho must lie in [-1, 1] on [0, T]")
        if self.drift is not None:
            for c in self.drift.curves():
                vals = np.asarray(c(_eval_grid(self.T, [c])))
                if not np.all(np.isfinite(vals)):
                    raise ValueError("drift coefficients must be bounded on [0, T]")

    @classmethod
    def constant(cls, sigma1: float = 1.0, sigma2: float = 1.0, rho: float = 0.0,
                 T: float = 1.0, drift: DriftSpec | None = None) -> "ModelSpec":
        return cls(Constant(sigma1), Constant(sigma2), Constant(rho), T, drift)

    @classmethod
    def from_config(cls, cfg: dict) -> "ModelSpec":
        extra = set(cfg) - {"T", "sigma1", "sigma2", "rho", "drift"}
        if extra:
            raise ValueError(f"unknown model keys: {sorted(extra)}")
        drift = cfg.get("drift")
        return cls(
            sigma1=curve_from_config(cfg.get("sigma1", 1.0)),
            sigma2=curve_from_config(cfg.get("sigma2", 1.0)),
            rho=curve_from_config(cfg.get("rho", 0.0)),
            T=float(cfg.get("T", 1.0)),
            drift=None if drift is None else DriftSpec.from_config(drift),
        )

    def to_config(self) -> dict:
        out = {
            "T": self.T,
            "sigma1": self.sigma1.to_config(),
            "sigma2": self.sigma2.to_config(),
            "rho": self.rho.to_config(),
        }
        if self.drift is not None:
            out["drift"] = self.drift.to_config()
        return out

    # integrands
    def h(self, t):
        """Instantaneous covariance ``rho sigma1 sigma2``."""
        return self.rho(t) * self.sigma1(t) * self.sigma2(t)

    def s1sq(self, t):
        return self.sigma1(t) ** 2

    def s2sq(self, t):
        return self.sigma2(t) ** 2

    @property
    def knots(self) -> tuple[float, ...]:
        return tuple(sorted({k for c in (self.sigma1, self.sigma2, self.rho) for k in c.knots}))

    def sigma_sup(self, size: int = 4097) -> float:
        """Sup over an evaluation grid of ``max(sigma1, sigma2)``."""
        grid = _eval_grid(self.T, [self.sigma1, self.sigma2], size)
        return float(max(np.max(self.sigma1(grid)), np.max(self.sigma2(grid))))

    @functools.cached_property
    def integrals(self) -> "CurveIntegrals":
        return CurveIntegrals(self)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     abs_tol: float = ABS_TOL, rel_tol: float = REL_TOL,
                     max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature of a scalar function on ``[a, b]``.

    Each panel is accepted once the Richardson error estimate drops below
    ``max(abs_tol, rel_tol * |whole|)`` scaled to the panel width.
    """
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, abs_tol, rel_tol, max_depth)
    fa, fm, fb = float(f(a)), float(f(0.5 * (a + b))), float(f(b))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = max(abs_tol, rel_tol * abs(whole))
    width = b - a
    total = 0.0
    comp = 0.0
    stack = [(a, b, fa, fm, fb, whole, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = float(f(lm)), float(f(rm))
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        err = left + right - s
        local_tol = tol * (hi - lo) / width
        if depth >= max_depth or abs(err) <= 15.0 * local_tol:
            # Kahan sum of accepted panels
            y = left + right + err / 15.0 - comp
            t = total + y
            comp = (t - total) - y
            total = t
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, depth + 1))
    return total


def _check_interval(model: ModelSpec, interval) -> tuple[float, float]:
    a, b = float(interval[0]), float(interval[1])
    if not (0.0 <= a <= b <= model.T):
        raise ValueError(f"interval ({a}, {b}] outside [0, {model.T}]")
    return a, b


def _piecewise_simpson(f, a: float, b: float, knots) -> float:
    pts = [a, *[k for k in knots if a < k < b], b]
    return math.fsum(adaptive_simpson(f, lo, hi) for lo, hi in zip(pts, pts[1:]))


def integrated_v(model: ModelSpec, interval) -> float:
    """Integral of ``rho sigma1 sigma2`` over ``interval``."""
    a, b = _check_interval(model, interval)
    return _piecewise_simpson(model.h, a, b, model.knots)


def integrated_v1(model: ModelSpec, interval) -> float:
    """Integral of ``sigma1**2`` over ``interval``."""
    a, b = _check_interval(model, interval)
    return _piecewise_simpson(model.s1sq, a, b, model.sigma1.knots)


def integrated_v2(model: ModelSpec, interval) -> float:
    """Integral of ``sigma2**2`` over ``interval``."""
    a, b = _check_interval(model, interval)
    return _piecewise_simpson(model.s2sq, a, b, model.sigma2.knots)


def theta(model: ModelSpec) -> float:
    """The covariation ``<X1, X2>_T``."""
    return integrated_v(model, (0.0, model.T))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


@dataclass
class _Table:
    """Antiderivative of one integrand on a grid."""

    grid: np.ndarray
    F: np.ndarray  # antiderivative at grid nodes
    cell: np.ndarray  # exact cell integrals
    f: np.ndarray  # integrand at grid nodes

    @classmethod
    def build(cls, fn, grid: np.ndarray) -> "_Table":
        lo, hi = grid[:-1], grid[1:]
        half = 0.5 * (hi - lo)
        nodes = (lo + hi)[:, None] * 0.5 + half[:, None] * _GL_X[None, :]
        vals = np.asarray(fn(nodes), dtype=float).reshape(nodes.shape)
        cell = half * (vals @ _GL_W)
        F = np.concatenate([[0.0], np.cumsum(cell)])
        f = np.asarray(fn(grid), dtype=float).reshape(grid.shape)
        return cls(grid, F, cell, f)

    def _partial(self, k, sa, sb):
        """Integral of the Hermite interpolant over local coords ``[sa, sb]`` of cell k."""
        h = self.grid[k + 1] - self.grid[k]
        dF = self.cell[k]
        f0, f1 = self.f[k], self.f[k + 1]
        ds = sb - sa
        c2 = 3.0 * dF - h * (2.0 * f0 + f1)
        c3 = h * (f0 + f1) - 2.0 * dF
        return ds * (h * f0 + c2 * (sa + sb) + c3 * (sa * sa + sa * sb + sb * sb))

    def integral(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        g = self.grid
        n = len(g) - 1
        ka = np.clip(np.searchsorted(g, a, side="right") - 1, 0, n - 1)
        kb = np.clip(np.searchsorted(g, b, side="left") - 1, 0, n - 1)
        kb = np.maximum(kb, ka)
        ha = g[ka + 1] - g[ka]
        hb = g[kb + 1] - g[kb]
        sa = (a - g[ka]) / ha
        sb = (b - g[kb]) / hb
        same = ka == kb
        inside = self._partial(ka, sa, np.where(same, sb, 1.0))
        tail = self._partial(kb, 0.0, sb)
        mid = self.F[kb] - self.F[np.minimum(ka + 1, kb)]
        out = np.where(same, inside, inside + mid + tail)
        return out if out.ndim else float(out)


class CurveIntegrals:
    """Vectorized interval integrals of ``h``, ``sigma1**2`` and ``sigma2**2``.

    Cell integrals are exact to rounding (10-point Gauss-Legendre on a grid
    that contains every table knot); partial cells use the cubic Hermite
    interpolant of the antiderivative. Sums over any partition telescope to
    the same total, so ``sum v(I) == v(0, T)`` up to rounding.
    """

    def __init__(self, model: ModelSpec, cells: int = 4096):
        self.T = model.T
        self.grid = _eval_grid(model.T, [model.sigma1, model.sigma2, model.rho], cells + 1)
        self.h = _Table.build(model.h, self.grid)
        self.s1 = _Table.build(model.s1sq, self.grid)
        self.s2 = _Table.build(model.s2sq, self.grid)

    def v(self, a, b):
        return self.h.integral(a, b)

    def v1(self, a, b):
        return self.s1.integral(a, b)

    def v2(self, a, b):
        return self.s2.integral(a, b)

    def arrays(self) -> dict[str, np.ndarray]:
        """Flat arrays consumed by the compiled kernel."""
        return {
            "grid": self.grid,
            "F": np.stack([self.s1.F, self.h.F, self.s2.F]),
            "cell": np.stack([self.s1.cell, self.h.cell, self.s2.cell]),
            "f": np.stack([self.s1.f, self.h.f, self.s2.f]),
        }
