"""Hermite polynomials and the one-term Edgeworth densities of the
standardized estimator, with closed-form CDFs.

Every variant has the form ``phi(z; V) P(z)`` with ``P`` a polynomial of
degree at most three, possibly followed by positive-part truncation and
renormalization. The signed CDF is a combination of the Gaussian moment
antiderivatives

    G0 = Phi(x / sqrt V), G1 = -V phi, G2 = V G0 - V x phi,
    G3 = -V (x^2 + 2 V) phi,

so no quadrature is needed at evaluation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

__all__ = [
    "VARIANTS",
    "hermite",
    "gaussian_pdf",
    "EdgeworthDensity",
    "make_density",
    "density",
    "cdf",
    "fourier_side",
]

VARIANTS = (
    "conditional_p3n",
    "conditional_tilde",
    "unconditional_star",
    "unconditional_plus",
    "drift_circ",
)

_REQUIRED = {
    "gaussian": ("c",),
    "conditional_p3n": ("lambda_bar2", "lambda_bar3", "b_n"),
    "conditional_tilde": ("c", "lambda_bar2", "lambda_bar3", "b_n"),
    "unconditional_star": ("c", "lambda_bar3", "b_n"),
    "unconditional_plus": ("c", "lambda_bar3", "b_n"),
    "drift_circ": ("c", "lambda_bar3", "b_n", "A"),
}


def hermite(r: int, z, Sigma: float):
    """``h_r(z; Sigma)`` for ``r`` in {2, 3}."""
    if Sigma <= 0:
        raise ValueError("Sigma must be positive")
    z = np.asarray(z, dtype=float)
    if r == 2:
        out = (z * z - Sigma) / Sigma ** 2
    elif r == 3:
        out = (z ** 3 - 3.0 * Sigma * z) / Sigma ** 3
    else:
        raise ValueError("only r = 2 and r = 3 are supported")
    return out if out.ndim else float(out)


def gaussian_pdf(z, V: float):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z / V) / math.sqrt(2.0 * math.pi * V)


def _moment_antiderivatives(x, V: float):
    x = np.asarray(x, dtype=float)
    ph = gaussian_pdf(x, V)
    ph = np.where(np.isfinite(x), ph, 0.0)
    xs = np.where(np.isfinite(x), x, 0.0)
    G0 = ndtr(x / math.sqrt(V))
    G1 = -V * ph
    G2 = V * G0 - V * xs * ph
    G3 = -V * (xs * xs + 2.0 * V) * ph
    return G0, G1, G2, G3


@dataclass(frozen=True)
class EdgeworthDensity:
    """``phi(z; V) * P(z)``, with ``P(z) = sum coef[k] z^k``.

    When ``positive`` is set the density is ``max(0, phi P)`` divided by its
    total mass ``normalization``.
    """

    variant: str
    V: float
    coef: tuple[float, float, float, float]
    positive: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def poly(self, z):
        c0, c1, c2, c3 = self.coef
        z = np.asarray(z, dtype=float)
        return c0 + z * (c1 + z * (c2 + z * c3))

    def _signed_cdf(self, x):
        G = _moment_antiderivatives(x, self.V)
        return sum(c * g for c, g in zip(self.coef, G))

    def positive_intervals(self) -> list[tuple[float, float]]:
        """Maximal intervals where ``P > 0``."""
        # phi(z; V) underflows beyond 40 sd, so solve in y = z / L and drop
        # leading terms that are below rounding everywhere on |y| <= 1
        L = 40.0 * math.sqrt(self.V)
        q = [c * L ** k for k, c in enumerate(self.coef)][::-1]
        big = max(abs(x) for x in q)
        while q and abs(q[0]) <= 1e-17 * big:
            q.pop(0)
        roots: list[float] = []
        if len(q) > 1:
            r = np.roots(q)
            scale = max(1.0, float(np.max(np.abs(r))))
            roots = sorted(float(x.real) * L for x in r if abs(x.imag) <= 1e-12 * scale)
        edges = [-math.inf, *roots, math.inf]
        out = []
        for lo, hi in zip(edges, edges[1:]):
            if lo == hi:
                continue
            if math.isinf(lo) and math.isinf(hi):
                mid = 0.0
            elif math.isinf(lo):
                mid = hi - 1.0
            elif math.isinf(hi):
                mid = lo + 1.0
            else:
                mid = 0.5 * (lo + hi)
            if self.poly(mid) > 0:
                if out and out[-1][1] == lo:
                    out[-1] = (out[-1][0], hi)
                else:
                    out.append((lo, hi))
        return out

    @property
    def normalization(self) -> float:
        if not self.positive:
            return 1.0
        return float(sum(self._signed_cdf(hi) - self._signed_cdf(lo)
                         for lo, hi in self.positive_intervals()))

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        out = gaussian_pdf(z, self.V) * self.poly(z)
        if self.positive:
            out = np.maximum(out, 0.0) / self.normalization
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if not self.positive:
            out = self._signed_cdf(x)
        else:
            out = np.zeros_like(x)
            for lo, hi in self.positive_intervals():
                top = np.minimum(x, hi)
                part = self._signed_cdf(top) - self._signed_cdf(lo)
                out = out + np.where(top > lo, part, 0.0)
            out = out / self.normalization
        return out if out.ndim else float(out)


def _check(variant: str, params: dict) -> None:
    if variant not in _REQUIRED:
        raise ValueError(f"unknown variant {variant!r}")
    missing = [k for k in _REQUIRED[variant] if params.get(k) is None]
    if missing:
        raise ValueError(f"variant {variant!r} needs parameters {missing}")
    V = params["lambda_bar2"] if variant == "conditional_p3n" else params["c"]
    if not V > 0:
        raise ValueError("variance parameter must be positive")
    if "b_n" in _REQUIRED[variant] and not params["b_n"] > 0:
        raise ValueError("b_n must be positive")


def make_density(variant: str, params: dict) -> EdgeworthDensity:
    """Build a density.

    Parameters
    ----------
    variant : str
        ``gaussian`` or one of :data:`VARIANTS`.
    params : dict
        ``c`` (limit variance), ``lambda_bar2``, ``lambda_bar3`` (realized or
        expected third normalized cumulant), ``b_n`` and ``A`` (drift
        constant), as required by the variant.
    """
    _check(variant, params)
    if variant == "gaussian":
        return EdgeworthDensity(variant, float(params["c"]), (1.0, 0.0, 0.0, 0.0), False, dict(params))
    sb = math.sqrt(params["b_n"])
    l3 = float(params["lambda_bar3"])
    if variant == "conditional_p3n":
        V = float(params["lambda_bar2"])
    else:
        V = float(params["c"])
    a = sb * l3 / 6.0
    # a * h3(z; V) = a / V^3 * (z^3 - 3 V z)
    c0, c1, c2, c3 = 1.0, -3.0 * a / V ** 2, 0.0, a / V ** 3
    if variant == "conditional_tilde":
        e = 0.5 * (float(params["lambda_bar2"]) - V) / V ** 2
        c0 -= e * V
        c2 += e
    if variant == "drift_circ":
        c1 += sb * float(params["A"]) / V
    positive = variant in ("unconditional_plus", "drift_circ")
    return EdgeworthDensity(variant, V, (c0, c1, c2, c3), positive, dict(params))


def density(variant: str, params: dict, z):
    return make_density(variant, params).pdf(z)


def cdf(variant: str, params: dict, x):
    return make_density(variant, params).cdf(x)


def fourier_side(params: dict, u):
    """``exp(-lambda_bar2 u^2 / 2) (1 + sqrt(b_n) lambda_bar3 (iu)^3 / 6)``."""
    for k in ("lambda_bar2", "lambda_bar3", "b_n"):
        if params.get(k) is None:
            raise ValueError(f"fourier_side needs {k!r}")
    u = np.asarray(u, dtype=float)
    out = np.exp(-0.5 * params["lambda_bar2"] * u * u) * (
        1.0 + math.sqrt(params["b_n"]) * params["lambda_bar3"] / 6.0 * (1j * u) ** 3
    )
    return out if out.ndim else complex(out)
