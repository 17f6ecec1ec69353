"""Poisson-regime constants, limit-measure densities and the closed-form
Poisson lemmas with their Monte Carlo counterparts.

With sampling intensities ``n p1`` and ``n p2`` and ``b_n = 1/n``:

* ``c``: limit variance of ``sqrt(n) (theta_hat - theta)``;
* ``kappa``: ``E[mu3] ~ 1.5 kappa / n^2``, so the third cumulant of
  ``sqrt(n) (theta_hat - theta)`` is about ``12 kappa / sqrt(n)``;
* ``A``: drift constant, the mean of ``sqrt(n) (theta_hat - theta)`` is
  about ``A / sqrt(n)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelSpec, _Table, _eval_grid, adaptive_simpson

__all__ = [
    "AsymptoticConstants",
    "LimitMeasures",
    "compute_c",
    "compute_kappa",
    "compute_A",
    "asymptotic_constants",
    "poisson_limit_measures",
    "c_from_measures",
    "LEMMAS",
    "lemma_oracles",
    "lemma_mc",
    "estimate_nu",
]


def _integrate(fn, model: ModelSpec, extra_knots=()) -> float:
    pts = sorted({0.0, model.T, *[k for k in (*model.knots, *extra_knots) if 0 < k < model.T]})
    return math.fsum(adaptive_simpson(fn, a, b) for a, b in zip(pts, pts[1:]))


def _check_p(p1: float, p2: float) -> None:
    if not (p1 > 0 and p2 > 0):
        raise ValueError("p1 and p2 must be positive")


def compute_c(model: ModelSpec, p1: float, p2: float) -> float:
    """``(2/p1 + 2/p2) int s1^2 s2^2 (1 + rho^2) - 2/(p1 + p2) int h^2``."""
    _check_p(p1, p2)
    s = _integrate(lambda t: model.s1sq(t) * model.s2sq(t) * (1.0 + model.rho(t) ** 2), model)
    hh = _integrate(lambda t: model.h(t) ** 2, model)
    return (2.0 / p1 + 2.0 / p2) * s - 2.0 / (p1 + p2) * hh


def compute_kappa(model: ModelSpec, p1: float, p2: float) -> float:
    """``(1/p1^2 + 1/p2^2) int h^3 + (3p1^2 + 2p1p2 + 3p2^2)/(p1^2 p2^2) int s1^2 s2^2 h``."""
    _check_p(p1, p2)
    h3 = _integrate(lambda t: model.h(t) ** 3, model)
    mixed = _integrate(lambda t: model.s1sq(t) * model.s2sq(t) * model.h(t), model)
    return ((1.0 / p1 ** 2 + 1.0 / p2 ** 2) * h3
            + (3 * p1 ** 2 + 2 * p1 * p2 + 3 * p2 ** 2) / (p1 ** 2 * p2 ** 2) * mixed)


def _beta_moment(model: ModelSpec):
    """``t -> E[beta1_t beta2_t]`` for the deterministic-coefficient drift."""
    d = model.drift
    grid = _eval_grid(model.T, [*d.curves(), model.rho], 4097)
    b = d.beta_diff
    m1 = _Table.build(d.beta_bv[0], grid)
    m2 = _Table.build(d.beta_bv[1], grid)
    cov = _Table.build(
        lambda t: b[0][0](t) * b[1][0](t) + b[0][1](t) * b[1][1](t)
        + model.rho(t) * (b[0][0](t) * b[1][1](t) + b[0][1](t) * b[1][0](t)),
        grid,
    )

    def moment(t: float) -> float:
        mean1 = d.beta0[0] + m1.integral(0.0, t)
        mean2 = d.beta0[1] + m2.integral(0.0, t)
        return mean1 * mean2 + cov.integral(0.0, t)

    return moment, [k for c in d.curves() for k in c.knots]


def compute_A(model: ModelSpec, p1: float, p2: float) -> float:
    """Drift constant ``(1/p1 + 1/p2) int {s1 (b21 + b22 rho) + s2 (b11 rho + b12) + 2 E[beta1 beta2]}``."""
    _check_p(p1, p2)
    d = model.drift
    if d is None or d.is_zero():
        return 0.0
    moment, knots = _beta_moment(model)
    b = d.beta_diff

    def integrand(t):
        r = model.rho(t)
        return (model.sigma1(t) * (b[1][0](t) + b[1][1](t) * r)
                + model.sigma2(t) * (b[0][0](t) * r + b[0][1](t))
                + 2.0 * moment(t))

    return (1.0 / p1 + 1.0 / p2) * _integrate(integrand, model, knots)


@dataclass(frozen=True)
class AsymptoticConstants:
    c: float
    kappa: float
    A: float
    p1: float
    p2: float

    def to_dict(self) -> dict:
        return asdict(self)


def asymptotic_constants(model: ModelSpec, p1: float, p2: float) -> AsymptoticConstants:
    return AsymptoticConstants(
        c=compute_c(model, p1, p2),
        kappa=compute_kappa(model, p1, p2),
        A=compute_A(model, p1, p2),
        p1=float(p1),
        p2=float(p2),
    )


@dataclass(frozen=True)
class LimitMeasures:
    """Lebesgue densities of the Poisson limit measures (``b_n = 1/n``)."""

    V_I: float
    V_J: float
    V_IcapJ: float
    V_IJ: float
    V_IIJ: float
    V_IJJ: float
    nu: float | None = None
    nu_se: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def poisson_limit_measures(p1: float, p2: float, nu_replicates: int = 0,
                           seed=None, n: int = 100) -> LimitMeasures:
    """Closed-form densities; the mixed-measure constant ``nu`` is estimated
    by Monte Carlo when ``nu_replicates > 0``."""
    _check_p(p1, p2)
    third = 6.0 / p1 ** 2 + 8.0 / (p1 * p2) + 6.0 / p2 ** 2
    nu = nu_se = None
    if nu_replicates > 0:
        nu, nu_se = estimate_nu(p1, p2, n=n, replicates=nu_replicates, seed=seed)
    return LimitMeasures(
        V_I=2.0 / p1,
        V_J=2.0 / p2,
        V_IcapJ=2.0 / (p1 + p2),
        V_IJ=2.0 / p1 + 2.0 / p2,
        V_IIJ=third,
        V_IJJ=third,
        nu=nu,
        nu_se=nu_se,
    )


def c_from_measures(model: ModelSpec, lm: LimitMeasures) -> float:
    """``c`` written through the limit measures:
    ``V_IJ int s1^2 s2^2 + (V_I + V_J - V_IcapJ) int h^2``."""
    s = _integrate(lambda t: model.s1sq(t) * model.s2sq(t), model)
    hh = _integrate(lambda t: model.h(t) ** 2, model)
    return lm.V_IJ * s + (lm.V_I + lm.V_J - lm.V_IcapJ) * hh


# closed-form lemmas ---------------------------------------------------------

def _a1(lam):
    return (lam * math.exp(lam) - math.exp(lam) + 1.0) / lam ** 2


def _a15(lam):
    return 2.0 / lam


def _a2(lam, length=1.0):
    x = lam * length
    return 2.0 * (x - 1.0 + math.exp(-x)) / lam ** 2


def _a3(lam1, lam2):
    return (6.0 * lam1 + 4.0 * lam2) / (lam1 ** 2 * (lam1 + lam2) ** 2)


def _a4a(lam, a, b, T):
    return (b - a) + 2.0 / lam - (math.exp(-lam * a) + math.exp(-lam * (T - b))) / lam


def _a4b(lam, a, b, T):
    return ((1.0 - math.exp(-lam * (b - a))) * (2.0 - math.exp(-lam * a) - math.exp(-lam * (T - b)))
            / lam ** 2)


def _a5(p=1.0, t=1.0):
    return 2.0 * t / p


def _a7(p1, p2, T=1.0):
    return (6.0 / p1 ** 2 + 8.0 / (p1 * p2) + 6.0 / p2 ** 2) * T


LEMMAS = {
    # name: (function, parameter names)
    "A1": (_a1, ("lam",)),
    "A1.5": (_a15, ("lam",)),
    "A2": (_a2, ("lam", "length")),
    "A3": (_a3, ("lam1", "lam2")),
    "A4a": (_a4a, ("lam", "a", "b", "T")),
    "A4b": (_a4b, ("lam", "a", "b", "T")),
    "A5": (_a5, ("p", "t")),
    "A7": (_a7, ("p1", "p2", "T")),
}


def lemma_oracles(name: str, params: dict) -> float:
    """Closed-form value of a Poisson lemma.

    ``A1``: ``sum_k lam^k / (k! (k + 2))``. ``A1.5``: mean length of the
    interval covering a fixed point. ``A2``: expected sum of squared gaps of a
    rate-``lam`` process on an interval. ``A3``: ``E[zeta sum |J|^2]`` for the
    partition of ``[0, zeta]``, ``zeta ~ Exp(lam1)``. ``A4a``/``A4b``: expected
    ``sum |J| K_IJ`` and ``sum |J \\ I| |J & I|`` for ``I = [a, b]``. ``A5`` and
    ``A7``: large-intensity limits of ``n sum |I|^2`` and
    ``n^2 sum |I| |J(I)|^2`` (``p`` or ``p1, p2`` scale the intensities).
    """
    if name not in LEMMAS:
        raise ValueError(f"unknown lemma {name!r}")
    fn, names = LEMMAS[name]
    missing = [k for k in names if k not in params]
    defaults = {"length": 1.0, "t": 1.0, "T": 1.0, "p": 1.0}
    kwargs = {}
    for k in names:
        if k in params:
            kwargs[k] = float(params[k])
        elif k in defaults:
            kwargs[k] = defaults[k]
        else:
            raise ValueError(f"lemma {name} needs parameters {missing}")
    return fn(**kwargs)


# Monte Carlo experiments ------------------------------------------------------

def _windows(rng: np.random.Generator, rate: float, length: float, R: int):
    """Breakpoints of ``R`` independent Poisson partitions of ``[0, length]``,
    laid end to end on ``[0, R length]``. Returns the merged breakpoints
    (window edges included) and the window edges."""
    total = R * length
    m = int(rate * total + 8.0 * math.sqrt(rate * total) + 16)
    pts = np.cumsum(rng.standard_exponential(m)) / rate
    while pts[-1] < total:
        more = pts[-1] + np.cumsum(rng.standard_exponential(m)) / rate
        pts = np.concatenate([pts, more])
    pts = pts[pts < total]
    edges = np.arange(R + 1) * length
    return np.union1d(pts, edges), edges


def _window_of(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.searchsorted(edges, x, side="right") - 1


def _mc_chunks(fn, replicates: int, seed, chunk: int):
    ss = np.random.SeedSequence(seed)
    n_chunks = -(-replicates // chunk)
    vals = []
    for k, child in enumerate(ss.spawn(n_chunks)):
        size = min(chunk, replicates - k * chunk)
        vals.append(fn(np.random.default_rng(child), size))
    x = np.concatenate(vals)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")


def _exp_a1(rng, R, lam):
    k = rng.poisson(lam, R)
    return math.exp(lam) / (k + 2.0)


def _exp_a15(rng, R, lam):
    # length of the interval of a rate-lam process on the line covering 0
    return rng.exponential(1.0 / lam, R) + rng.exponential(1.0 / lam, R)


def _exp_a2(rng, R, lam, length):
    bp, edges = _windows(rng, lam, length, R)
    g = np.diff(bp)
    return np.bincount(_window_of(bp[:-1], edges), weights=g * g, minlength=R)


def _exp_a3(rng, R, lam1, lam2):
    zeta = rng.exponential(1.0 / lam1, R)
    out = np.empty(R)
    for r in range(R):
        z = zeta[r]
        k = rng.poisson(lam2 * z)
        pts = np.sort(rng.uniform(0.0, z, k))
        g = np.diff(np.concatenate([[0.0], pts, [z]]))
        out[r] = z * np.dot(g, g)
    return out


def _exp_a4(rng, R, lam, a, b, T, which):
    bp, edges = _windows(rng, lam, T, R)
    lo, hi = bp[:-1], bp[1:]
    win = _window_of(lo, edges)
    la, lb = lo - edges[win], hi - edges[win]
    meets = (la <= b) & (lb >= a)
    if which == "a":
        val = np.where(meets, lb - la, 0.0)
    else:
        inter = np.clip(np.minimum(lb, b) - np.maximum(la, a), 0.0, None)
        val = np.where(meets, (lb - la - inter) * inter, 0.0)
    return np.bincount(win, weights=val, minlength=R)


def _pad(n: int, *ps: float) -> float:
    # the interval covering a point stays inside the pad with prob. 1 - e^-40
    return 40.0 / (n * min(ps))


def _exp_a5(rng, R, p, t, n):
    # intervals with left endpoint in [0, t) of a process on the whole line
    pad = _pad(n, p)
    bp, edges = _windows(rng, n * p, t + 2 * pad, R)
    lo = bp[:-1]
    win = _window_of(lo, edges)
    local = lo - edges[win]
    keep = (local >= pad) & (local < pad + t)
    g = np.diff(bp)
    return n * np.bincount(win, weights=np.where(keep, g * g, 0.0), minlength=R)


def _exp_a7(rng, R, p1, p2, T, n):
    pad = _pad(n, p1, p2)
    L = T + 2 * pad
    s, edges = _windows(rng, n * p1, L, R)
    t, _ = _windows(rng, n * p2, L, R)
    jlo = np.searchsorted(t[1:], s[:-1], side="right")
    jhi = np.searchsorted(t[:-1], s[1:], side="left")
    JI = t[jhi] - t[jlo]
    win = _window_of(s[:-1], edges)
    local = s[:-1] - edges[win]
    keep = (local >= pad) & (local < pad + T)
    val = np.where(keep, n ** 2 * np.diff(s) * JI * JI, 0.0)
    return np.bincount(win, weights=val, minlength=R)


_EXPERIMENTS = {
    "A1": (lambda rng, R, p: _exp_a1(rng, R, p["lam"]), 20000),
    "A1.5": (lambda rng, R, p: _exp_a15(rng, R, p["lam"]), 20000),
    "A2": (lambda rng, R, p: _exp_a2(rng, R, p["lam"], p.get("length", 1.0)), 20000),
    "A3": (lambda rng, R, p: _exp_a3(rng, R, p["lam1"], p["lam2"]), 20000),
    "A4a": (lambda rng, R, p: _exp_a4(rng, R, p["lam"], p["a"], p["b"], p.get("T", 1.0), "a"), 10000),
    "A4b": (lambda rng, R, p: _exp_a4(rng, R, p["lam"], p["a"], p["b"], p.get("T", 1.0), "b"), 10000),
    "A5": (lambda rng, R, p: _exp_a5(rng, R, p.get("p", 1.0), p.get("t", 1.0), p.get("n", 100)), 2000),
    "A7": (lambda rng, R, p: _exp_a7(rng, R, p["p1"], p["p2"], p.get("T", 1.0), p.get("n", 100)), 2000),
}


def lemma_mc(name: str, params: dict, replicates: int = 100_000, seed=0) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the quantity behind a lemma.

    ``A5`` and ``A7`` use processes on the whole line and count intervals
    whose left endpoint lies in the target window, at intensity multiplier
    ``params.get("n", 100)``. This removes the boundary truncation, so the
    expectation equals the large-intensity limit at every ``n``.
    """
    if name not in _EXPERIMENTS:
        raise ValueError(f"unknown lemma {name!r}")
    fn, chunk = _EXPERIMENTS[name]
    p = {k: float(v) for k, v in params.items()}
    if "n" in p:
        p["n"] = int(p["n"])
    return _mc_chunks(lambda rng, R: fn(rng, R, p), replicates, seed, chunk)


def _exp_nu(rng, R, p1, p2, T, n):
    pad = _pad(n, p1, p2)
    L = T + 2 * pad
    s, edges = _windows(rng, n * p1, L, R)
    t, _ = _windows(rng, n * p2, L, R)
    jlo = np.searchsorted(t[1:], s[:-1], side="right")
    jhi = np.searchsorted(t[:-1], s[1:], side="left")
    ilo = np.searchsorted(s[1:], t[:-1], side="right")
    ihi = np.searchsorted(s[:-1], t[1:], side="left")
    counts = jhi - jlo
    pi = np.repeat(np.arange(s.size - 1), counts)
    pj = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts - jlo, counts)
    JI = (t[jhi] - t[jlo])[pi]
    IJ = (s[ihi] - s[ilo])[pj]
    start = np.maximum(s[pi], t[pj])
    cap = np.minimum(s[pi + 1], t[pj + 1]) - start
    win = _window_of(start, edges)
    local = start - edges[win]
    keep = (local >= pad) & (local < pad + T)
    val = np.where(keep, n ** 2 * IJ * JI * cap, 0.0)
    return np.bincount(win, weights=val, minlength=R) / T


def estimate_nu(p1: float, p2: float, n: int = 100, replicates: int = 2000,
                seed=None, T: float = 1.0) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of the mixed-measure constant
    ``n^2 sum_{I,J} |I(J)| |J(I)| |I & J|`` per unit time."""
    return _mc_chunks(lambda rng, R: _exp_nu(rng, R, p1, p2, T, n), replicates, seed, 500)
