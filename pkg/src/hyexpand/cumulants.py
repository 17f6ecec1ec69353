"""Cumulants of the HY estimator seen as a Gaussian quadratic form.

``theta_hat = xi' A xi`` with ``xi ~ N(0, Sigma)``; ``mu_k = tr[(Sigma A)^k]``
and the k-th cumulant of ``theta_hat`` is ``2^(k-1) (k-1)! mu_k``. Three
independent engines compute ``mu_2`` and ``mu_3``:

* ``trace``: dense matrices;
* ``intervals``: closed-form sums over intervals and overlapping pairs;
* ``chains``: enumeration of cyclic overlap chains (compiled kernel).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .model import ModelSpec
from .sampling import SamplingScheme, mesh, overlaps

__all__ = [
    "GaussianQuadForm",
    "CumulantReport",
    "IntervalData",
    "interval_data",
    "build_quadform",
    "mu_k_trace",
    "eigenvalues",
    "mu2_intervals",
    "mu3_intervals",
    "mu2_chains",
    "mu3_chains",
    "chain_cumulants",
    "normalized_cumulants",
    "cumulant_of_standardized",
    "alpha_n",
    "char_fn",
    "char_fn_expansion_bound",
    "tail_bound",
    "cumulant_report",
]

MAX_DENSE = 4000


@dataclass(frozen=True)
class GaussianQuadForm:
    A: np.ndarray
    Sigma: np.ndarray
    N1: int
    N2: int

    @property
    def N(self) -> int:
        return self.N1 + self.N2


@dataclass(frozen=True)
class IntervalData:
    """Integrated quantities on intervals and overlapping pairs."""

    vI: np.ndarray
    vJ: np.ndarray
    v1I: np.ndarray
    v2J: np.ndarray
    w: np.ndarray  # v(I & J) per overlapping pair
    pair_i: np.ndarray
    pair_j: np.ndarray
    index: object


def interval_data(model: ModelSpec, scheme: SamplingScheme) -> IntervalData:
    if model.T != scheme.T:
        raise ValueError("model and scheme horizons differ")
    ig = model.integrals
    s, t = scheme.pi1.breakpoints, scheme.pi2.breakpoints
    ov = overlaps(scheme)
    lo = np.maximum(s[ov.pair_i], t[ov.pair_j])
    hi = np.minimum(s[ov.pair_i + 1], t[ov.pair_j + 1])
    return IntervalData(
        vI=ig.v(s[:-1], s[1:]),
        vJ=ig.v(t[:-1], t[1:]),
        v1I=ig.v1(s[:-1], s[1:]),
        v2J=ig.v2(t[:-1], t[1:]),
        w=ig.v(lo, hi),
        pair_i=ov.pair_i,
        pair_j=ov.pair_j,
        index=ov,
    )


def build_quadform(model: ModelSpec, scheme: SamplingScheme) -> GaussianQuadForm:
    """Dense ``A`` (1/2 on overlapping cross entries) and covariance ``Sigma``."""
    N1, N2 = scheme.N1, scheme.N2
    if N1 + N2 > MAX_DENSE:
        raise ValueError(f"dense engine limited to N1 + N2 <= {MAX_DENSE}")
    d = interval_data(model, scheme)
    N = N1 + N2
    A = np.zeros((N, N))
    S = np.zeros((N, N))
    A[d.pair_i, N1 + d.pair_j] = 0.5
    A[N1 + d.pair_j, d.pair_i] = 0.5
    S[np.arange(N1), np.arange(N1)] = d.v1I
    S[N1 + np.arange(N2), N1 + np.arange(N2)] = d.v2J
    S[d.pair_i, N1 + d.pair_j] = d.w
    S[N1 + d.pair_j, d.pair_i] = d.w
    return GaussianQuadForm(A, S, N1, N2)


def mu_k_trace(qf: GaussianQuadForm, k: int) -> float:
    """``tr[(Sigma A)^k]`` by dense products."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    M = qf.Sigma @ qf.A
    if k == 1:
        return float(np.trace(M))
    P = M
    for _ in range(k - 2):
        P = P @ M
    # tr(P M) without forming the product
    return float(np.sum(P * M.T))


def eigenvalues(qf: GaussianQuadForm) -> np.ndarray:
    """Eigenvalues of ``Sigma^(1/2) A Sigma^(1/2)``, ascending."""
    ev, U = scipy.linalg.eigh(qf.Sigma)
    root = (U * np.sqrt(np.clip(ev, 0.0, None))) @ U.T
    B = root @ qf.A @ root
    B = 0.5 * (B + B.T)
    return scipy.linalg.eigh(B, eigvals_only=True, driver="ev")


def _pair_sums(d: IntervalData):
    vIp = d.vI[d.pair_i]
    vJp = d.vJ[d.pair_j]
    a = d.v1I[d.pair_i] * d.v2J[d.pair_j]
    return vIp, vJp, a


def mu2_intervals(model: ModelSpec, scheme: SamplingScheme, data: IntervalData | None = None) -> float:
    d = data if data is not None else interval_data(model, scheme)
    _, _, a = _pair_sums(d)
    return 0.5 * math.fsum(
        [a.sum(), np.sum(d.vI ** 2), np.sum(d.vJ ** 2), -np.sum(d.w ** 2)]
    )


def mu3_intervals(model: ModelSpec, scheme: SamplingScheme, data: IntervalData | None = None) -> float:
    d = data if data is not None else interval_data(model, scheme)
    vIp, vJp, a = _pair_sums(d)
    w = d.w
    union = vIp + vJp - w
    return 0.25 * math.fsum([
        np.sum(d.vI ** 3),
        np.sum(d.vJ ** 3),
        2.0 * np.sum(w ** 3),
        3.0 * np.sum(a * union),
        -3.0 * np.sum(w * w * (vIp + vJp)),
        3.0 * np.sum(w * vIp * vJp),
    ])


def chain_cumulants(model: ModelSpec, scheme: SamplingScheme,
                    data: IntervalData | None = None) -> tuple[float, float]:
    """``(mu2, mu3)`` from chains of length one to three."""
    d = data if data is not None else interval_data(model, scheme)
    ov = d.index
    mu2, mu3 = kernels.chain_sums(ov.jlo, ov.jhi, ov.ilo, ov.ihi, ov.offset, d.w, d.v1I, d.v2J)
    return float(mu2), float(mu3)


def mu2_chains(model: ModelSpec, scheme: SamplingScheme) -> float:
    return chain_cumulants(model, scheme)[0]


def mu3_chains(model: ModelSpec, scheme: SamplingScheme) -> float:
    return chain_cumulants(model, scheme)[1]


def normalized_cumulants(mu2: float, mu3: float, b_n: float) -> tuple[float, float]:
    """``(lambda_bar2, lambda_bar3) = (2 mu2 / b, 8 mu3 / b^2)``."""
    if b_n <= 0:
        raise ValueError("b_n must be positive")
    return 2.0 * mu2 / b_n, 8.0 * mu3 / b_n ** 2


def cumulant_of_standardized(mu_r: float, r: int, b_n: float) -> float:
    """r-th cumulant of ``(theta_hat - theta) / sqrt(b_n)``."""
    return 2.0 ** (r - 1) * math.factorial(r - 1) * mu_r * b_n ** (-0.5 * r)


def alpha_n(sigma_sup: float, r_n: float, b_n: float) -> float:
    return math.sqrt(3.0) * sigma_sup ** 2 * r_n / math.sqrt(b_n)


def char_fn(eigs, theta: float, u):
    """Characteristic function of ``theta_hat - theta`` at ``u``."""
    lam = np.asarray(eigs, dtype=float)
    u_arr = np.asarray(u, dtype=float)
    uu = u_arr.reshape(-1, 1)
    logphi = -0.5 * np.sum(np.log(1.0 - 2j * lam[None, :] * uu), axis=1) - 1j * theta * uu[:, 0]
    out = np.exp(logphi)
    return out.reshape(u_arr.shape) if u_arr.ndim else complex(out[0])


def char_fn_expansion_bound(eigs, v: float) -> float:
    """Bound on ``|log phi(v / sqrt(2 mu2)) + v^2 / 2|``.

    Valid for ``|v| < 1 / (sqrt(2) alpha_bar)`` with
    ``alpha_bar = max|lambda| / sqrt(mu2)``.
    """
    lam = np.asarray(eigs, dtype=float)
    mu2 = float(np.sum(lam ** 2))
    if mu2 <= 0:
        raise ValueError("degenerate quadratic form")
    abar = float(np.max(np.abs(lam))) / math.sqrt(mu2)
    x = math.sqrt(2.0) * abs(v) * abar
    if x >= 1.0:
        raise ValueError("|v| outside the domain of the expansion bound")
    return -v * v * math.log1p(-x)


def tail_bound(eigs, p: float, u):
    """``(p/2)^(p/4) (1 + mu2 u^2)^(-p/4)``; requires ``max lambda^2 <= mu2/(2p)``."""
    lam = np.asarray(eigs, dtype=float)
    mu2 = float(np.sum(lam ** 2))
    if np.max(lam ** 2) > mu2 / (2.0 * p):
        raise ValueError("eigenvalues too spread for the tail bound with this p")
    u = np.asarray(u, dtype=float)
    return (p / 2.0) ** (p / 4.0) * (1.0 + mu2 * u * u) ** (-p / 4.0)


@dataclass
class CumulantReport:
    theta: float
    trace_theta: float
    mu2: dict
    mu3: dict
    eigenvalues: list
    lambda_bar2: float
    lambda_bar3: float
    r_n: float
    alpha_n: float
    b_n: float
    sigma_sup: float
    N1: int
    N2: int
    eigen_bound_slack: float
    cumulant_bound_slack: dict = field(default_factory=dict)
    max_rel_disagreement: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "CumulantReport":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "CumulantReport":
        return cls.from_dict(json.loads(text))


def _rel(a: float, b: float, floor: float = 0.0) -> float:
    scale = max(abs(a), abs(b), floor)
    return 0.0 if scale == 0 else abs(a - b) / scale


# |mu3| <= mu2^(3/2); a third cumulant that vanishes by symmetry is compared
# on this natural scale instead of against its own rounding noise
MU3_FLOOR = 1e-6


def cumulant_report(model: ModelSpec, scheme: SamplingScheme, b_n: float | None = None,
                    dense: bool | None = None) -> CumulantReport:
    """Run every engine and the eigenvalue and cumulant bound checks.

    ``b_n`` defaults to ``1 / max(N1, N2)``. The dense trace engine (and with
    it the eigenvalues) is skipped when ``N1 + N2`` exceeds the dense cap.
    """
    from .model import theta as theta_exact

    if b_n is None:
        b_n = 1.0 / max(scheme.N1, scheme.N2)
    if dense is None:
        dense = scheme.N1 + scheme.N2 <= MAX_DENSE
    d = interval_data(model, scheme)
    mu2 = {"intervals": mu2_intervals(model, scheme, d)}
    mu3 = {"intervals": mu3_intervals(model, scheme, d)}
    mu2["chains"], mu3["chains"] = chain_cumulants(model, scheme, d)
    r_n = mesh(scheme)
    sig = model.sigma_sup()
    a_n = alpha_n(sig, r_n, b_n)
    eigs: list = []
    eig_slack = float("nan")
    tr_theta = float(np.sum(d.w))
    cum_slack = {}
    if dense:
        qf = build_quadform(model, scheme)
        tr_theta = mu_k_trace(qf, 1)
        mu2["trace"] = mu_k_trace(qf, 2)
        mu3["trace"] = mu_k_trace(qf, 3)
        lam = eigenvalues(qf)
        eigs = lam.tolist()
        eig_slack = 3.0 * sig ** 4 * r_n ** 2 - float(np.max(lam ** 2))
        lb2 = 2.0 * mu2["trace"] / b_n
        for r in (3, 4):
            mu_r = mu3["trace"] if r == 3 else mu_k_trace(qf, 4)
            k_r = cumulant_of_standardized(mu_r, r, b_n)
            c_r = 2.0 ** (r - 2) * math.factorial(r - 1)
            cum_slack[str(r)] = c_r * a_n ** (r - 2) * lb2 - abs(k_r)
    lb2, lb3 = normalized_cumulants(mu2["intervals"], mu3["intervals"], b_n)
    dis = max(
        max(_rel(x, y) for x in mu2.values() for y in mu2.values()),
        max(_rel(x, y, MU3_FLOOR * mu2["intervals"] ** 1.5) for x in mu3.values() for y in mu3.values()),
    )
    return CumulantReport(
        theta=theta_exact(model),
        trace_theta=tr_theta,
        mu2=mu2,
        mu3=mu3,
        eigenvalues=eigs,
        lambda_bar2=lb2,
        lambda_bar3=lb3,
        r_n=r_n,
        alpha_n=a_n,
        b_n=b_n,
        sigma_sup=sig,
        N1=scheme.N1,
        N2=scheme.N2,
        eigen_bound_slack=eig_slack,
        cumulant_bound_slack=cum_slack,
        max_rel_disagreement=dis,
    )
