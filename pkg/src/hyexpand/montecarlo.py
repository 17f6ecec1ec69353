"""Replicated experiments: distribution of the standardized HY estimator,
KS comparisons against Gaussian and Edgeworth approximations, and cumulant
convergence across Poisson schemes.

Replicates are processed in fixed-size chunks, each with its own child of
``SeedSequence(seed)``; results therefore do not depend on the number of
worker processes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .asymptotics import AsymptoticConstants, asymptotic_constants
from .cumulants import interval_data, mu2_intervals, mu3_intervals, normalized_cumulants
from .edgeworth import make_density
from .estimator import hy_estimate
from .model import ModelSpec, theta
from .sampling import SamplingScheme, generate_poisson, mesh, overlaps
from .simulate import cell_cholesky, drift_from_normals, merged_grid

__all__ = [
    "SamplingConfig",
    "ExperimentConfig",
    "ExperimentResult",
    "ks_distance",
    "simulate_statistics",
    "run_experiment",
    "cumulant_convergence",
]

DRIFT_TABLE_SIZE = 2048


def ks_distance(samples, cdf) -> float:
    """``sup |ECDF - F|`` over the sample points, using both one-sided limits.

    The left limit of ``F`` is evaluated just below each distinct point, so
    step CDFs are handled as well as continuous ones.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    u, first = np.unique(x, return_index=True)
    R = x.size
    after = np.append(first[1:], R) / R  # ECDF at u
    before = first / R  # ECDF just below u
    F = np.asarray(cdf(u), dtype=float)
    F_left = np.asarray(cdf(np.nextafter(u, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(after - F)), np.max(np.abs(F_left - before))))


@dataclass(frozen=True)
class SamplingConfig:
    """``kind`` is ``poisson`` (intensities ``n p1``, ``n p2``) or ``fixed``."""

    kind: str = "poisson"
    n: int = 100
    p1: float = 1.0
    p2: float = 1.0
    scheme: SamplingScheme | None = None

    def __post_init__(self):
        if self.kind not in ("poisson", "fixed"):
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.kind == "poisson" and not (self.p1 > 0 and self.p2 > 0):
            raise ValueError("p1 and p2 must be positive")
        if self.kind == "fixed" and self.scheme is None:
            raise ValueError("fixed sampling needs a scheme")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    sampling: SamplingConfig
    replicates: int = 1000
    seed: int = 0
    densities: tuple[str, ...] = ("gaussian", "edgeworth_plus")
    drift: bool = False
    substeps: int = 4
    chunk_size: int = 1024
    cumulant_replicates: int = 0
    event_a: float = 0.9
    keep_samples: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.substeps < 1 or self.chunk_size < 1:
            raise ValueError("substeps and chunk_size must be positive")
        if self.drift and self.model.drift is None:
            raise ValueError("drift requested but the model has no drift")
        unknown = set(self.densities) - set(_DENSITIES)
        if unknown:
            raise ValueError(f"unknown densities {sorted(unknown)}")

    @property
    def n(self) -> int:
        return self.sampling.n

    @property
    def b_n(self) -> float:
        return 1.0 / self.sampling.n


# replicate simulation ---------------------------------------------------------

def _drift_table(model: ModelSpec) -> tuple[np.ndarray, tuple[float, float]]:
    d = model.drift
    x = np.linspace(0.0, model.T, DRIFT_TABLE_SIZE + 1)
    rows = [d.beta_bv[0], d.beta_bv[1], d.beta_diff[0][0], d.beta_diff[0][1],
            d.beta_diff[1][0], d.beta_diff[1][1]]
    tab = np.stack([np.broadcast_to(np.asarray(c(x), dtype=float), x.shape) for c in rows])
    return np.ascontiguousarray(tab), d.beta0


def _poisson_chunk(cfg: ExperimentConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    model = cfg.model
    T = model.T
    s = cfg.sampling
    r1, r2 = s.n * s.p1, s.n * s.p2
    m = cfg.substeps if cfg.drift else 1
    sim_model = model if cfg.drift else replace(model, drift=None)
    if cfg.drift:
        dtab, beta0 = _drift_table(model)
    else:
        dtab, beta0 = np.zeros((6, 2)), (0.0, 0.0)
    tables = model.integrals.arrays()

    def budget(rate):
        return int(rate * T + 10.0 * math.sqrt(rate * T) + 20)

    M1, M2 = budget(r1), budget(r2)
    MZ = budget(r1 + r2) * m
    g1 = rng.standard_exponential((size, M1))
    g2 = rng.standard_exponential((size, M2))
    z = rng.standard_normal((size, MZ, 2))
    out, status = kernels.mc_batch(T, r1, r2, g1, g2, z, m, tables, dtab, beta0,
                                   int(cfg.drift), model=sim_model)
    bad = np.flatnonzero(status)
    if np.any(status == 3):
        raise FloatingPointError("cell covariance failed to factor during simulation")
    # rare buffer overflow: redraw those replicates with larger buffers
    scale = 2
    while bad.size:
        k = bad.size
        g1 = rng.standard_exponential((k, M1 * scale))
        g2 = rng.standard_exponential((k, M2 * scale))
        z = rng.standard_normal((k, MZ * scale, 2))
        o2, st2 = kernels.mc_batch(T, r1, r2, g1, g2, z, m, tables, dtab, beta0,
                                   int(cfg.drift), model=sim_model)
        out[bad] = o2
        bad = bad[st2 != 0]
        scale *= 2
    return out


def _fixed_chunk(cfg: ExperimentConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    model, scheme = cfg.model, cfg.sampling.scheme
    g, ci, cj = merged_grid(scheme)
    cells = g.size - 1
    if cfg.drift:
        m = cfg.substeps
        z = rng.standard_normal((size, cells * m, 2))
        return np.array([hy_estimate(drift_from_normals(model, scheme, m, z[r]), scheme).theta_hat
                         for r in range(size)])
    ig = model.integrals
    lo, hi = g[:-1], g[1:]
    L11, L21, L22 = cell_cholesky(ig.v1(lo, hi), ig.v(lo, hi), ig.v2(lo, hi), lo)
    z = rng.standard_normal((size, cells, 2))
    d1 = L11 * z[:, :, 0]
    d2 = L21 * z[:, :, 0] + L22 * z[:, :, 1]
    A1 = np.zeros((cells, scheme.N1))
    A1[np.arange(cells), ci] = 1.0
    A2 = np.zeros((cells, scheme.N2))
    A2[np.arange(cells), cj] = 1.0
    dx1, dx2 = d1 @ A1, d2 @ A2
    ov = overlaps(scheme)
    return np.einsum("rk,rk->r", dx1[:, ov.pair_i], dx2[:, ov.pair_j])


def _run_chunk(args) -> np.ndarray:
    cfg, seq, size = args
    rng = np.random.default_rng(seq)
    if cfg.sampling.kind == "poisson":
        return _poisson_chunk(cfg, rng, size)
    return _fixed_chunk(cfg, rng, size)


def simulate_statistics(cfg: ExperimentConfig, threads: int = 1) -> np.ndarray:
    """``theta_hat`` for every replicate, in replicate order."""
    R, C = cfg.replicates, cfg.chunk_size
    n_chunks = -(-R // C)
    seqs = np.random.SeedSequence(cfg.seed).spawn(n_chunks)
    jobs = [(cfg, seqs[k], min(C, R - k * C)) for k in range(n_chunks)]
    if threads > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=min(threads, n_chunks)) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return np.concatenate(parts)


# summaries ------------------------------------------------------------------

_DENSITIES = ("gaussian", "edgeworth_plus", "edgeworth_star", "drift_circ",
              "conditional_p3n", "conditional_tilde")


def _moments(x: np.ndarray) -> dict:
    R = x.size
    mean = float(np.mean(x))
    c = x - mean
    m2 = float(np.mean(c ** 2))
    m3 = float(np.mean(c ** 3))
    m4 = float(np.mean(c ** 4))
    m6 = float(np.mean(c ** 6))
    var = m2 * R / (R - 1) if R > 1 else float("nan")
    nan = float("nan")
    return {
        "R": R,
        "mean": mean,
        "mean_se": math.sqrt(var / R) if R > 1 else nan,
        "variance": var,
        "variance_se": math.sqrt(max(m4 - m2 * m2, 0.0) / R) if R > 1 else nan,
        "third_central_moment": m3,
        "third_central_moment_se": (math.sqrt(max(m6 - m3 * m3 - 6 * m4 * m2 + 9 * m2 ** 3, 0.0) / R)
                                    if R > 1 else nan),
        "skewness": m3 / m2 ** 1.5 if m2 > 0 else nan,
    }


def _density_params(cfg: ExperimentConfig, consts: AsymptoticConstants | None, cond: dict | None):
    b = cfg.b_n
    out = {}
    if consts is not None:
        base = {"c": consts.c, "lambda_bar3": 12.0 * consts.kappa, "b_n": b}
        out["gaussian"] = ("gaussian", {"c": consts.c})
        out["edgeworth_plus"] = ("unconditional_plus", base)
        out["edgeworth_star"] = ("unconditional_star", base)
        out["drift_circ"] = ("drift_circ", {**base, "A": consts.A})
        if cond is not None:
            out["conditional_tilde"] = ("conditional_tilde", {**base, **cond})
    if cond is not None:
        out.setdefault("gaussian", ("gaussian", {"c": cond["lambda_bar2"]}))
        out["conditional_p3n"] = ("conditional_p3n", {**cond, "b_n": b})
    return out


@dataclass
class ExperimentResult:
    config: dict
    statistics: dict
    ks: dict
    constants: dict | None
    conditional: dict | None = None
    cumulants: dict | None = None
    samples: np.ndarray | None = field(default=None, repr=False)
    fitted: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return _clean({
            "config": self.config,
            "statistics": self.statistics,
            "ks": self.ks,
            "constants": self.constants,
            "conditional": self.conditional,
            "cumulant_convergence": self.cumulants,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def ecdf_csv(self, densities: dict | None = None) -> str:
        """``x, ecdf, <cdf columns>`` for the kept samples; by default one
        column per approximation compared in the experiment."""
        if self.samples is None:
            raise ValueError("samples were not kept")
        x = np.sort(self.samples)
        cols = {"ecdf": np.arange(1, x.size + 1) / x.size}
        for name, dens in (self.fitted if densities is None else densities).items():
            cols[name] = dens.cdf(x)
        lines = ["x," + ",".join(cols)]
        for k in range(x.size):
            lines.append(",".join([repr(float(x[k]))] + [repr(float(v[k])) for v in cols.values()]))
        return "\n".join(lines) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _config_summary(cfg: ExperimentConfig) -> dict:
    s = cfg.sampling
    samp = {"kind": s.kind, "n": s.n}
    if s.kind == "poisson":
        samp.update(p1=s.p1, p2=s.p2)
    else:
        samp.update(N1=s.scheme.N1, N2=s.scheme.N2)
    return {
        "model": cfg.model.to_config(),
        "sampling": samp,
        "replicates": cfg.replicates,
        "seed": cfg.seed,
        "densities": list(cfg.densities),
        "drift": cfg.drift,
        "substeps": cfg.substeps if cfg.drift else 1,
        "chunk_size": cfg.chunk_size,
        "b_n": cfg.b_n,
        "backend": kernels.BACKEND,
    }


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Simulate ``R`` replicates of ``X = (theta_hat - theta) / sqrt(b_n)`` and
    compare their ECDF with the requested approximations."""
    th = theta(cfg.model)
    est = simulate_statistics(cfg, threads)
    X = (est - th) / math.sqrt(cfg.b_n)
    consts = None
    cond = None
    if cfg.sampling.kind == "poisson":
        s = cfg.sampling
        consts = asymptotic_constants(cfg.model, s.p1, s.p2)
        if not cfg.drift:
            consts = replace(consts, A=0.0)
    else:
        scheme = cfg.sampling.scheme
        d = interval_data(cfg.model, scheme)
        lb2, lb3 = normalized_cumulants(mu2_intervals(cfg.model, scheme, d),
                                        mu3_intervals(cfg.model, scheme, d), cfg.b_n)
        cond = {"lambda_bar2": lb2, "lambda_bar3": lb3}
    params = _density_params(cfg, consts, cond)
    ks, fitted = {}, {}
    for name in cfg.densities:
        if name not in params:
            raise ValueError(f"density {name!r} is not available for {cfg.sampling.kind} sampling")
        variant, p = params[name]
        fitted[name] = make_density(variant, p)
        ks[name] = ks_distance(X, fitted[name].cdf)
    stats = _moments(X)
    if consts is not None:
        stats["expected"] = {
            "mean": consts.A / math.sqrt(cfg.n),
            "variance": consts.c,
            "third_central_moment": 12.0 * consts.kappa / math.sqrt(cfg.n),
        }
    cum = None
    if cfg.cumulant_replicates > 0 and cfg.sampling.kind == "poisson":
        cum = cumulant_convergence(cfg, cfg.cumulant_replicates)
    return ExperimentResult(
        config=_config_summary(cfg),
        statistics=stats,
        ks=ks,
        constants=None if consts is None else consts.to_dict(),
        conditional=cond,
        cumulants=cum,
        samples=X if cfg.keep_samples else None,
        fitted=fitted,
    )


def cumulant_convergence(cfg: ExperimentConfig, replicates: int | None = None,
                         seed: int | None = None) -> dict:
    """Mean and SE of ``2 n mu2`` and ``n^2 mu3`` over independent Poisson
    schemes, compared with ``c`` and ``1.5 kappa``, plus the frequency of the
    event ``{(2 n mu2 - c)^2 <= n^(1 - 2a), r_n <= n^(-a)}``."""
    s = cfg.sampling
    if s.kind != "poisson":
        raise ValueError("cumulant convergence needs Poisson sampling")
    R = replicates or cfg.replicates
    seq = np.random.SeedSequence(cfg.seed if seed is None else seed).spawn(2)[1]
    children = seq.spawn(R)
    n, model = s.n, cfg.model
    consts = asymptotic_constants(replace(model, drift=None), s.p1, s.p2)
    m2 = np.empty(R)
    m3 = np.empty(R)
    rn = np.empty(R)
    for r in range(R):
        scheme = generate_poisson(n, s.p1, s.p2, model.T, seed=children[r])
        d = interval_data(model, scheme)
        m2[r] = 2.0 * n * mu2_intervals(model, scheme, d)
        m3[r] = n * n * mu3_intervals(model, scheme, d)
        rn[r] = mesh(scheme)
    a = cfg.event_a
    event = ((m2 - consts.c) ** 2 <= float(n) ** (1.0 - 2.0 * a)) & (rn <= float(n) ** (-a))

    def se(x):
        return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")

    target3 = 1.5 * consts.kappa
    return {
        "replicates": R,
        "n": n,
        "mean_2n_mu2": float(np.mean(m2)),
        "se_2n_mu2": se(m2),
        "c": consts.c,
        "rel_err_mu2": abs(float(np.mean(m2)) - consts.c) / consts.c,
        "mean_n2_mu3": float(np.mean(m3)),
        "se_n2_mu3": se(m3),
        "target_n2_mu3": target3,
        "rel_err_mu3": abs(float(np.mean(m3)) - target3) / abs(target3) if target3 != 0 else None,
        "event_a": a,
        "event_frequency": float(np.mean(event)),
        "mean_n_rn": float(np.mean(n * rn)),
    }
