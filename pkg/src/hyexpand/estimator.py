"""Hayashi-Yoshida estimator and the synchronous cross-product baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .sampling import SamplingScheme
from .simulate import ObservedPath

__all__ = ["EstimateResult", "hy_estimate", "sync_estimate"]


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: float
    n_terms: int


def hy_estimate(obs: ObservedPath, scheme: SamplingScheme) -> EstimateResult:
    """Sum of ``dX1_i * dX2_j`` over all overlapping interval pairs.

    Per-interval partial sums of the overlapping ``dX2`` are formed first and
    the products are accumulated with compensated summation.
    """
    s, t = scheme.pi1.breakpoints, scheme.pi2.breakpoints
    if not (np.array_equal(obs.times1, s) and np.array_equal(obs.times2, t)):
        raise ValueError("observation times do not match the sampling scheme")
    th, terms = kernels.hy_sweep(s, t, obs.dx1, obs.dx2)
    return EstimateResult(float(th), int(terms))


def sync_estimate(obs: ObservedPath) -> float:
    """Realized covariance ``sum dX1_i dX2_i`` on a common grid."""
    if not np.array_equal(obs.times1, obs.times2):
        raise ValueError("synchronous estimate needs identical time grids")
    return math.fsum(obs.dx1 * obs.dx2)
