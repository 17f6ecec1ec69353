"""Pure numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_ckernels`` module.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

OK, GAPS_EXHAUSTED, NORMALS_EXHAUSTED, CHOLESKY_FAILED = 0, 1, 2, 3


def _ranges(s, t):
    lo = np.searchsorted(t[1:], s[:-1], side="right")
    hi = np.searchsorted(t[:-1], s[1:], side="left")
    return lo, hi


def hy_sweep(s, t, dx1, dx2):
    """HY sum over overlapping pairs; returns ``(theta_hat, n_terms)``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    jlo, jhi = _ranges(s, t)
    counts = jhi - jlo
    n_terms = int(counts.sum())
    rows = np.repeat(np.arange(s.size - 1), counts)
    cols = np.arange(n_terms) - np.repeat(np.cumsum(counts) - counts - jlo, counts)
    partial = np.bincount(rows, weights=np.asarray(dx2, dtype=float)[cols], minlength=s.size - 1)
    return math.fsum(np.asarray(dx1, dtype=float) * partial), n_terms


def chain_sums(jlo, jhi, ilo, ihi, offset, w, v1, v2):
    """Cumulants ``(mu2, mu3)`` by chain enumeration.

    ``w[offset[i] + j - jlo[i]]`` is ``v(I_i & J_j)`` for overlapping pairs.
    """
    jlo = [int(x) for x in jlo]
    jhi = [int(x) for x in jhi]
    ilo = [int(x) for x in ilo]
    ihi = [int(x) for x in ihi]
    offset = [int(x) for x in offset]
    w = [float(x) for x in w]
    v1 = [float(x) for x in v1]
    v2 = [float(x) for x in v2]

    def W(i, j):
        return w[offset[i] + j - jlo[i]]

    c1 = c2 = t2 = t3 = 0.0
    for i1 in range(len(jlo)):
        for j1 in range(jlo[i1], jhi[i1]):
            w11 = W(i1, j1)
            c1 += v1[i1] * v2[j1]
            a1 = v1[i1] * v2[j1]
            for i2 in range(ilo[j1], ihi[j1]):
                for j2 in range(jlo[i2], jhi[i2]):
                    w22 = W(i2, j2)
                    if jlo[i1] <= j2 < jhi[i1]:
                        c2 += w11 * w22
                        t2 += a1 * w22
                    for i3 in range(ilo[j2], ihi[j2]):
                        w3 = 0.0
                        for j3 in range(max(jlo[i3], jlo[i1]), min(jhi[i3], jhi[i1])):
                            w3 += W(i3, j3)
                        t3 += w11 * w22 * w3
    return 0.5 * (c2 + c1), 0.25 * t3 + 0.75 * t2


def mc_batch(T, rate1, rate2, gaps1, gaps2, z, substeps, tables, drift_table,
             beta0, drift_on, model=None):
    """Simulate ``B`` independent replicates of the HY estimate.

    Each replicate builds two Poisson partitions from its rows of ``gaps1``
    and ``gaps2``, draws the path from its slice of ``z`` and sums the HY
    estimator. Returns ``(theta_hat, status)``.
    """
    from ..estimator import hy_estimate
    from ..sampling import SamplingScheme, partition_from_gaps
    from ..simulate import SimulationError, drift_from_normals

    B = gaps1.shape[0]
    out = np.zeros(B)
    status = np.zeros(B, dtype=np.int32)
    for r in range(B):
        try:
            p1 = partition_from_gaps(gaps1[r], rate1, T)
            p2 = partition_from_gaps(gaps2[r], rate2, T)
        except ValueError:
            status[r] = GAPS_EXHAUSTED
            continue
        scheme = SamplingScheme(p1, p2)
        cells = np.union1d(p1.breakpoints, p2.breakpoints).size - 1
        if cells * substeps > z.shape[1]:
            status[r] = NORMALS_EXHAUSTED
            continue
        try:
            path = drift_from_normals(model, scheme, substeps, z[r, : cells * substeps])
        except SimulationError:
            status[r] = CHOLESKY_FAILED
            continue
        out[r] = hy_estimate(path, scheme).theta_hat
    return out, status
