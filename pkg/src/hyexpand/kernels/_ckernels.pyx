# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: HY sweep, chain enumeration, batched Monte Carlo."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

BACKEND = "cython"

cdef enum:
    OK = 0
    GAPS_EXHAUSTED = 1
    NORMALS_EXHAUSTED = 2
    CHOLESKY_FAILED = 3

cdef double EPS = np.finfo(np.float64).eps
cdef double JITTER = 1e-15


cdef inline void kahan_add(double *total, double *comp, double x) noexcept nogil:
    cdef double y = x - comp[0]
    cdef double t = total[0] + y
    comp[0] = (t - total[0]) - y
    total[0] = t


cdef (double, Py_ssize_t) _sweep(const double[::1] s, const double[::1] t,
                                 const double[::1] dx1, const double[::1] dx2) noexcept nogil:
    cdef Py_ssize_t n1 = s.shape[0] - 1, n2 = t.shape[0] - 1
    cdef Py_ssize_t i, j, lo = 0, terms = 0
    cdef double total = 0.0, comp = 0.0, part
    for i in range(n1):
        # first J with t[j+1] > s[i]
        while lo < n2 and t[lo + 1] <= s[i]:
            lo += 1
        part = 0.0
        j = lo
        while j < n2 and t[j] < s[i + 1]:
            part += dx2[j]
            j += 1
        terms += j - lo
        kahan_add(&total, &comp, dx1[i] * part)
    return total, terms


def hy_sweep(s, t, dx1, dx2):
    """HY sum over overlapping pairs; returns ``(theta_hat, n_terms)``."""
    cdef const double[::1] s_ = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[::1] t_ = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[::1] a_ = np.ascontiguousarray(dx1, dtype=np.float64)
    cdef const double[::1] b_ = np.ascontiguousarray(dx2, dtype=np.float64)
    cdef double th
    cdef Py_ssize_t terms
    with nogil:
        th, terms = _sweep(s_, t_, a_, b_)
    return th, int(terms)


def chain_sums(jlo, jhi, ilo, ihi, offset, w, v1, v2):
    """Cumulants ``(mu2, mu3)`` by chain enumeration."""
    cdef const cnp.int64_t[::1] Jlo = np.ascontiguousarray(jlo, dtype=np.int64)
    cdef const cnp.int64_t[::1] Jhi = np.ascontiguousarray(jhi, dtype=np.int64)
    cdef const cnp.int64_t[::1] Ilo = np.ascontiguousarray(ilo, dtype=np.int64)
    cdef const cnp.int64_t[::1] Ihi = np.ascontiguousarray(ihi, dtype=np.int64)
    cdef const cnp.int64_t[::1] off = np.ascontiguousarray(offset, dtype=np.int64)
    cdef const double[::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] V1 = np.ascontiguousarray(v1, dtype=np.float64)
    cdef const double[::1] V2 = np.ascontiguousarray(v2, dtype=np.float64)
    cdef Py_ssize_t n1 = Jlo.shape[0]
    cdef Py_ssize_t i1, j1, i2, j2, i3, j3, jl, jh
    cdef double c1 = 0.0, c2 = 0.0, t2 = 0.0, t3 = 0.0
    cdef double w11, w22, w3, a1
    with nogil:
        for i1 in range(n1):
            for j1 in range(Jlo[i1], Jhi[i1]):
                w11 = W[off[i1] + j1 - Jlo[i1]]
                a1 = V1[i1] * V2[j1]
                c1 += a1
                for i2 in range(Ilo[j1], Ihi[j1]):
                    for j2 in range(Jlo[i2], Jhi[i2]):
                        w22 = W[off[i2] + j2 - Jlo[i2]]
                        if Jlo[i1] <= j2 < Jhi[i1]:
                            c2 += w11 * w22
                            t2 += a1 * w22
                        for i3 in range(Ilo[j2], Ihi[j2]):
                            w3 = 0.0
                            jl = Jlo[i3] if Jlo[i3] > Jlo[i1] else Jlo[i1]
                            jh = Jhi[i3] if Jhi[i3] < Jhi[i1] else Jhi[i1]
                            for j3 in range(jl, jh):
                                w3 += W[off[i3] + j3 - Jlo[i3]]
                            t3 += w11 * w22 * w3
    return 0.5 * (c2 + c1), 0.25 * t3 + 0.75 * t2


cdef struct Tables:
    const double *grid
    const double *F
    const double *cell
    const double *f
    Py_ssize_t ncell


cdef inline double _partial(Tables *tb, Py_ssize_t row, Py_ssize_t k, double sa, double sb) noexcept nogil:
    cdef Py_ssize_t n = tb.ncell
    cdef double h = tb.grid[k + 1] - tb.grid[k]
    cdef double dF = tb.cell[row * n + k]
    cdef double f0 = tb.f[row * (n + 1) + k], f1 = tb.f[row * (n + 1) + k + 1]
    cdef double c2 = 3.0 * dF - h * (2.0 * f0 + f1)
    cdef double c3 = h * (f0 + f1) - 2.0 * dF
    return (sb - sa) * (h * f0 + c2 * (sa + sb) + c3 * (sa * sa + sa * sb + sb * sb))


cdef inline Py_ssize_t _cell_right(Tables *tb, double x, Py_ssize_t k) noexcept nogil:
    # last k with grid[k] <= x, clipped to [0, ncell-1]; k is a lower hint
    while k + 1 < tb.ncell and tb.grid[k + 1] <= x:
        k += 1
    return k


cdef inline Py_ssize_t _cell_left(Tables *tb, double x, Py_ssize_t k) noexcept nogil:
    # last k with grid[k] < x, clipped to [0, ncell-1]
    while k + 1 < tb.ncell and tb.grid[k + 1] < x:
        k += 1
    return k


cdef inline double _integral(Tables *tb, Py_ssize_t row, double a, double b,
                             Py_ssize_t ka, Py_ssize_t kb) noexcept nogil:
    cdef Py_ssize_t n = tb.ncell
    cdef double sa = (a - tb.grid[ka]) / (tb.grid[ka + 1] - tb.grid[ka])
    cdef double sb = (b - tb.grid[kb]) / (tb.grid[kb + 1] - tb.grid[kb])
    cdef Py_ssize_t m
    if ka == kb:
        return _partial(tb, row, ka, sa, sb)
    m = ka + 1 if ka + 1 < kb else kb
    return (_partial(tb, row, ka, sa, 1.0)
            + (tb.F[row * (n + 1) + kb] - tb.F[row * (n + 1) + m])
            + _partial(tb, row, kb, 0.0, sb))


cdef inline double _lerp(const double *tab, Py_ssize_t D, double T, double x) noexcept nogil:
    cdef double pos = x / T * D
    cdef Py_ssize_t k = <Py_ssize_t>pos
    if k >= D:
        return tab[D]
    if k < 0:
        return tab[0]
    pos -= k
    return tab[k] + (tab[k + 1] - tab[k]) * pos


cdef Py_ssize_t _build(const double *gaps, Py_ssize_t M, double rate, double T,
                       double *out) noexcept nogil:
    # fills out[0..N] with 0 < arrivals < T, T; returns N or -1
    cdef Py_ssize_t k, N = 1
    cdef double acc = 0.0
    out[0] = 0.0
    for k in range(M):
        acc += gaps[k] / rate
        if acc >= T:
            out[N] = T
            return N
        out[N] = acc
        N += 1
    return -1


def mc_batch(double T, double rate1, double rate2, gaps1, gaps2, z, int substeps,
             tables, drift_table, beta0, int drift_on, model=None):
    """Simulate ``B`` replicates of the HY estimate from pre-drawn buffers.

    Returns ``(theta_hat, status)``.
    """
    cdef const double[:, ::1] G1 = np.ascontiguousarray(gaps1, dtype=np.float64)
    cdef const double[:, ::1] G2 = np.ascontiguousarray(gaps2, dtype=np.float64)
    cdef const double[:, :, ::1] Z = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] grid = np.ascontiguousarray(tables["grid"], dtype=np.float64)
    cdef const double[:, ::1] Ft = np.ascontiguousarray(tables["F"], dtype=np.float64)
    cdef const double[:, ::1] Ct = np.ascontiguousarray(tables["cell"], dtype=np.float64)
    cdef const double[:, ::1] ft = np.ascontiguousarray(tables["f"], dtype=np.float64)
    dt_arr = np.ascontiguousarray(drift_table, dtype=np.float64)
    if dt_arr.ndim != 2 or dt_arr.shape[0] != 6 or dt_arr.shape[1] < 2:
        dt_arr = np.zeros((6, 2))
    cdef const double[:, ::1] DT = dt_arr
    cdef Py_ssize_t D = DT.shape[1] - 1
    cdef double b01 = float(beta0[0]), b02 = float(beta0[1])
    cdef Py_ssize_t B = G1.shape[0], M1 = G1.shape[1], M2 = G2.shape[1], MZ = Z.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_np = np.zeros(B)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] st_np = np.zeros(B, dtype=np.int32)
    cdef double[::1] out = out_np
    cdef int[::1] status = st_np
    cdef double[::1] s = np.empty(M1 + 2)
    cdef double[::1] t = np.empty(M2 + 2)
    cdef double[::1] dx1 = np.empty(M1 + 2)
    cdef double[::1] dx2 = np.empty(M2 + 2)
    cdef Tables tb
    tb.grid = &grid[0]
    tb.F = &Ft[0, 0]
    tb.cell = &Ct[0, 0]
    tb.f = &ft[0, 0]
    tb.ncell = grid.shape[0] - 1
    cdef Py_ssize_t r, N1, N2, a, b, q, k, ka, kb
    cdef double lo_c, hi_c, lo, hi, v1, v, v2, L11, L21, L22, d, z1, z2, m1, m2
    cdef double beta1, beta2, dt, db1, db2, th, step
    cdef Py_ssize_t terms
    cdef int m = substeps
    with nogil:
        for r in range(B):
            N1 = _build(&G1[r, 0], M1, rate1, T, &s[0])
            N2 = _build(&G2[r, 0], M2, rate2, T, &t[0])
            if N1 < 0 or N2 < 0:
                status[r] = GAPS_EXHAUSTED
                continue
            for a in range(N1):
                dx1[a] = 0.0
            for b in range(N2):
                dx2[b] = 0.0
            a = 0
            b = 0
            k = 0
            ka = 0
            kb = 0
            beta1 = b01
            beta2 = b02
            lo_c = 0.0
            while a < N1 and b < N2:
                hi_c = s[a + 1] if s[a + 1] < t[b + 1] else t[b + 1]
                for q in range(m):
                    if k >= MZ:
                        status[r] = NORMALS_EXHAUSTED
                        break
                    lo = lo_c + (hi_c - lo_c) * ((<double>q) / m)
                    hi = hi_c if q == m - 1 else lo_c + (hi_c - lo_c) * ((<double>(q + 1)) / m)
                    ka = _cell_right(&tb, lo, ka)
                    if kb < ka:
                        kb = ka
                    kb = _cell_left(&tb, hi, kb)
                    v1 = _integral(&tb, 0, lo, hi, ka, kb)
                    v = _integral(&tb, 1, lo, hi, ka, kb)
                    v2 = _integral(&tb, 2, lo, hi, ka, kb)
                    L11 = sqrt(v1)
                    L21 = v / L11 if L11 > 0 else 0.0
                    d = v2 - L21 * L21
                    if fabs(d) <= 16.0 * EPS * v2:
                        d = 0.0
                    if d < 0:
                        d = d + JITTER
                    if d < 0 or v1 < 0:
                        status[r] = CHOLESKY_FAILED
                        break
                    L22 = sqrt(d)
                    z1 = Z[r, k, 0]
                    z2 = Z[r, k, 1]
                    m1 = L11 * z1
                    m2 = L21 * z1 + L22 * z2
                    if drift_on:
                        dt = hi - lo
                        db1 = m1 * sqrt(dt / v1)
                        db2 = m2 * sqrt(dt / v2)
                        dx1[a] += m1 + beta1 * dt
                        dx2[b] += m2 + beta2 * dt
                        step = (_lerp(&DT[0, 0], D, T, lo) * dt + _lerp(&DT[2, 0], D, T, lo) * db1
                                + _lerp(&DT[3, 0], D, T, lo) * db2)
                        beta1 = beta1 + step
                        step = (_lerp(&DT[1, 0], D, T, lo) * dt + _lerp(&DT[4, 0], D, T, lo) * db1
                                + _lerp(&DT[5, 0], D, T, lo) * db2)
                        beta2 = beta2 + step
                    else:
                        dx1[a] += m1
                        dx2[b] += m2
                    k += 1
                if status[r] != OK:
                    break
                lo_c = hi_c
                if s[a + 1] == hi_c:
                    a += 1
                if t[b + 1] == hi_c:
                    b += 1
            if status[r] != OK:
                continue
            th, terms = _sweep(s[:N1 + 1], t[:N2 + 1], dx1[:N1], dx2[:N2])
            out[r] = th
    return out_np, st_np
