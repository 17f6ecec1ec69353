import math

import numpy as np
import pytest

from hyexpand.model import Constant, DriftSpec, ModelSpec, Sinusoidal
from hyexpand.sampling import Partition, SamplingScheme, generate_poisson, generate_uniform
from hyexpand.simulate import (
    ObservedPath,
    SimulationError,
    cell_cholesky,
    drift_from_normals,
    merged_grid,
    simulate_exact,
    simulate_with_drift,
)


def test_perfect_correlation_gives_equal_cell_increments():
    s = generate_poisson(50, 1.0, 1.0, seed=1)
    m = ModelSpec.constant(1.3, 1.3, 1.0)
    g, _, _ = merged_grid(s)
    # observing both series on the merged grid exposes the cell increments
    merged = SamplingScheme(Partition(g), Partition(g))
    path = simulate_exact(m, merged, seed=2)
    assert np.allclose(path.dx1, path.dx2, rtol=0, atol=1e-14)


def test_zero_correlation_cells_uncorrelated():
    N = 100_000
    s = SamplingScheme(generate_uniform(N), generate_uniform(N))
    path = simulate_exact(ModelSpec.constant(1.0, 2.0, 0.0), s, seed=3)
    r = np.corrcoef(path.dx1, path.dx2)[0, 1]
    assert abs(r) < 3 / math.sqrt(N)


def test_terminal_variance():
    R = 10_000
    m = ModelSpec(Sinusoidal(1.0, 0.4, 1.0), Constant(1.0), Constant(0.3))
    s = generate_poisson(20, 1.0, 1.0, seed=4)
    x = np.array([simulate_exact(m, s, seed=[5, r]).values1[-1] for r in range(R)])
    v1 = m.integrals.v1(0.0, 1.0)
    se = v1 * math.sqrt(2.0 / (R - 1))
    assert abs(x.var(ddof=1) - v1) < 3 * se


def test_zero_drift_matches_exact_path():
    m = ModelSpec.constant(1.0, 0.7, -0.4)
    s = generate_poisson(40, 1.0, 2.0, seed=6)
    a = simulate_exact(m, s, seed=7)
    b = simulate_with_drift(m.__class__(m.sigma1, m.sigma2, m.rho, drift=DriftSpec()), s, 1, seed=7)
    assert np.array_equal(a.values1, b.values1)
    assert np.array_equal(a.values2, b.values2)


def test_constant_drift_shifts_mean():
    R, b = 10_000, 1.5
    m = ModelSpec.constant(1.0, 1.0, 0.5, drift=DriftSpec.constant(b, 0.0))
    s = generate_poisson(10, 1.0, 1.0, seed=8)
    x = np.array([simulate_with_drift(m, s, 2, seed=[9, r]).values1[-1] for r in range(R)])
    assert abs(x.mean() - b) < 3 * x.std(ddof=1) / math.sqrt(R)


def test_euler_error_decreases_with_substeps():
    # beta_1 = 1 + B_1 with additive noise: the left-point rule for the drift
    # integral has mean-square error h^2 / 3, so halving the step must at
    # least halve the error.
    drift = DriftSpec(beta0=(1.0, 0.0), beta_diff=((Constant(1.0), Constant(0.0)),
                                                   (Constant(0.0), Constant(0.0))))
    m = ModelSpec.constant(1.0, 1.0, 0.0, drift=drift)
    s = SamplingScheme(Partition([0, 1]), Partition([0, 1]))
    fine, R = 256, 2000
    rng = np.random.default_rng(10)
    levels = [4, 8, 16, 32]
    err = np.zeros(len(levels))
    for _ in range(R):
        z = rng.standard_normal((fine, 2))
        ref = drift_from_normals(m, s, fine, z).values1[-1]
        for k, sub in enumerate(levels):
            # constant coefficients: coarse normals are scaled block sums
            zc = z.reshape(sub, fine // sub, 2).sum(axis=1) / math.sqrt(fine // sub)
            err[k] += (drift_from_normals(m, s, sub, zc).values1[-1] - ref) ** 2
    err /= R
    assert np.all(np.diff(err) < 0)
    ratios = err[:-1] / err[1:]
    assert np.all(ratios > 1.5), ratios


def test_cell_cholesky_degenerate_and_failure():
    L11, L21, L22 = cell_cholesky([1.0, 0.0], [1.0, 0.0], [1.0, 0.0])
    assert np.allclose(L11, [1, 0]) and np.allclose(L21, [1, 0]) and np.allclose(L22, [0, 0])
    with pytest.raises(SimulationError, match="t=0.25"):
        cell_cholesky([1.0], [2.0], [1.0], lo=[0.25])


def test_csv_output():
    s = SamplingScheme(Partition([0, 0.5, 1]), Partition([0, 1]))
    path = ObservedPath.from_increments(s, [1.0, -0.5], [2.0])
    lines = path.to_csv().splitlines()
    assert lines[0] == "time,series,value"
    assert len(lines) - 1 == s.N1 + s.N2 + 2
    assert lines[1:] == ["0.0,1,0.0", "0.5,1,1.0", "1.0,1,0.5", "0.0,2,0.0", "1.0,2,2.0"]
