import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyexpand.asymptotics import (
    LEMMAS,
    asymptotic_constants,
    c_from_measures,
    compute_A,
    compute_c,
    compute_kappa,
    estimate_nu,
    lemma_mc,
    lemma_oracles,
    poisson_limit_measures,
)
from hyexpand.model import Constant, DriftSpec, Linear, ModelSpec, Sinusoidal

from conftest import models


def test_c_examples():
    assert compute_c(ModelSpec.constant(1, 1, 0.0), 1, 1) == pytest.approx(4.0, abs=1e-12)
    assert compute_c(ModelSpec.constant(1, 1, 1.0), 1, 1) == pytest.approx(7.0, abs=1e-12)
    assert compute_c(ModelSpec.constant(1, 1, 0.5), 1, 1) == pytest.approx(4.75, abs=1e-12)


@given(models(), st.floats(0.2, 5.0), st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_c_scales_with_sigma1_squared(m, s, p1, p2):
    scaled = ModelSpec(_scale(m.sigma1, s), m.sigma2, m.rho)
    assert compute_c(scaled, p1, p2) == pytest.approx(s * s * compute_c(m, p1, p2), rel=1e-9)


def _scale(curve, s):
    if isinstance(curve, Constant):
        return Constant(s * curve.value)
    if isinstance(curve, Linear):
        return Linear(s * curve.intercept, s * curve.slope)
    if isinstance(curve, Sinusoidal):
        return Sinusoidal(s * curve.mean, s * curve.amplitude, curve.frequency, curve.phase)
    raise TypeError(curve)


def test_kappa_examples():
    assert compute_kappa(ModelSpec.constant(1, 1, 0.0), 1, 1) == 0.0
    assert compute_kappa(ModelSpec.constant(1, 1, 1.0), 1, 1) == pytest.approx(10.0, abs=1e-12)
    assert compute_kappa(ModelSpec.constant(1, 1, 0.5), 1, 1) == pytest.approx(4.25, abs=1e-12)


@given(models(), st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_kappa_odd_in_rho(m, p1, p2):
    flipped = ModelSpec(m.sigma1, m.sigma2, _neg(m.rho))
    assert compute_kappa(flipped, p1, p2) == pytest.approx(-compute_kappa(m, p1, p2), rel=1e-9, abs=1e-12)


def _neg(curve):
    from hyexpand.model import PiecewiseLinear
    if isinstance(curve, PiecewiseLinear):
        return PiecewiseLinear(curve.times, tuple(-v for v in curve.values))
    return _scale(curve, -1.0)


def test_A_examples():
    assert compute_A(ModelSpec.constant(1, 1, 0.3), 1, 1) == 0.0
    assert compute_A(ModelSpec.constant(1, 1, 0.3, drift=DriftSpec()), 1, 1) == 0.0
    m = ModelSpec.constant(1.7, 0.4, 0.3, drift=DriftSpec.constant(1.0, 1.0))
    assert compute_A(m, 1, 1) == pytest.approx(4.0, abs=1e-12)
    c = 0.8
    drift = DriftSpec(beta_diff=((Constant(0.0), Constant(c)), (Constant(0.0), Constant(0.0))))
    m = ModelSpec.constant(1.3, 1.0, 0.0, drift=drift)
    assert compute_A(m, 1, 1) == pytest.approx(2 * c, abs=1e-12)
    m = ModelSpec.constant(1, 1, 0.8, drift=DriftSpec.constant(2.0, 2.0))
    assert compute_A(m, 1, 1) == pytest.approx(16.0, abs=1e-12)


def test_A_with_random_beta():
    # beta1 = B1 (diffusive), beta2 = 1: E[beta1 beta2] = 0, sigma2 rho term survives
    drift = DriftSpec(beta0=(0.0, 1.0), beta_diff=((Constant(1.0), Constant(0.0)), (Constant(0.0), Constant(0.0))))
    m = ModelSpec.constant(1.0, 2.0, 0.5, drift=drift)
    assert compute_A(m, 1, 1) == pytest.approx(2 * (2.0 * 0.5), abs=1e-10)


def test_invalid_intensities():
    with pytest.raises(ValueError):
        compute_c(ModelSpec.constant(), 0.0, 1.0)


def test_limit_measure_densities():
    lm = poisson_limit_measures(1.0, 1.0)
    assert lm.V_IJ == 4.0 and lm.V_IcapJ == 1.0
    assert lm.V_I == lm.V_J == 2.0
    assert lm.nu is None


@given(models(), st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_c_from_measures_matches(m, p1, p2):
    lm = poisson_limit_measures(p1, p2)
    assert c_from_measures(m, lm) == pytest.approx(compute_c(m, p1, p2), rel=1e-10)


def test_sum_of_squared_intervals_on_unit_interval():
    # n sum |I|^2 over [0, 1] tends to 2 / p1
    n, p1, R = 10_000, 1.0, 400
    rng = np.random.default_rng(5)
    vals = np.empty(R)
    for r in range(R):
        t = np.cumsum(rng.standard_exponential(int(n * p1 * 1.2)) / (n * p1))
        bp = np.r_[0.0, t[t < 1.0], 1.0]
        vals[r] = n * np.sum(np.diff(bp) ** 2)
    se = vals.std(ddof=1) / math.sqrt(R)
    assert abs(vals.mean() - 2 / p1) < 3 * se


def test_lemma_closed_forms():
    assert lemma_oracles("A2", {"lam": 1.0, "length": 1.0}) == pytest.approx(2 / math.e, abs=1e-12)
    assert lemma_oracles("A2", {"lam": 1.0}) == pytest.approx(0.735759, abs=1e-6)
    assert lemma_oracles("A3", {"lam1": 1.0, "lam2": 1.0}) == pytest.approx(2.5)
    for T in (1.0, 3.0):
        assert lemma_oracles("A4a", {"lam": 2.0, "a": 0.0, "b": T, "T": T}) == pytest.approx(T)
    # A1 series: sum lam^k / (k! (k + 2))
    lam = 1.5
    series = math.fsum(lam ** k / (math.factorial(k) * (k + 2)) for k in range(60))
    assert lemma_oracles("A1", {"lam": lam}) == pytest.approx(series, rel=1e-13)
    assert lemma_oracles("A5", {"p": 2.0}) == 1.0
    assert lemma_oracles("A7", {"p1": 1.0, "p2": 1.0}) == 20.0
    with pytest.raises(ValueError):
        lemma_oracles("A9", {})
    with pytest.raises(ValueError):
        lemma_oracles("A3", {"lam1": 1.0})


@pytest.mark.parametrize("name,params", [
    ("A1", {"lam": 1.5}),
    ("A1.5", {"lam": 2.0}),
    ("A2", {"lam": 1.0, "length": 1.0}),
    ("A3", {"lam1": 1.0, "lam2": 2.0}),
    ("A4a", {"lam": 5.0, "a": 0.2, "b": 0.5, "T": 1.0}),
    ("A4b", {"lam": 5.0, "a": 0.2, "b": 0.5, "T": 1.0}),
    ("A5", {"p": 1.0, "t": 1.0, "n": 50}),
    ("A7", {"p1": 1.0, "p2": 2.0, "T": 1.0, "n": 50}),
])
def test_lemma_mc_small(name, params):
    mean, se = lemma_mc(name, params, replicates=20_000, seed=17)
    assert abs(mean - lemma_oracles(name, params)) < 3.5 * se
    assert name in LEMMAS


def test_lemma_mc_reproducible():
    assert lemma_mc("A2", {"lam": 1.0}, 5000, seed=3) == lemma_mc("A2", {"lam": 1.0}, 5000, seed=3)


def test_nu_estimate():
    nu, se = estimate_nu(1.0, 1.0, n=50, replicates=300, seed=1)
    assert nu > 0 and 0 < se < 0.1 * nu
    lm = poisson_limit_measures(1.0, 1.0, nu_replicates=300, seed=1, n=50)
    assert (lm.nu, lm.nu_se) == (nu, se)


def test_asymptotic_constants_bundle():
    k = asymptotic_constants(ModelSpec.constant(1, 1, 0.5), 1.0, 1.0)
    assert (k.c, k.kappa, k.A) == pytest.approx((4.75, 4.25, 0.0))
    assert k.to_dict()["p1"] == 1.0
