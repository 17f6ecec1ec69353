import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyexpand.cumulants import (
    MU3_FLOOR,
    CumulantReport,
    build_quadform,
    char_fn,
    char_fn_expansion_bound,
    chain_cumulants,
    cumulant_of_standardized,
    cumulant_report,
    eigenvalues,
    mu2_chains,
    mu2_intervals,
    mu3_chains,
    mu3_intervals,
    mu_k_trace,
    normalized_cumulants,
    tail_bound,
)
from hyexpand.model import ModelSpec, theta
from hyexpand.sampling import Partition, SamplingScheme, generate_poisson, generate_uniform

from conftest import models, schemes

ONE = SamplingScheme(Partition([0, 1]), Partition([0, 1]))
SYNC4 = SamplingScheme(generate_uniform(4), generate_uniform(4))


def test_single_pair_quadform():
    qf = build_quadform(ModelSpec.constant(1, 1, 0.5), ONE)
    assert np.allclose(qf.A, [[0, 0.5], [0.5, 0]])
    assert np.allclose(qf.Sigma, [[1, 0.5], [0.5, 1]])
    assert mu_k_trace(qf, 1) == pytest.approx(0.5)
    # Sigma A = [[0.25, 0.5], [0.5, 0.25]]
    assert mu_k_trace(qf, 2) == pytest.approx(0.625)


def test_zero_correlation_has_no_cross_block():
    s = generate_poisson(15, 1.0, 1.0, seed=0)
    qf = build_quadform(ModelSpec.constant(1.2, 0.8, 0.0), s)
    assert np.all(qf.Sigma[: s.N1, s.N1:] == 0)


def test_synchronous_remark_values():
    m = ModelSpec.constant(1, 1, 1)
    assert mu2_intervals(m, SYNC4) == pytest.approx(0.25, abs=1e-15)
    assert mu3_intervals(m, SYNC4) == pytest.approx(0.0625, abs=1e-15)
    assert mu2_chains(m, SYNC4) == pytest.approx(0.25, abs=1e-15)
    assert mu3_chains(m, SYNC4) == pytest.approx(0.0625, abs=1e-15)
    qf = build_quadform(m, SYNC4)
    assert mu_k_trace(qf, 2) == pytest.approx(0.25, abs=1e-15)
    assert mu_k_trace(qf, 3) == pytest.approx(0.0625, abs=1e-15)


def test_single_chain():
    m = ModelSpec.constant(1.5, 0.5, -0.3)
    w, v1, v2 = theta(m), 2.25, 0.25
    mu2, _ = chain_cumulants(m, ONE)
    assert mu2 == pytest.approx(0.5 * (w * w + v1 * v2), rel=1e-14)


def test_normalized_cumulants_examples():
    assert normalized_cumulants(0.25, 0.0625, 0.5) == pytest.approx((1.0, 2.0))
    with pytest.raises(ValueError):
        normalized_cumulants(0.25, 0.0625, 0.0)


def test_standardized_cumulant_scaling():
    # kappa_2 of (theta_hat - theta) / sqrt(b) is 2 mu2 / b
    assert cumulant_of_standardized(0.25, 2, 0.5) == pytest.approx(1.0)
    assert cumulant_of_standardized(0.0625, 3, 0.5) == pytest.approx(8 * 0.0625 / 0.5 ** 1.5)


@given(models(), schemes(max_points=15))
def test_three_engines_agree(m, s):
    qf = build_quadform(m, s)
    mu2, mu3 = chain_cumulants(m, s)
    ref2, ref3 = mu_k_trace(qf, 2), mu_k_trace(qf, 3)
    for v in (mu2, mu2_intervals(m, s)):
        assert v == pytest.approx(ref2, rel=1e-9)
    # mu3 may vanish by symmetry; compare on the scale mu2^(3/2) >= |mu3|
    floor = MU3_FLOOR * ref2 ** 1.5
    for v in (mu3, mu3_intervals(m, s)):
        assert abs(v - ref3) <= 1e-9 * max(abs(v), abs(ref3), floor)


@given(models(), schemes(max_points=15))
def test_trace_is_theta(m, s):
    assert mu_k_trace(build_quadform(m, s), 1) == pytest.approx(theta(m), rel=1e-10, abs=1e-13)


@given(models(), schemes(max_points=15))
def test_eigenvalues_reproduce_traces(m, s):
    qf = build_quadform(m, s)
    lam = eigenvalues(qf)
    for k in (1, 2, 3):
        assert np.sum(lam ** k) == pytest.approx(mu_k_trace(qf, k), rel=1e-8, abs=1e-12)
    mu4 = mu_k_trace(qf, 4)
    for k in (2, 3, 4):
        assert mu_k_trace(qf, 2 * k) <= mu4 ** (k / 2) * (1 + 1e-9) + 1e-300


@given(models(), schemes(max_points=15))
def test_report_bounds_hold(m, s):
    rep = cumulant_report(m, s)
    assert rep.eigen_bound_slack >= 0
    assert rep.cumulant_bound_slack["3"] >= 0 and rep.cumulant_bound_slack["4"] >= 0
    assert rep.max_rel_disagreement < 1e-9


def test_report_json_round_trip():
    rep = cumulant_report(ModelSpec.constant(1, 1, 0.5), generate_poisson(30, 1.0, 2.0, seed=1))
    back = CumulantReport.from_json(rep.to_json())
    assert back == rep


def test_char_fn_examples():
    assert char_fn([0.3, -0.2], 0.1, 0.0) == 1.0
    val = char_fn([0.5], 0.0, 1.0)
    assert val == pytest.approx((1 - 1j) ** -0.5)
    assert abs(val) == pytest.approx(2 ** -0.25)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=20), st.floats(-5, 5))
def test_char_fn_modulus(lam, u):
    lam = np.array(lam)
    expected = np.prod((1 + 4 * u * u * lam ** 2) ** -0.25)
    assert abs(char_fn(lam, float(lam.sum()), u)) == pytest.approx(expected, rel=1e-10)


def test_char_fn_matches_monte_carlo():
    lam = np.array([0.4, -0.3, 0.1])
    rng = np.random.default_rng(3)
    xi = rng.standard_normal((200_000, 3))
    q = (xi ** 2) @ lam - lam.sum()
    for u in (0.3, 1.0):
        emp = np.mean(np.exp(1j * u * q))
        assert abs(emp - char_fn(lam, lam.sum(), u)) < 5 / math.sqrt(q.size)


def test_expansion_bound_examples():
    lam = np.full(100, 0.1)
    assert char_fn_expansion_bound(lam, 0.0) == 0.0
    # alpha_bar = 1/sqrt(N): more equal eigenvalues, smaller bound
    assert char_fn_expansion_bound(np.full(400, 0.1), 1.0) < char_fn_expansion_bound(lam, 1.0)
    with pytest.raises(ValueError):
        char_fn_expansion_bound([1.0], 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_expansion_bound_holds(seed):
    m = ModelSpec.constant(1, 1, 0.4)
    lam = eigenvalues(build_quadform(m, generate_poisson(60, 1.0, 1.0, seed=seed)))
    mu2 = float(np.sum(lam ** 2))
    v = 0.5
    lhs = abs(np.log(char_fn(lam, float(lam.sum()), v / math.sqrt(2 * mu2))) + v * v / 2)
    assert char_fn_expansion_bound(lam, v) - lhs > 0


def test_tail_bound_dominates():
    lam = eigenvalues(build_quadform(ModelSpec.constant(1, 1, 0.4), generate_poisson(200, 1.0, 1.0, seed=2)))
    u = np.linspace(0, 50, 101)
    phi = np.abs(char_fn(lam, float(lam.sum()), u))
    assert np.all(phi <= tail_bound(lam, 4, u) * (1 + 1e-12))
    with pytest.raises(ValueError):
        tail_bound([1.0, 0.1], 4, u)
