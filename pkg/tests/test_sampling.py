import numpy as np
import pytest
from hypothesis import given
from scipy import stats

from hyexpand.sampling import (
    Partition,
    SamplingScheme,
    generate_poisson,
    generate_uniform,
    mesh,
    overlaps,
    partition_from_gaps,
    refine,
)

from conftest import schemes


def brute_overlap(scheme):
    s, t = scheme.pi1.breakpoints, scheme.pi2.breakpoints
    return np.array([[s[i] < t[j + 1] and t[j] < s[i + 1] for j in range(scheme.N2)]
                     for i in range(scheme.N1)])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_poisson_count(seed):
    s = generate_poisson(1000, 1.0, 1.0, seed=seed)
    assert abs(s.N1 - 1 - 1000) <= 4 * np.sqrt(1000)
    assert s.pi1.T == 1.0 and s.pi2.T == 1.0


def test_poisson_tiny_intensity_is_trivial():
    s = generate_poisson(1, 1e-4, 1e-4, seed=3)
    assert s.N1 == 1 and s.N2 == 1


def test_poisson_gaps_are_exponential():
    s = generate_poisson(10_000, 1.0, 1.0, seed=11)
    gaps = np.diff(s.pi1.breakpoints)[:-1]  # last gap is clipped at T
    assert stats.kstest(gaps, "expon", args=(0, 1e-4)).pvalue > 0.01


def test_poisson_reproducible():
    a = generate_poisson(300, 1.0, 2.0, seed=42)
    b = generate_poisson(300, 1.0, 2.0, seed=42)
    assert np.array_equal(a.pi1.breakpoints, b.pi1.breakpoints)
    assert np.array_equal(a.pi2.breakpoints, b.pi2.breakpoints)


def test_partition_from_gaps():
    p = partition_from_gaps(np.array([0.5, 0.5, 1.0, 5.0]), 2.0, 1.0)
    assert np.allclose(p.breakpoints, [0, 0.25, 0.5, 1.0])
    with pytest.raises(ValueError):
        partition_from_gaps(np.array([0.1, 0.1]), 1.0, 1.0)


def test_uniform():
    assert np.allclose(generate_uniform(4).breakpoints, [0, 0.25, 0.5, 0.75, 1])
    assert np.array_equal(generate_uniform(1, 2.0).breakpoints, [0, 2.0])
    for N in (1, 3, 10, 77):
        s = SamplingScheme(generate_uniform(N), generate_uniform(N))
        assert mesh(s) == pytest.approx(1 / N)


def test_mesh_examples():
    assert mesh(SamplingScheme(Partition([0, 0.3, 1]), Partition([0, 0.5, 1]))) == pytest.approx(0.7)
    assert mesh(SamplingScheme(generate_uniform(10), generate_uniform(10))) == pytest.approx(0.1)


def test_partition_validation():
    for bad in ([0.0], [0.1, 1.0], [0, 0.5, 0.5, 1], [0, 0.7, 0.3, 1]):
        with pytest.raises(ValueError):
            Partition(bad)
    with pytest.raises(ValueError):
        SamplingScheme(Partition([0, 1]), Partition([0, 2]))
    p = Partition([0, 0.5, 1])
    with pytest.raises(ValueError):
        p.breakpoints[1] = 0.2


def test_overlaps_identical_partitions():
    s = SamplingScheme(generate_uniform(6), generate_uniform(6))
    K = overlaps(s).dense()
    assert np.array_equal(K, np.eye(6, dtype=bool))


def test_overlaps_single_interval():
    ov = overlaps(SamplingScheme(Partition([0, 1]), Partition([0, 0.5, 1])))
    assert ov.dense().tolist() == [[True, True]]


def test_overlaps_shared_endpoint_is_not_overlap():
    ov = overlaps(SamplingScheme(Partition([0, 0.5, 1]), Partition([0, 0.5, 1])))
    assert ov.n_pairs == 2


@given(schemes())
def test_overlaps_match_brute_force(s):
    ov = overlaps(s)
    K = brute_overlap(s)
    assert np.array_equal(ov.dense(), K)
    assert np.array_equal(ov.counts_per_i(), K.sum(axis=1))
    assert np.array_equal(ov.counts_per_j(), K.sum(axis=0))
    assert ov.n_pairs == K.sum()


def test_refine_leaves_interleaved_scheme_unchanged():
    s = SamplingScheme(Partition([0, 0.2, 0.5, 0.8, 1]), Partition([0, 0.1, 0.3, 0.6, 0.9, 1]))
    r = refine(s)
    assert np.array_equal(r.pi1.breakpoints, s.pi1.breakpoints)
    assert np.array_equal(r.pi2.breakpoints, s.pi2.breakpoints)


def test_refine_collapses_nested_grid():
    r = refine(SamplingScheme(generate_uniform(10), Partition([0, 1])))
    assert np.array_equal(r.pi1.breakpoints, [0, 1])
    assert overlaps(r).counts_per_i().max() <= 3


@given(schemes())
def test_refine_properties(s):
    r = refine(s)
    ov = overlaps(r)
    assert ov.counts_per_i().max() <= 3 and ov.counts_per_j().max() <= 3
    assert mesh(r) == mesh(s)
    # coarsening keeps a subset of the original breakpoints
    assert set(r.pi1.breakpoints) <= set(s.pi1.breakpoints)
    assert set(r.pi2.breakpoints) <= set(s.pi2.breakpoints)


@given(schemes())
def test_refine_idempotent(s):
    r = refine(s)
    rr = refine(r)
    assert np.array_equal(rr.pi1.breakpoints, r.pi1.breakpoints)
    assert np.array_equal(rr.pi2.breakpoints, r.pi2.breakpoints)


@given(schemes())
def test_swap_and_json_round_trip(s):
    assert s.swap().swap() == s
    assert SamplingScheme.from_json(s.to_json()) == s


def test_save_load(tmp_path):
    s = generate_poisson(50, 1.0, 0.5, seed=9)
    s.save(tmp_path / "scheme.json")
    assert SamplingScheme.load(tmp_path / "scheme.json") == s
