import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from factorate import rng


def test_uniform_range_and_determinism():
    a = rng.uniform(7, "x", np.arange(1000))
    b = rng.uniform(7, "x", np.arange(1000))
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() < 1


def test_draws_do_not_depend_on_batch_shape():
    full = rng.uniform(3, "tag", np.arange(20)[:, None], np.arange(5)[None, :])
    single = np.array([[rng.uniform(3, "tag", n, t) for t in range(5)] for n in range(20)])
    assert np.array_equal(full, single)


def test_prefix_stability():
    small = rng.normal(1, "noise", np.arange(10))
    large = rng.normal(1, "noise", np.arange(100))
    assert np.array_equal(small, large[:10])


def test_tags_and_seeds_separate_streams():
    base = rng.uniform(0, "a", np.arange(500))
    assert not np.array_equal(base, rng.uniform(0, "b", np.arange(500)))
    assert not np.array_equal(base, rng.uniform(1, "a", np.arange(500)))
    assert abs(np.corrcoef(base, rng.uniform(0, "b", np.arange(500)))[0, 1]) < 0.2


def test_normal_moments_and_tails():
    z = rng.normal(11, "moments", np.arange(100_000))
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1) < 0.02
    assert np.mean(np.abs(z) > 3) <= 0.005


def test_logistic_is_finite_and_symmetric():
    x = rng.logistic(2, "l", np.arange(50_000))
    assert np.all(np.isfinite(x))
    assert abs(np.median(x)) < 0.05
    # logistic variance is pi^2 / 3
    assert abs(x.var() - np.pi**2 / 3) < 0.1


@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 10_000), min_size=1, max_size=3))
def test_derive_seed_is_pure_and_in_range(seed, path):
    s = rng.derive_seed(seed, *path)
    assert s == rng.derive_seed(seed, *path)
    assert 0 <= s < 2**64


def test_derive_seed_distinct_children():
    seeds = {rng.derive_seed(0, i, j) for i in range(20) for j in range(50)}
    assert len(seeds) == 1000
