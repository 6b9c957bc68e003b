import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from factorate.errors import DimensionError, RangeError, ValidationError
from factorate.linalg import (
    max_error_curve,
    min_norm_least_squares,
    numerical_rank,
    rank_r_max_error,
    svd,
    truncate,
    truncated_pinv,
)
from oracles import jacobi_singular_values, normal_equations

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(1, 7), st.integers(1, 7)).flatmap(
    lambda shape: arrays(np.float64, shape, elements=finite)
)


def rand(shape, seed=0):
    return np.random.default_rng(seed).standard_normal(shape)


def test_identity_singular_values():
    np.testing.assert_allclose(svd(np.eye(3)).s, [1, 1, 1])


def test_rank_one_singular_values():
    m = np.outer([1, 2], [1, 1])
    np.testing.assert_allclose(svd(m).s, [np.sqrt(10), 0], atol=1e-12)


def test_singular_values_match_jacobi_oracle():
    m = rand((5, 4), seed=42)
    np.testing.assert_allclose(svd(m).s, jacobi_singular_values(m), atol=1e-8)


@pytest.mark.parametrize("shape", [(3, 6), (8, 2), (5, 5)])
def test_jacobi_oracle_other_shapes(shape):
    m = rand(shape, seed=sum(shape))
    np.testing.assert_allclose(svd(m).s, jacobi_singular_values(m), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_factor_invariants(m):
    f = svd(m)
    k = min(m.shape)
    assert len(f) == k
    assert np.all(f.s >= 0) and np.all(np.diff(f.s) <= 1e-12)
    scale = max(1.0, float(np.abs(m).max()))
    assert np.abs(f.reconstruct() - m).max() <= 1e-8 * scale
    np.testing.assert_allclose(f.v.T @ f.v, np.eye(k), atol=1e-10)
    np.testing.assert_allclose(f.u.T @ f.u, np.eye(k), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(matrices)
def test_sign_convention(m):
    f = svd(m)
    for j in range(len(f)):
        col = f.u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            assert col[nz[0]] >= 0


def test_svd_is_deterministic():
    m = rand((6, 4), seed=3)
    a, b = svd(m), svd(m)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v) and np.array_equal(a.s, b.s)


def test_svd_rejects_bad_input():
    with pytest.raises(DimensionError):
        svd(np.zeros((0, 3)))
    with pytest.raises(DimensionError):
        svd(np.zeros(3))
    with pytest.raises(ValidationError):
        svd(np.array([[1.0, np.nan]]))
    with pytest.raises(ValidationError):
        svd(np.array([[np.inf]]))


def test_truncate_full_rank_identity():
    np.testing.assert_allclose(truncate(svd(np.eye(3)), 3), np.eye(3), atol=1e-10)


def test_truncate_exact_rank_two():
    m = rand((5, 2), 1) @ rand((2, 4), 2)
    np.testing.assert_allclose(truncate(svd(m), 2), m, atol=1e-10)


def test_truncate_frobenius_error_is_dropped_singular_value():
    m = rand((4, 3), seed=7)
    f = svd(m)
    err = np.linalg.norm(m - truncate(f, 2))
    assert abs(err - f.s[2]) <= 1e-8


def test_truncate_zero_and_out_of_range():
    f = svd(rand((3, 3)))
    assert np.array_equal(truncate(f, 0), np.zeros((3, 3)))
    with pytest.raises(RangeError):
        truncate(f, 4)


def test_eckart_young_spot_check():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((8, 6))
    k = 2
    best = np.linalg.norm(m - truncate(svd(m), k))
    for _ in range(100):
        cand = rng.standard_normal((8, k)) @ rng.standard_normal((k, 6))
        assert best <= np.linalg.norm(m - cand) + 1e-8
    # perturbing the optimum never helps either
    base = truncate(svd(m), k)
    f = svd(base)
    for _ in range(100):
        cand = truncate(svd(base + 0.1 * rng.standard_normal(base.shape)), k)
        assert best <= np.linalg.norm(m - cand) + 1e-8
    assert f.s[k:].max() < 1e-10


def test_pinv_identity_and_zero_skipping():
    np.testing.assert_allclose(truncated_pinv(svd(np.eye(3)), 3), np.eye(3))
    got = truncated_pinv(svd(np.diag([2.0, 0.0])), 2, zero_tol=1e-12)
    np.testing.assert_allclose(got, np.diag([0.5, 0.0]))


def test_pinv_moore_penrose_identities():
    a = rand((6, 4), seed=11)
    p = truncated_pinv(svd(a), 4)
    np.testing.assert_allclose(p @ a @ p, p, atol=1e-8)
    np.testing.assert_allclose(a @ p @ a, a, atol=1e-8)
    np.testing.assert_allclose(p, np.linalg.pinv(a), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(matrices)
def test_pinv_penrose_property(m):
    f = svd(m)
    p = truncated_pinv(f, len(f))
    scale = max(1.0, float(np.abs(m).max()))
    assert np.abs(m @ p @ m - m).max() <= 1e-7 * scale
    assert np.allclose((m @ p).T, m @ p, atol=1e-7)


def test_min_norm_examples():
    np.testing.assert_allclose(min_norm_least_squares(np.eye(2), [3, 1]), [3, 1])
    np.testing.assert_allclose(min_norm_least_squares([[1.0, 1.0]], [2]), [1, 1])


def test_min_norm_matches_normal_equations():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((8, 3))
    y = rng.standard_normal(8)
    np.testing.assert_allclose(min_norm_least_squares(x, y), normal_equations(x, y), atol=1e-8)


def test_min_norm_dimension_mismatch():
    with pytest.raises(DimensionError):
        min_norm_least_squares(np.eye(3), [1, 2])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_min_norm_recovers_consistent_system(rows, cols, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((rows, cols))
    beta0 = rng.standard_normal(cols)
    beta = min_norm_least_squares(x, x @ beta0)
    assert np.linalg.norm(x @ beta - x @ beta0) <= 1e-8 * max(1, np.linalg.norm(x @ beta0))
    assert np.linalg.norm(beta) <= np.linalg.norm(beta0) + 1e-8


def test_rank_r_max_error_examples():
    m = rand((6, 2), 4) @ rand((2, 5), 5)
    assert rank_r_max_error(m, 2) <= 1e-10
    full = rand((5, 4), 6)
    assert rank_r_max_error(full, 4) <= 1e-8
    with pytest.raises(RangeError):
        rank_r_max_error(full, 5)
    with pytest.raises(RangeError):
        rank_r_max_error(full, 0)


def test_rank_r_max_error_logistic_matrix():
    from factorate.dgp import BinaryChoice, DgpConfig, binary_choice_mean, flatten, sample_unit_factors

    cfg = DgpConfig(100, 100, 1, BinaryChoice())
    flat = flatten(binary_choice_mean(cfg, sample_unit_factors(cfg)))
    assert rank_r_max_error(flat, 6) < rank_r_max_error(flat, 2)


@settings(max_examples=40, deadline=None)
@given(matrices)
def test_rank_r_max_error_nonincreasing(m):
    k = min(m.shape)
    vals = [rank_r_max_error(m, r) for r in range(1, k + 1)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= 1e-8 * max(1.0, float(np.abs(m).max()))


def test_max_error_curve_is_raw():
    m = rand((6, 5), 9)
    curve = max_error_curve(m)
    f = svd(m)
    for r in range(1, 6):
        assert curve[r - 1] == pytest.approx(np.abs(m - truncate(f, r)).max(), abs=1e-12)


def test_numerical_rank():
    assert numerical_rank(np.array([3.0, 1e-3, 1e-12])) == 2
    assert numerical_rank(np.array([0.0, 0.0])) == 0
    assert numerical_rank(np.array([])) == 0
