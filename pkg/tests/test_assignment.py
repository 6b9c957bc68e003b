import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import expit

from factorate.assignment import (
    RandomUtility,
    Rct,
    RegressionDiscontinuity,
    Schedule,
    SelectionOnU,
    StaggeredAdoption,
    adoption_times,
    assign,
    mechanism_diagnostics,
    propensity,
)
from factorate.errors import DimensionError, ValidationError
from factorate.rng import uniform


def factors(n, q=1, seed=0):
    return uniform(seed, "test/u", np.arange(n)[:, None], np.arange(q)[None, :])


def test_rct_certain_treatment():
    assert np.all(assign(Rct(1.0), factors(5), 4) == 1)
    assert np.all(assign(Rct(0.0), factors(5), 4) == 0)


def test_rct_probability_validation():
    with pytest.raises(ValidationError):
        assign(Rct(1.5), factors(3), 2)
    with pytest.raises(DimensionError):
        assign(Rct((0.5, 0.5)), factors(3), 3)


def test_rct_per_measurement_probabilities():
    a = assign(Rct((0.0, 1.0, 0.5)), factors(400), 3, seed=1)
    assert a[:, 0].sum() == 0 and a[:, 1].sum() == 400
    assert 0.4 < a[:, 2].mean() < 0.6


def test_rct_treated_fraction():
    a = assign(Rct(0.5), factors(1000), 20, seed=3)
    frac = mechanism_diagnostics(Rct(0.5), a, factors(1000))["treated_fraction"]
    assert all(0.44 <= f <= 0.56 for f in frac)


def test_rct_exogeneity():
    worst = 0.0
    for seed in range(200):
        u = factors(500, seed=seed)
        a = assign(Rct(0.5), u, 3, seed=seed)
        for t in range(3):
            worst = max(worst, abs(np.corrcoef(u[:, 0], a[:, t])[0, 1]))
    assert worst <= 0.15


def test_regression_discontinuity_example():
    u = np.array([[0.7], [0.2]])
    a = assign(RegressionDiscontinuity(0.5), u, 4)
    assert np.all(a[0] == 1) and np.all(a[1] == 0)


def test_regression_discontinuity_deterministic():
    u = factors(50)
    mech = RegressionDiscontinuity(threshold=0.4)
    assert np.array_equal(assign(mech, u, 6, seed=1), assign(mech, u, 6, seed=2))


def test_selection_on_u_correlation_matches_quadrature():
    mech = SelectionOnU(slope=4.0, center=0.5)

    def p(x):
        return expit(4.0 * (x - 0.5))

    mean_a = quad(p, 0, 1)[0]
    mean_ua = quad(lambda x: x * p(x), 0, 1)[0]
    analytic = (mean_ua - 0.5 * mean_a) / (np.sqrt(1 / 12) * np.sqrt(mean_a * (1 - mean_a)))
    u = factors(2000, seed=17)
    a = assign(mech, u, 1, seed=17)
    empirical = np.corrcoef(u[:, 0], a[:, 0])[0, 1]
    assert abs(empirical - analytic) <= 0.05


def test_selection_weights_dimension_check():
    with pytest.raises(DimensionError):
        assign(SelectionOnU(weights=(1.0, 1.0)), factors(4, q=3), 2)


def test_rum_without_noise_equals_rd():
    u = factors(100, q=2, seed=4)
    w = (1.0, -0.5)
    rum = RandomUtility(weights=w, intercept=0.0, noise="none", threshold=0.1)
    rd = RegressionDiscontinuity(threshold=0.1, weights=w)
    assert np.array_equal(assign(rum, u, 7, seed=9), assign(rd, u, 7))


@pytest.mark.parametrize("noise", ["logistic", "gaussian"])
def test_rum_treated_fraction_follows_propensity(noise):
    u = factors(4000, seed=2)
    mech = RandomUtility(noise=noise, threshold=0.5)
    a = assign(mech, u, 2, seed=5)
    assert abs(a.mean() - propensity(mech, u, 2).mean()) < 0.03


def test_rum_validation():
    with pytest.raises(ValidationError):
        RandomUtility(noise="cauchy")


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 5),
    st.floats(0.3, 1.2),
    st.floats(-0.2, 0.5),
    st.integers(2, 30),
    st.integers(0, 2**32),
)
def test_staggered_adoption_is_absorbing(start, high, low, T, seed):
    u = factors(60, q=2, seed=seed)
    mech = StaggeredAdoption(start=start, theta_high=high, theta_low=low, weights=(0.5, 0.5))
    a = assign(mech, u, T, seed=seed)
    assert np.all(np.diff(a, axis=1) >= 0)
    report = mechanism_diagnostics(mech, a, u)
    assert all(x <= y for x, y in zip(report["adopted_by"], report["adopted_by"][1:]))
    times = np.array(report["adoption_time"])
    for n in range(60):
        if times[n] >= 0:
            assert a[n, times[n]] == 1 and a[n, : times[n]].sum() == 0
        else:
            assert a[n].sum() == 0


def test_staggered_nothing_before_start():
    a = assign(StaggeredAdoption(start=10), factors(40), 20)
    assert a[:, :10].sum() == 0
    assert a[:, 10:].sum() > 0


def test_schedule_pins_common_block():
    a = assign(Rct(0.5), factors(30), 10, seed=1, schedule=Schedule(n_common=6, treated_every=3))
    for t in range(6):
        assert np.all(a[:, t] == (1 if t % 3 == 2 else 0))
    with pytest.raises(DimensionError):
        assign(Rct(0.5), factors(3), 4, schedule=Schedule(n_common=4))
    with pytest.raises(ValidationError):
        Schedule(n_common=-1)


def test_all_control_diagnostics():
    a = np.zeros((5, 3), dtype=int)
    report = mechanism_diagnostics(Rct(0.0), a, factors(5))
    assert report["treated_fraction"] == [0.0, 0.0, 0.0]
    assert report["overlap_violations"] == 15


def test_adoption_times():
    a = np.array([[0, 1, 1], [0, 0, 0], [1, 1, 1]])
    assert adoption_times(a).tolist() == [1, -1, 0]
