import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsavae.decompose import (autocorrelation, decompose_additive, estimate_period, seasonal_operator,
                              seasonal_profile)


def _interior(period):
    return slice(period, -period)


def test_sine_matches_closed_form():
    t = np.arange(240)
    s = np.sin(2 * np.pi * t / 12)
    r = decompose_additive(s, 12)
    inner = _interior(12)
    assert np.max(np.abs(r.seasonal[inner] - s[inner])) < 0.02
    assert np.max(np.abs(r.trend[inner])) < 0.02
    assert np.max(np.abs(r.residual[inner])) < 0.05
    assert np.max(np.abs(seasonal_profile(r.seasonal, 12) - s[:12])) < 0.02


@pytest.mark.parametrize("period", [2, 5, 12])
def test_affine_series_has_no_seasonal(period):
    t = np.arange(10 * period, dtype=float)
    r = decompose_additive(3 + 0.5 * t, period)
    assert np.max(np.abs(r.seasonal)) < 1e-9
    np.testing.assert_allclose(r.trend, 3 + 0.5 * t, atol=1e-9)


@given(st.integers(2, 30), st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_additive_identity_and_periodicity(period, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=2 * period + rng.integers(0, 200)).cumsum()
    r = decompose_additive(x, period)
    rel = np.max(np.abs(r.trend + r.seasonal + r.residual - x)) / max(np.max(np.abs(x)), 1e-300)
    assert rel < 1e-12
    # seasonal is exactly the tiled profile
    assert np.array_equal(r.seasonal, r.profile[np.arange(x.size) % period])
    assert abs(r.profile.mean()) < 1e-9


def test_pure_phase_means_leave_no_residual():
    profile = np.array([1.0, -2.0, 0.5, 0.5])
    x = np.tile(profile, 20)
    r = decompose_additive(x, 4)
    assert np.max(np.abs(r.residual[_interior(4)])) < 1e-9


def test_constant_shift_moves_trend_only():
    x = np.random.default_rng(0).normal(size=120).cumsum()
    a, b = decompose_additive(x, 7), decompose_additive(x + 13.0, 7)
    np.testing.assert_allclose(b.trend[_interior(7)] - a.trend[_interior(7)], 13.0, atol=1e-9)
    np.testing.assert_allclose(b.seasonal, a.seasonal, atol=1e-9)


def test_column_wise_on_matrices():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(60, 3))
    r = decompose_additive(x, 6)
    for j in range(3):
        np.testing.assert_array_equal(r.seasonal[:, j], decompose_additive(x[:, j], 6).seasonal)


def test_seasonal_operator_reproduces_decomposition():
    x = np.random.default_rng(2).normal(size=50)
    np.testing.assert_allclose(seasonal_operator(50, 5) @ x, decompose_additive(x, 5).seasonal, atol=1e-12)


def test_argument_errors():
    with pytest.raises(ValueError):
        decompose_additive(np.arange(10.0), 1)
    with pytest.raises(ValueError):
        decompose_additive(np.arange(10.0), 6)


def test_profile_examples():
    prof = np.array([1.0, -1.0, 2.0, -2.0])
    assert np.allclose(seasonal_profile(np.tile(prof, 5), 4), prof, atol=1e-12)
    assert np.all(seasonal_profile(np.zeros(12), 4) == 0)


def test_estimate_period_examples():
    t = np.arange(600)
    assert estimate_period(np.sin(2 * np.pi * t / 12), (5, 12, 30)) == 12
    noise = np.random.default_rng(0).normal(size=600)
    assert max(autocorrelation(noise, lag) for lag in (5, 7, 10, 14)) < 0.1
    assert estimate_period(noise, (5, 7)) == 5
    assert estimate_period(noise, (12,)) == 12
    with pytest.raises(ValueError):
        estimate_period(noise, ())
    with pytest.raises(ValueError):
        estimate_period(noise[:20], (12,))
