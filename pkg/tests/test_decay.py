import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blackstock import GridFunction, NormSeries, PdeParams, SpectralDomain, compare_omega0, fit_decay, sobolev_norm
from blackstock.errors import ChannelUnderflowError, ConfigError
from blackstock.linear import FieldSeries


def test_pure_exponential():
    t = np.linspace(0, 30, 3001)
    fit = fit_decay(t, 3 * np.exp(-0.5 * t), window=(5, 30))
    assert abs(fit.rate - 0.5) < 1e-10
    assert abs(fit.intercept - 3) < 1e-10
    assert abs(fit.r2 - 1) < 1e-10
    assert fit.method == "direct"


def test_two_exponentials():
    t = np.linspace(0, 30, 3001)
    fit = fit_decay(t, 3 * np.exp(-0.5 * t) + 0.01 * np.exp(-2 * t), window=(10, 30))
    assert abs(fit.rate - 0.5) < 1e-3


def test_oscillating_norm_uses_envelope():
    t = np.linspace(0, 40, 8001)
    y = np.exp(-0.3 * t) * (1.2 + np.cos(2 * t))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = fit_decay(t, y, window=(5, 40))
    assert fit.method == "envelope"
    assert abs(fit.rate - 0.3) < 1e-3


def test_underflow_suggests_window():
    t = np.linspace(0, 100, 1001)
    with pytest.raises(ChannelUnderflowError) as info:
        fit_decay(t, np.exp(-0.5 * t), window=(5, 100))
    lo, hi = info.value.suggested_window
    assert lo == 5 and hi < 100 and math.exp(-0.5 * hi) > 1e-14


def test_window_too_small():
    t = np.linspace(0, 1, 11)
    with pytest.raises(ConfigError):
        fit_decay(t, np.exp(-t), window=(0, 1))


def test_sobolev_examples():
    d = SpectralDomain.interval(math.pi, "dirichlet", 16)
    s = GridFunction.mode(d, (1,))
    assert sobolev_norm(s, 0) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-14)
    # (1 + lam)^2 |c|^2 pi / 2 with lam = 1 gives 2 pi
    assert sobolev_norm(s, 2) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)
    assert sobolev_norm(GridFunction.zeros(d), 3) == 0.0
    with pytest.raises(ConfigError):
        sobolev_norm(s, -1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lo=st.floats(0, 3), hi=st.floats(0, 3))
def test_sobolev_monotone_in_order(seed, lo, hi):
    d = SpectralDomain.interval(math.pi, "neumann", 12)
    f = GridFunction(d, np.random.default_rng(seed).standard_normal(12))
    lo, hi = sorted((lo, hi))
    assert sobolev_norm(f, hi) >= sobolev_norm(f, lo) * (1 - 1e-14)


def test_norm_series_channels():
    d = SpectralDomain.interval(math.pi, "dirichlet", 8)
    times = np.array([0.0, 1.0])
    u = np.stack([np.eye(8)[0], 0.5 * np.eye(8)[0]])
    ns = NormSeries.from_fields(FieldSeries(d, times, u, u, u))
    assert ns["L2_norm_u"] == pytest.approx([math.sqrt(math.pi / 2), 0.5 * math.sqrt(math.pi / 2)])
    assert np.all(ns["H2_norm_u"] >= ns["L2_norm_u"])
    assert "state_norm" in ns.channels


def test_compare_omega0_examples():
    d = SpectralDomain.interval(math.pi, "dirichlet", 64)
    assert compare_omega0(0.499, PdeParams(1, 1, 1), d).passed
    assert not compare_omega0(0.30, PdeParams(1, 1, 1), d).passed
    big = compare_omega0(0.101, PdeParams(1, 10, 1), d)
    assert big.passed
    assert big.omega0 == pytest.approx(0.1)
    assert big.mode_rate == pytest.approx((10 - math.sqrt(96)) / 2, rel=1e-12)


def test_fit_line_and_dict():
    t = np.linspace(0, 10, 101)
    fit = fit_decay(t, 2 * np.exp(-t))
    assert np.allclose(fit.line(t), np.log(2) - t)
    assert fit.to_dict()["method"] == "direct"
