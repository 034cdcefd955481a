import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blackstock import (
    GridFunction,
    ProblemData,
    SpectralDomain,
    derived_boundary,
    derived_initial,
    dirichlet_compat,
    heat_higher_compat,
    neumann_compat,
    neumann_mean_compat,
    uniform_times,
)
from blackstock.compat import active_heat_range, fd_weights
from blackstock.errors import BoundaryConditionError, ConfigError

TIMES = uniform_times(0.05, 1e-3)


def _dir(n=32):
    return SpectralDomain.interval(math.pi, "dirichlet", n)


def _neu(n=32):
    return SpectralDomain.interval(math.pi, "neumann", n)


def test_sine_data_pass():
    rep = dirichlet_compat(ProblemData(_dir(), u0=np.sin), TIMES)
    assert rep.passed
    assert all(e.residual < 1e-12 for e in rep.entries if not e.informational)


def test_linear_offset_fails_at_right_end():
    rep = dirichlet_compat(ProblemData(_dir(), u0=lambda x: np.sin(x) + 0.1 * x), TIMES)
    assert rep.failed_ids == ["u0-trace"]
    assert rep.entry("u0-trace").residual == pytest.approx(0.1 * math.pi, rel=1e-12)


def test_neumann_cosine_and_parabola():
    assert neumann_compat(ProblemData(_neu(), u0=np.cos), TIMES).entry("u0-trace").passed
    rep = neumann_compat(ProblemData(_neu(), u0=lambda x: x**2 / 2), TIMES)
    assert "u0-trace" in rep.failed_ids
    assert rep.entry("u0-trace").residual == pytest.approx(math.pi, rel=1e-10)


def test_wrong_domain_rejected():
    with pytest.raises(BoundaryConditionError):
        dirichlet_compat(ProblemData(_neu()), TIMES)
    with pytest.raises(BoundaryConditionError):
        neumann_compat(ProblemData(_dir()), TIMES)


def _consistent(dom, om, k):
    # u*(t, x) = cos(om t) cosh(k x) sin x + t^2 x, everything derived by hand
    u = lambda t, x: np.cos(om * t) * np.cosh(k * x) * np.sin(x) + t * t * x
    lap = lambda t, x: np.cos(om * t) * ((k * k - 1) * np.cosh(k * x) * np.sin(x) + 2 * k * np.sinh(k * x) * np.cos(x))
    ux = lambda t, x: np.cos(om * t) * (k * np.sinh(k * x) * np.sin(x) + np.cosh(k * x) * np.cos(x)) + t * t
    lapx = lambda t, x: np.cos(om * t) * (
        (k * k - 1) * (k * np.sinh(k * x) * np.sin(x) + np.cosh(k * x) * np.cos(x))
        + 2 * k * (k * np.cosh(k * x) * np.cos(x) - np.sinh(k * x) * np.sin(x))
    )
    u0 = lambda x: u(0.0, x)
    u1 = lambda x: 0.0 * x
    u2 = lambda x: -om * om * np.cosh(k * x) * np.sin(x) + 2 * x
    if dom.is_dirichlet:
        g, h = u, lap
    else:
        sign = lambda fn: (lambda t, x: np.where(x == 0, -fn(t, x), fn(t, x)))
        g, h = sign(ux), sign(lapx)
    return ProblemData(dom, g=g, h=h, u0=u0, u1=u1, u2=u2, p_exponent=4.0)


@settings(max_examples=12, deadline=None)
@given(
    bc=st.sampled_from(["dirichlet", "neumann"]),
    om=st.floats(0.1, 2.0),
    k=st.floats(0.0, 1.0),
)
def test_consistent_data_pass(bc, om, k):
    dom = SpectralDomain.interval(math.pi, bc, 32)
    data = _consistent(dom, om, k)
    rep = (dirichlet_compat if bc == "dirichlet" else neumann_compat)(data, uniform_times(0.4, 2e-2), tol=1e-8, fd_order=8)
    assert rep.passed, rep.summary()


def test_thresholds():
    for check, dom, lo, hi in ((dirichlet_compat, _dir(8), 1.499, 1.501), (neumann_compat, _neu(8), 2.999, 3.001)):
        below = {e.cond_id for e in check(ProblemData(dom, p_exponent=lo), TIMES).entries if e.active and not e.informational}
        above = {e.cond_id for e in check(ProblemData(dom, p_exponent=hi), TIMES).entries if e.active and not e.informational}
        assert below == {"u0-trace", "u1-trace", "lap-u0-trace"}
        assert above - below == {"lap-u1-trace", "u2-trace"}


def test_fd_weights_exact_on_polynomials():
    for deriv in range(4):
        for n in range(deriv + 1, deriv + 6):
            w = fd_weights(deriv, n)
            for p in range(w.size):
                got = float(np.dot(w, np.arange(w.size, dtype=float) ** p))
                want = math.factorial(p) if p == deriv else 0.0
                assert abs(got - want) < 1e-9 * max(1.0, float(np.abs(w).sum()))


def test_derived_initial_sine():
    dom = _dir(16)
    x = np.linspace(0.1, 3.0, 7)
    spectral = derived_initial(None, GridFunction.mode(dom, (1,)), 0.0, 3, dom, TIMES)
    for j, u in enumerate(spectral, 1):
        assert np.abs(u(x) - (-1) ** j * np.sin(x)).max() < 1e-14
    sampled = derived_initial(None, np.sin, 0.0, 3, dom, TIMES)
    for j, u in enumerate(sampled, 1):
        assert np.abs(u(x) - (-1) ** j * np.sin(x)).max() < 1e-6


def test_derived_initial_forcing():
    dom = _dir(16)
    us = derived_initial(lambda t, x: np.sin(x) + 0 * t, lambda x: 0 * x, 0.0, 2, dom, TIMES)
    x = np.linspace(0.1, 3.0, 7)
    assert np.abs(us[0](x) - np.sin(x)).max() < 1e-10
    assert np.abs(us[1](x) + np.sin(x)).max() < 1e-10
    zero = derived_initial(None, None, 0.0, 3, dom, TIMES)
    assert all(np.all(u(x) == 0) for u in zero)


def test_derived_boundary():
    dom = _dir(8)
    times = uniform_times(1.0, 1e-3)
    g1, g2 = derived_boundary(None, lambda t, x: t * t + 0 * x, 0.0, 2, dom, times)
    assert np.abs(g1[:, 0] - 2 * times).max() < 1e-9
    assert np.abs(g2[:, 0] - 2).max() < 1e-6
    (h1,) = derived_boundary(None, lambda t, x: np.exp(-t) + 0 * x, 1.0, 1, dom, times)
    assert np.abs(h1).max() < 1e-6
    (z1,) = derived_boundary(lambda t, x: np.sin(x) * np.exp(t), None, 0.0, 1, dom, times)
    assert np.abs(z1).max() < 1e-12


def test_heat_active_ranges():
    assert active_heat_range(1, 2, 2.0, "dirichlet") == 2
    assert active_heat_range(1, 2, 2.0, "neumann") == 1
    d = heat_higher_compat(None, None, None, 0.0, 1, 2, 2.0, _dir(8), TIMES)
    n = heat_higher_compat(None, None, None, 0.0, 1, 2, 2.0, _neu(8), TIMES)
    assert len(d.active_ids) == 5 and len(n.active_ids) == 4
    assert "trace-j2" in d.active_ids and "trace-j2" not in n.active_ids
    assert d.passed and n.passed
    assert all(e.residual == 0 for e in d.entries if not e.informational)


def test_neumann_mean_examples():
    dom = _neu(32)
    assert neumann_mean_compat(None, None, np.cos, dom, TIMES).passed
    rep = neumann_mean_compat(None, None, lambda x: 1.0 + 0 * x, dom, TIMES)
    assert rep.failed_ids == ["u0-mean"]
    assert rep.entry("u0-mean").residual == pytest.approx(math.pi, rel=1e-12)
    balanced = neumann_mean_compat(lambda t, x: 1.0 + 0 * x, lambda t, x: -math.pi / 2 + 0 * x, None, dom, TIMES)
    assert balanced.passed


def test_report_roundtrip():
    rep = dirichlet_compat(ProblemData(_dir(), u0=np.sin), TIMES)
    d = rep.to_dict()
    assert d["pass"] is True and d["active"] == rep.active_ids


def test_borderline_exponents_rejected():
    for bc, p in (("dirichlet", 1.5), ("neumann", 3.0)):
        with pytest.raises(ConfigError):
            ProblemData(SpectralDomain.interval(math.pi, bc, 8), p_exponent=p)
