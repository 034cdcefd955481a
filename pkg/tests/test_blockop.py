import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from blackstock import (
    PdeParams,
    SpectralDomain,
    mode_eigenvalues,
    mode_matrix,
    mode_propagator,
    omega0,
    spectral_abscissa,
    zero_mode_block,
)
from blackstock.blockop import ACCUMULATION
from blackstock.errors import BoundaryConditionError, ConfigError

positive = st.floats(0.05, 20.0, allow_nan=False, allow_infinity=False)


def test_mode_matrix_entries():
    assert np.array_equal(mode_matrix(1.0, PdeParams(1, 1, 1)).matrix, [[0, -1, 0], [1, 1, -1], [0, 0, 1]])
    assert np.array_equal(mode_matrix(0.0, PdeParams(1, 1, 1)).matrix, [[0, -1, 0], [0, 0, -1], [0, 0, 0]])
    assert np.array_equal(mode_matrix(4.0, PdeParams(2, 3, 1)).matrix, [[0, -1, 0], [4, 12, -1], [0, 0, 8]])


def test_mode_eigenvalues_examples():
    ev = mode_eigenvalues(mode_matrix(1.0, PdeParams(1, 1, 1)), PdeParams(1, 1, 1))
    assert np.allclose(sorted(ev, key=lambda z: (z.real, z.imag)), [0.5 - 1j * math.sqrt(3) / 2, 0.5 + 1j * math.sqrt(3) / 2, 1.0])
    p = PdeParams(1, 10, 1)
    ev = np.sort(mode_eigenvalues(mode_matrix(1.0, p), p).real)
    assert np.allclose(ev, [(10 - math.sqrt(96)) / 2, 1.0, (10 + math.sqrt(96)) / 2], rtol=1e-13)
    assert np.all(mode_eigenvalues(mode_matrix(0.0, p), p) == 0)


def test_b_over_a_derivation():
    assert PdeParams(1, 1, 2.0, s=1, B_over_A=5.0).k == pytest.approx(2.5 / 4.0)
    assert PdeParams(1, 1, 2.0, s=0, B_over_A=5.0).k == pytest.approx(3.5 / 4.0)
    with pytest.raises(ConfigError):
        PdeParams(1, 1, 1, k=0.3, s=1, B_over_A=5.0)
    with pytest.raises(ConfigError):
        PdeParams(0.0, 1, 1)


def test_propagator_identity_and_nilpotent():
    p = PdeParams(1, 1, 1)
    assert np.allclose(mode_propagator(mode_matrix(3.0, p), 0.0), np.eye(3), atol=1e-15)
    assert np.allclose(mode_propagator(mode_matrix(0.0, p), 1.0), [[1, 1, 0.5], [0, 1, 1], [0, 0, 1]], atol=1e-15)


def test_propagator_against_ode_integration():
    block = mode_matrix(1.0, PdeParams(1, 1, 1))
    E = mode_propagator(block, 1.0)
    for j in range(3):
        sol = solve_ivp(lambda t, v: -block.matrix @ v, (0, 1), np.eye(3)[j], method="RK45", rtol=1e-12, atol=1e-14)
        assert np.abs(sol.y[:, -1] - E[:, j]).max() < 1e-8


@settings(max_examples=40, deadline=None)
@given(a=positive, b=positive, c=positive, lam=st.floats(0.0, 400.0), t=st.floats(0.0, 3.0))
def test_propagator_semigroup(a, b, c, lam, t):
    block = mode_matrix(lam, PdeParams(a, b, c))
    E = mode_propagator(block, t)
    half = mode_propagator(block, t / 2)
    scale = max(1.0, np.abs(E).max())
    assert np.abs(half @ half - E).max() <= 1e-8 * scale


def test_propagator_repeated_roots():
    # b^2 lam = 4 c^2 and a lam equal to the double root b lam / 2
    p = PdeParams(1.0, 2.0, 1.0)
    block = mode_matrix(1.0, p)
    assert np.abs(mode_propagator(block, 0.7) - expm(-0.7 * block.matrix)).max() < 1e-13


def test_abscissa_examples():
    d = SpectralDomain.interval(math.pi, "dirichlet", 10)
    ab = spectral_abscissa(PdeParams(1, 1, 1), d)
    assert ab.numeric == pytest.approx(-0.5) and ab.analytic == pytest.approx(-0.5)
    big = spectral_abscissa(PdeParams(1, 10, 1), SpectralDomain.interval(math.pi, "dirichlet", 100))
    assert big.analytic == pytest.approx(-0.1, abs=1e-15)
    assert -0.1002 < big.numeric < -0.1
    n = SpectralDomain.interval(math.pi, "neumann", 10)
    assert spectral_abscissa(PdeParams(1, 1, 1), n, mean_zero=True).analytic == pytest.approx(-0.5)
    with pytest.raises(BoundaryConditionError):
        spectral_abscissa(PdeParams(1, 1, 1), n)


def test_omega0_examples():
    d = SpectralDomain.interval(math.pi, "dirichlet", 10)
    assert omega0(PdeParams(1, 1, 1), d).omega0 == 0.5
    assert omega0(PdeParams(0.1, 1, 1), d).omega0 == pytest.approx(0.1)
    assert omega0(PdeParams(1, 1, 1), SpectralDomain.interval(math.pi, "neumann", 10)).omega0 == 0.5
    assert omega0(PdeParams(1, 10, 1), d).attaining == ACCUMULATION


@settings(max_examples=60, deadline=None)
@given(a=positive, b=positive, c=positive, bc=st.sampled_from(["dirichlet", "neumann"]))
def test_omega0_is_minus_abscissa(a, b, c, bc):
    p = PdeParams(a, b, c)
    d = SpectralDomain.interval(math.pi, bc, 50)
    ab = spectral_abscissa(p, d, mean_zero=True)
    assert abs(omega0(p, d).omega0 + ab.analytic) <= 1e-12 * max(1.0, abs(ab.analytic))
    assert ab.numeric <= ab.analytic <= 0


@settings(max_examples=30, deadline=None)
@given(a=positive, b=positive, c=positive, lam=st.floats(0.01, 1e4))
def test_eigenvalues_satisfy_characteristic_polynomial(a, b, c, lam):
    p = PdeParams(a, b, c)
    block = mode_matrix(lam, p)
    for mu in mode_eigenvalues(block, p):
        res = np.linalg.det(mu * np.eye(3) - block.matrix)
        scale = np.linalg.norm(block.matrix) ** 3
        assert abs(res) <= 1e-10 * scale


def test_zero_mode_block():
    assert zero_mode_block(PdeParams(1, 1, 1), SpectralDomain.interval(math.pi, "dirichlet", 4)) is None
    block = zero_mode_block(PdeParams(1, 1, 1), SpectralDomain.interval(math.pi, "neumann", 4))
    assert np.all(np.linalg.matrix_power(block.matrix, 3) == 0)
