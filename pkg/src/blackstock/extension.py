"""Functions of time with prescribed initial derivatives.

Given fields ``x_0 .. x_l`` the combination

    S(t) = sum_j sum_i c_ij exp(-t (1+i) A) A^{-j} x_j

satisfies ``d^m S / dt^m (0) = x_m`` for ``m <= l`` whenever the weights solve
``sum_i c_ij (-(1+i))^m = delta_mj``. The generator is ``A = 1 - Delta``,
diagonal in the eigenbasis with entries ``alpha_m = 1 + lam_m >= 1`` (the shift
is configurable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .domain import GridFunction, SpectralDomain
from .errors import ConfigError, DomainError, IllConditionedError

EXACT_LIMIT = 8
COND_LIMIT = 1e12


def node_matrix(l: int, exact: bool = False):
    """Rows ``m``, columns ``i``: entries ``(-(1+i))^m``."""
    if exact:
        return [[Fraction(-(1 + i)) ** m for i in range(l + 1)] for m in range(l + 1)]
    nodes = -(1.0 + np.arange(l + 1))
    return np.vander(nodes, l + 1, increasing=True).T


def _solve_exact(mat):
    n = len(mat)
    aug = [row[:] + [Fraction(int(r == c)) for c in range(n)] for r, row in enumerate(mat)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                fac = aug[r][col]
                aug[r] = [v - fac * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


@dataclass(frozen=True)
class VandermondeCoeffs:
    l: int
    matrix: tuple
    exact: bool

    def as_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.matrix])

    def column(self, j: int) -> tuple:
        return tuple(row[j] for row in self.matrix)


def vandermonde_coeffs(l: int) -> VandermondeCoeffs:
    """Weights ``c[i][j]`` with ``sum_i c[i][j] (-(1+i))^m = delta_mj``.

    Rational elimination for ``l <= 8``, floating point beyond. Raises
    :class:`IllConditionedError` once the row-scaled node matrix has
    condition number above ``1e12`` (from ``l = 14`` on).
    """
    if l < 0 or int(l) != l:
        raise ConfigError(f"order must be a non-negative integer, got {l}")
    l = int(l)
    cond = node_condition(l)
    if cond > COND_LIMIT:
        raise IllConditionedError(f"node matrix for l={l} has condition number {cond:.2e} > {COND_LIMIT:.0e}")
    if l <= EXACT_LIMIT:
        inv = _solve_exact(node_matrix(l, exact=True))
        return VandermondeCoeffs(l, tuple(tuple(r) for r in inv), True)
    inv = np.linalg.solve(node_matrix(l), np.eye(l + 1))
    return VandermondeCoeffs(l, tuple(tuple(float(v) for v in r) for r in inv), False)


def node_condition(l: int) -> float:
    """2-norm condition number of the node matrix after scaling each row to unit max."""
    mat = node_matrix(l)
    return float(np.linalg.cond(mat / np.abs(mat).max(axis=1, keepdims=True)))


def node_determinant(l: int) -> int:
    """Closed form ``(-1)^{l(l+1)/2} prod_{j=1}^{l} j!`` of the node matrix determinant."""
    sign = -1 if (l * (l + 1) // 2) % 2 else 1
    return sign * math.prod(math.factorial(j) for j in range(1, l + 1))


def shifted_basis(vc: VandermondeCoeffs) -> list:
    """Coefficients ``e[j][n]`` with ``sum_i c_ij exp(-(1+i) tau) = sum_n e[j][n] s^n``, ``s = 1 - exp(-tau)``.

    Exact when ``vc`` is. ``e[j][n]`` vanishes for ``n < j`` and ``e[j][j] = 1/j!``.
    """
    l = vc.l
    one = Fraction(1) if vc.exact else 1.0
    return [
        [sum((vc.matrix[i][j] * math.comb(i + 1, n) * (-one) ** n for i in range(l + 1)), 0 * one) for n in range(l + 2)]
        for j in range(l + 1)
    ]


def moment_residual(vc: VandermondeCoeffs) -> float:
    """``max |sum_i c_ij (-(1+i))^m - delta_mj|`` over ``m, j <= l``; zero when the columns are exact."""
    l = vc.l
    worst = 0
    for m in range(l + 1):
        for j in range(l + 1):
            val = sum(vc.matrix[i][j] * (-(1 + i)) ** m for i in range(l + 1)) - (1 if m == j else 0)
            worst = max(worst, abs(val))
    return float(worst)


@dataclass
class Extension:
    """``S_m(t) = sum_j alpha_m^{-j} x_jm phi_j(alpha_m t)`` with ``phi_j(tau) = sum_i c_ij exp(-(1+i) tau)``.

    ``phi_j`` is evaluated through :func:`shifted_basis` for ``tau < 1``,
    where the exponential sum cancels to ``tau^j / j!``, and directly beyond.
    """

    domain: SpectralDomain
    fields: np.ndarray
    alpha: np.ndarray
    vc: VandermondeCoeffs

    @property
    def order(self) -> int:
        return self.fields.shape[0] - 1

    @property
    def weights(self) -> np.ndarray:
        """``w_i = sum_j c_ij alpha^{-j} x_j``, the coefficient of ``exp(-t (1+i) alpha)``."""
        c = self.vc.as_array()
        scaled = self.fields * self.alpha[None] ** -np.arange(self.order + 1).reshape((-1,) + (1,) * self.domain.ndim)
        return np.tensordot(c, scaled, axes=(1, 0))

    def _phi(self, tau: np.ndarray) -> np.ndarray:
        """``phi_j(tau)`` stacked along a new leading axis."""
        l = self.order
        c = self.vc.as_array()
        e = np.array([[float(v) for v in row] for row in shifted_basis(self.vc)])
        near = tau < 1.0
        out = np.empty((l + 1,) + tau.shape)
        s = -np.expm1(-np.where(near, tau, 0.0))
        powers = s[None] ** np.arange(l + 2).reshape((-1,) + (1,) * tau.ndim)
        far = np.exp(-(1.0 + np.arange(l + 1)).reshape((-1,) + (1,) * tau.ndim) * np.where(near, 1.0, tau)[None])
        for j in range(l + 1):
            out[j] = np.where(near, np.tensordot(e[j], powers, axes=(0, 0)), np.tensordot(c[:, j], far, axes=(0, 0)))
        return out

    def coeffs(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        tau = times.reshape((-1,) + (1,) * self.domain.ndim) * self.alpha
        phi = self._phi(tau)
        j = np.arange(self.order + 1).reshape((-1,) + (1,) * self.domain.ndim)
        scaled = self.fields * self.alpha[None] ** (-j)
        return np.sum(phi * scaled[:, None], axis=0)

    def scaled_coeffs(self, taus) -> np.ndarray:
        """Mode ``m`` of ``S`` at its own time ``tau / alpha_m``; ``d^k/dt^k = alpha^k d^k/dtau^k``."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        tau = taus.reshape((-1,) + (1,) * self.domain.ndim) * np.ones_like(self.alpha)
        j = np.arange(self.order + 1).reshape((-1,) + (1,) * self.domain.ndim)
        return np.sum(self._phi(tau) * (self.fields * self.alpha[None] ** (-j))[:, None], axis=0)

    def __call__(self, t) -> GridFunction:
        return GridFunction(self.domain, self.coeffs([t])[0])

    def derivative_at_zero(self, m: int) -> GridFunction:
        """``d^m S / dt^m (0) = sum_j D_mj alpha^{m-j} x_j`` with moments ``D_mj = sum_i c_ij (-(1+i))^m``.

        ``D`` is the identity in exact arithmetic; the moments are summed
        before rounding, so no cancellation between exponentials occurs.
        """
        l = self.order
        one = Fraction(1) if self.vc.exact else 1.0
        moments = [float(sum((self.vc.matrix[i][j] * (-(1 + i)) ** m for i in range(l + 1)), 0 * one)) for j in range(l + 1)]
        out = np.zeros(self.domain.shape)
        for j, d in enumerate(moments):
            if d:
                out += d * self.alpha ** (m - j) * self.fields[j]
        return GridFunction(self.domain, out)

    def weight_derivative_at_zero(self, m: int) -> GridFunction:
        """``sum_i w_i (-(1+i) alpha)^m`` from the rounded exponential weights; loses ``eps alpha^m`` accuracy."""
        rates = (1 + np.arange(self.order + 1)).reshape((-1,) + (1,) * self.domain.ndim) * self.alpha
        return GridFunction(self.domain, np.sum(self.weights * (-rates) ** m, axis=0))


def extend(values, domain: SpectralDomain | None = None, shift: float = 1.0) -> Extension:
    """Build ``S`` from GridFunctions ``x_0 .. x_l`` on a common domain.

    The generator is ``shift - Delta``; ``shift`` must be positive so that
    it is invertible on constants.
    """
    if not values:
        raise ConfigError("need at least one field")
    if not shift > 0:
        raise ConfigError(f"shift must be positive, got {shift}")
    domain = domain or values[0].domain
    for x in values:
        if not isinstance(x, GridFunction) or x.domain != domain:
            raise DomainError("all prescribed derivatives must be GridFunctions on the same domain")
    l = len(values) - 1
    vc = vandermonde_coeffs(l)
    fields = np.stack([x.coeffs for x in values])
    return Extension(domain, fields, shift + domain.eigenvalues, vc)
