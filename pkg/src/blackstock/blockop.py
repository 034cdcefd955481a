"""Per-mode matrices of the linearized third-order operator and its spectrum.

Writing the state as ``v = (u, u_t, u_tt - b Delta u_t - c^2 Delta u)`` turns
``(a Delta - d/dt)(u_tt - b Delta u_t - c^2 Delta u) = f`` into
``v' + M v = (0, 0, -f)``. On an eigenfunction with ``-Delta phi = lam phi``
the operator reduces to the 3x3 block

    M(lam) = [[0, -1, 0], [c^2 lam, b lam, -1], [0, 0, a lam]]

with eigenvalues ``a lam`` and ``(b lam +- sqrt(b^2 lam^2 - 4 c^2 lam)) / 2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .domain import SpectralDomain
from .errors import BoundaryConditionError, ConfigError

KUZNETSOV = "kuznetsov"
WESTERVELT = "westervelt"
ACCUMULATION = "accumulation-at-infinity"
EIG_COND_LIMIT = 1e8


@dataclass(frozen=True)
class PdeParams:
    """Coefficients of the equation.

    ``s = 1`` selects the Kuznetsov form and ``s = 0`` the Westervelt form.
    When ``B_over_A`` is given, ``k`` is derived from it:
    ``k = (B/2A) / c^2`` for Kuznetsov and ``k = (1 + B/2A) / c^2`` for
    Westervelt. Passing both with inconsistent values is an error.
    """

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    k: float | None = None
    s: int = 1
    B_over_A: float | None = None

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.s not in (0, 1):
            raise ConfigError(f"s must be 0 or 1, got {self.s!r}")
        object.__setattr__(self, "s", int(self.s))
        derived = None
        if self.B_over_A is not None:
            ba = float(self.B_over_A)
            derived = (ba / 2 if self.s == 1 else 1 + ba / 2) / self.c**2
        if self.k is None:
            object.__setattr__(self, "k", 0.0 if derived is None else derived)
        else:
            k = float(self.k)
            if not math.isfinite(k):
                raise ConfigError(f"k must be finite, got {self.k!r}")
            if derived is not None and not math.isclose(k, derived, rel_tol=1e-12, abs_tol=1e-15):
                raise ConfigError(f"k={k} disagrees with B/A={self.B_over_A} for the {self.variant} form (k={derived})")
            object.__setattr__(self, "k", k)

    @property
    def variant(self) -> str:
        return KUZNETSOV if self.s == 1 else WESTERVELT

    @property
    def accumulation_rate(self) -> float:
        """Limit of the slow branch ``mu_-(lam)`` as ``lam -> infinity``."""
        return self.c**2 / self.b


@dataclass(frozen=True)
class ModeBlock:
    lam: float
    matrix: np.ndarray = field(repr=False)


def mode_matrix(lam: float, params: PdeParams) -> ModeBlock:
    if lam < 0:
        raise ValueError(f"Laplacian eigenvalue must be non-negative, got {lam}")
    a, b, c = params.a, params.b, params.c
    m = np.array([[0.0, -1.0, 0.0], [c * c * lam, b * lam, -1.0], [0.0, 0.0, a * lam]])
    m.setflags(write=False)
    return ModeBlock(float(lam), m)


def damping_roots(lam: float, b: float, c: float) -> tuple:
    """Roots ``mu_+, mu_-`` of ``mu^2 - b lam mu + c^2 lam``; the small root avoids cancellation."""
    disc = b * b * lam * lam - 4 * c * c * lam
    if lam == 0:
        return 0j, 0j
    if disc >= 0:
        mu_plus = (b * lam + math.sqrt(disc)) / 2
        return complex(mu_plus), complex(c * c * lam / mu_plus)
    root = cmath.sqrt(disc)
    return (b * lam + root) / 2, (b * lam - root) / 2


def mode_eigenvalues(block: ModeBlock, params: PdeParams) -> np.ndarray:
    """Closed-form eigenvalues ``(a lam, mu_+, mu_-)`` of the block."""
    mu_plus, mu_minus = damping_roots(block.lam, params.b, params.c)
    return np.array([params.a * block.lam, mu_plus, mu_minus], dtype=complex)


def mode_decay_rate(lam: float, params: PdeParams) -> float:
    """Slowest real part among the three eigenvalues of a mode."""
    mu_plus, mu_minus = damping_roots(lam, params.b, params.c)
    return min(params.a * lam, mu_plus.real, mu_minus.real)


def mode_propagator(block: ModeBlock, t) -> np.ndarray:
    """``exp(-t M)`` for one mode; ``t`` may be an array of times.

    Uses the eigendecomposition when the eigenvector matrix is well
    conditioned and falls back to scaling-and-squaring otherwise (repeated or
    nearly repeated eigenvalues, including the nilpotent block at ``lam = 0``).
    """
    mat = block.matrix
    ts = np.asarray(t, dtype=float)
    if block.lam > 0:
        w, v = np.linalg.eig(mat)
        if np.linalg.cond(v) < EIG_COND_LIMIT:
            vinv = np.linalg.inv(v)
            out = np.einsum("ij,...j,jk->...ik", v, np.exp(-ts[..., None] * w), vinv)
            return np.ascontiguousarray(out.real)
    if ts.ndim == 0:
        return scipy.linalg.expm(-float(ts) * mat)
    return np.stack([scipy.linalg.expm(-tv * mat) for tv in ts.ravel()]).reshape(ts.shape + (3, 3))


def companion_matrix(lam: float, params: PdeParams) -> np.ndarray:
    """Generator of ``(u, u_t, u_tt)`` for one mode."""
    a, b, c = params.a, params.b, params.c
    return np.array(
        [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-a * c * c * lam * lam, -(c * c * lam + a * b * lam * lam), -(a + b) * lam],
        ]
    )


def state_transform(lam: float, params: PdeParams) -> np.ndarray:
    """Matrix taking ``(u, u_t, u_tt)`` to ``v``."""
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [params.c**2 * lam, params.b * lam, 1.0]])


@dataclass(frozen=True)
class DecayConstant:
    omega0: float
    attaining: object
    candidates: dict
    lam_star: float


def omega0(params: PdeParams, domain: SpectralDomain) -> DecayConstant:
    """Closed-form exponential decay rate ``min{a lam*, b lam*/2, c^2/b}``.

    ``lam*`` is the smallest Dirichlet eigenvalue, or the smallest nonzero
    Neumann eigenvalue.
    """
    lam_star = domain.smallest_admissible_eigenvalue()
    cand = {
        "heat": params.a * lam_star,
        "oscillatory": params.b * lam_star / 2,
        "accumulation": params.accumulation_rate,
    }
    value = min(cand.values())
    if cand["accumulation"] < min(cand["heat"], cand["oscillatory"]):
        attaining = ACCUMULATION
    else:
        attaining = _mode_at(domain, np.where(domain.admissible_mask, domain.eigenvalues, np.inf))
    return DecayConstant(value, attaining, cand, lam_star)


def _mode_at(domain: SpectralDomain, score: np.ndarray) -> tuple:
    idx = np.unravel_index(int(np.argmin(score)), domain.shape)
    return tuple(int(domain.mode_numbers(a)[j]) for a, j in enumerate(idx))


@dataclass(frozen=True)
class SpectralAbscissa:
    """Largest real part of ``-M`` over retained modes and in the limit.

    ``numeric`` uses only the retained modes; ``analytic`` also includes the
    accumulation point ``-c^2/b`` of the slow branch.
    """

    numeric: float
    analytic: float
    n_modes: int
    slowest_mode: tuple


def _check_mean_zero(domain: SpectralDomain, mean_zero: bool) -> None:
    if domain.is_neumann and not mean_zero:
        raise BoundaryConditionError(
            "the Neumann operator has a zero eigenvalue on constants; pass mean_zero=True "
            "to restrict to the mean-zero subspace"
        )


def spectral_abscissa(
    params: PdeParams, domain: SpectralDomain, n_modes=None, mean_zero: bool = False
) -> SpectralAbscissa:
    _check_mean_zero(domain, mean_zero)
    if n_modes is not None:
        domain = domain.with_modes(n_modes)
    mask = domain.admissible_mask
    if not mask.any():
        raise ConfigError("no admissible modes retained")
    lam = domain.eigenvalues
    b, c = params.b, params.c
    disc = b * b * lam * lam - 4 * c * c * lam
    over = disc >= 0
    root = np.sqrt(np.where(over, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        slow = np.where(over, 2 * c * c * lam / (b * lam + root), b * lam / 2)
    rates = np.where(mask, np.minimum(params.a * lam, slow), np.inf)
    rate = float(rates.min())
    numeric = -rate
    analytic = -min(rate, params.accumulation_rate)
    return SpectralAbscissa(numeric, analytic, int(mask.sum()), _mode_at(domain, rates))


def operator_eigenvalues(params: PdeParams, domain: SpectralDomain, mean_zero: bool = False):
    """Eigenvalues of ``-M`` for every retained mode, shape ``(n, 3)``, with eigenvalues of ``-Delta``."""
    mask = domain.admissible_mask if mean_zero else np.ones(domain.shape, dtype=bool)
    lam = domain.eigenvalues[mask]
    out = np.empty((lam.size, 3), dtype=complex)
    for i, lv in enumerate(lam):
        out[i] = -mode_eigenvalues(mode_matrix(lv, params), params)
    return lam, out


def zero_mode_block(params: PdeParams, domain: SpectralDomain):
    """Block of the constant Neumann mode if it is retained, else ``None``.

    The block is nilpotent: all three eigenvalues vanish and ``M^3 = 0``
    exactly, so ``exp(-tM)`` grows polynomially instead of decaying.
    """
    if not domain.is_neumann:
        return None
    block = mode_matrix(0.0, params)
    nil = np.linalg.matrix_power(block.matrix, 3)
    if np.any(nil != 0):
        raise AssertionError("zero-mode block is not nilpotent")
    return block
