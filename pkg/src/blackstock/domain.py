"""Laplacian eigenbasis on intervals and rectangles.

Every field in the package is stored as coefficients in the eigenbasis of the
Laplacian with homogeneous Dirichlet or Neumann conditions:

* Dirichlet: ``sin(m pi x / L)`` for ``m = 1 .. N``, sampled on the interior
  grid ``x_j = j L / (N + 1)``.
* Neumann: ``cos(m pi x / L)`` for ``m = 0 .. N - 1``, sampled on the closed
  grid ``x_j = j L / (N - 1)``.

Rectangles use tensor products of the one-dimensional bases. Transforms are
the discrete sine and cosine transforms of type I, so the map between grid
values and coefficients is exact for the retained modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import fft as spfft

from .errors import BoundaryConditionError, DomainError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
_BC_ALIASES = {"dirichlet": DIRICHLET, "d": DIRICHLET, "neumann": NEUMANN, "n": NEUMANN}


def normalize_bc(bc: str) -> str:
    try:
        return _BC_ALIASES[str(bc).strip().lower()]
    except KeyError:
        raise BoundaryConditionError(
            f"unknown boundary condition {bc!r}; expected 'dirichlet' or 'neumann'"
        ) from None


def _axis_basis(kind: str, wavenumbers: np.ndarray, x: np.ndarray, deriv: int) -> np.ndarray:
    """Matrix ``B[p, m]`` of the ``deriv``-th derivative of each basis function at ``x[p]``."""
    phase = np.outer(x, wavenumbers) + deriv * math.pi / 2
    scale = wavenumbers**deriv if deriv else np.ones_like(wavenumbers)
    if kind == DIRICHLET:
        return np.sin(phase) * scale
    return np.cos(phase) * scale


def _apply_axis(mat: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(mat, arr, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True)
class SpectralDomain:
    """Box domain ``prod (0, L_i)`` with a truncated Laplacian eigenbasis.

    Parameters
    ----------
    lengths : tuple of float
        Side lengths, one per spatial dimension (1 or 2).
    bc : str
        ``"dirichlet"`` or ``"neumann"``; applies to the whole boundary.
    n_modes : tuple of int
        Retained modes per axis.
    """

    lengths: tuple
    bc: str
    n_modes: tuple
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        n_modes = tuple(int(v) for v in np.atleast_1d(self.n_modes))
        if len(lengths) not in (1, 2):
            raise DomainError(f"only intervals and rectangles are supported, got {len(lengths)} dimensions")
        if len(n_modes) != len(lengths):
            raise DomainError(f"n_modes {n_modes} does not match dimension {len(lengths)}")
        if any(not math.isfinite(v) or v <= 0 for v in lengths):
            raise DomainError(f"side lengths must be positive and finite, got {lengths}")
        if any(n < 1 for n in n_modes):
            raise DomainError(f"need at least one mode per axis, got {n_modes}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "n_modes", n_modes)
        object.__setattr__(self, "bc", normalize_bc(self.bc))

    # construction -----------------------------------------------------
    @classmethod
    def interval(cls, length: float = math.pi, bc: str = DIRICHLET, n_modes: int = 128) -> "SpectralDomain":
        return cls((length,), bc, (n_modes,))

    @classmethod
    def rectangle(
        cls, lx: float = math.pi, ly: float = math.pi, bc: str = DIRICHLET, n_modes: Sequence[int] = (64, 64)
    ) -> "SpectralDomain":
        n_modes = tuple(np.broadcast_to(np.asarray(n_modes, dtype=int), (2,)))
        return cls((lx, ly), bc, n_modes)

    def with_modes(self, n_modes) -> "SpectralDomain":
        n_modes = tuple(np.broadcast_to(np.asarray(n_modes, dtype=int), (self.ndim,)))
        return SpectralDomain(self.lengths, self.bc, n_modes)

    def refined(self, factor: float = 1.5) -> "SpectralDomain":
        """Domain with ``ceil(factor * N)`` modes per axis, used for dealiasing."""
        return self.with_modes([max(n + 1, math.ceil(factor * n)) for n in self.n_modes])

    # geometry ---------------------------------------------------------
    @property
    def ndim(self) -> int:
        return len(self.lengths)

    @property
    def is_dirichlet(self) -> bool:
        return self.bc == DIRICHLET

    @property
    def is_neumann(self) -> bool:
        return self.bc == NEUMANN

    @property
    def shape(self) -> tuple:
        """Shape of both the coefficient array and the collocation grid."""
        return self.n_modes

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def boundary_measure(self) -> float:
        if self.ndim == 1:
            return 2.0
        return 2.0 * (self.lengths[0] + self.lengths[1])

    def mode_numbers(self, axis: int = 0) -> np.ndarray:
        n = self.n_modes[axis]
        return np.arange(1, n + 1) if self.is_dirichlet else np.arange(0, n)

    def wavenumbers(self, axis: int = 0) -> np.ndarray:
        return self.mode_numbers(axis) * math.pi / self.lengths[axis]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Laplacian eigenvalues ``lambda_m >= 0`` arranged like the coefficients."""
        lam = np.zeros(self.shape)
        for axis in range(self.ndim):
            k2 = self.wavenumbers(axis) ** 2
            lam = lam + k2.reshape([-1 if i == axis else 1 for i in range(self.ndim)])
        lam.setflags(write=False)
        return lam

    @cached_property
    def basis_norms_sq(self) -> np.ndarray:
        """``||phi_m||^2`` in ``L^2`` for every retained mode."""
        out = np.ones(self.shape)
        for axis in range(self.ndim):
            w = np.full(self.n_modes[axis], self.lengths[axis] / 2)
            if self.is_neumann:
                w[0] = self.lengths[axis]
            out = out * w.reshape([-1 if i == axis else 1 for i in range(self.ndim)])
        out.setflags(write=False)
        return out

    @cached_property
    def basis_integrals(self) -> np.ndarray:
        """``int_Omega phi_m dx`` for every retained mode."""
        out = np.ones(self.shape)
        for axis in range(self.ndim):
            length = self.lengths[axis]
            m = self.mode_numbers(axis)
            if self.is_dirichlet:
                w = length * (1 - (-1.0) ** m) / (m * math.pi)
            else:
                w = np.where(m == 0, length, 0.0)
            out = out * w.reshape([-1 if i == axis else 1 for i in range(self.ndim)])
        out.setflags(write=False)
        return out

    def nodes(self, axis: int = 0) -> np.ndarray:
        n, length = self.n_modes[axis], self.lengths[axis]
        if self.is_dirichlet:
            return np.arange(1, n + 1) * length / (n + 1)
        if n == 1:
            return np.array([length / 2])
        return np.arange(n) * length / (n - 1)

    def grid(self) -> tuple:
        return tuple(np.meshgrid(*[self.nodes(i) for i in range(self.ndim)], indexing="ij"))

    def eigenpairs(self, count: int | None = None):
        """Eigenvalues in ascending order with their multi-indices."""
        lam = self.eigenvalues.ravel()
        order = np.argsort(lam, kind="stable")
        if count is not None:
            order = order[:count]
        idx = np.unravel_index(order, self.shape)
        modes = [tuple(int(self.mode_numbers(a)[i[k]]) for a, i in enumerate(idx)) for k in range(len(order))]
        return lam[order], modes

    @property
    def admissible_mask(self) -> np.ndarray:
        """Modes of the operator on the mean-zero subspace (excludes the constant mode)."""
        mask = np.ones(self.shape, dtype=bool)
        if self.is_neumann:
            mask[(0,) * self.ndim] = False
        return mask

    def smallest_admissible_eigenvalue(self) -> float:
        lam = self.eigenvalues[self.admissible_mask]
        if lam.size == 0:
            raise DomainError("no admissible modes retained")
        return float(lam.min())

    # boundary sampling ------------------------------------------------
    @cached_property
    def boundary_points(self):
        """Boundary sample points and outward unit normals.

        Intervals use the two endpoints. Rectangles use each edge sampled at
        the interior tangential nodes ``j L / (n + 1)``, ordered west, east,
        south, north.
        """
        if self.ndim == 1:
            pts = (np.array([0.0, self.lengths[0]]),)
            normals = (np.array([-1.0, 1.0]),)
            return pts, normals
        lx, ly = self.lengths
        nx, ny = self.n_modes
        ty = np.arange(1, ny + 1) * ly / (ny + 1)
        tx = np.arange(1, nx + 1) * lx / (nx + 1)
        xs = np.concatenate([np.zeros(ny), np.full(ny, lx), tx, tx])
        ys = np.concatenate([ty, ty, np.zeros(nx), np.full(nx, ly)])
        nxv = np.concatenate([-np.ones(ny), np.ones(ny), np.zeros(nx), np.zeros(nx)])
        nyv = np.concatenate([np.zeros(ny), np.zeros(ny), -np.ones(nx), np.ones(nx)])
        return (xs, ys), (nxv, nyv)

    @property
    def n_boundary_points(self) -> int:
        return self.boundary_points[0][0].size

    # transforms -------------------------------------------------------
    def check_grid_shape(self, arr: np.ndarray) -> None:
        if tuple(arr.shape[-self.ndim:]) != self.shape:
            raise DomainError(f"array trailing shape {arr.shape} does not match domain shape {self.shape}")

    def forward(self, values) -> np.ndarray:
        """Grid values to coefficients; leading axes are treated as a batch."""
        out = np.asarray(values, dtype=float)
        self.check_grid_shape(out)
        for axis in range(self.ndim):
            ax = out.ndim - self.ndim + axis
            n = self.n_modes[axis]
            if self.is_dirichlet:
                out = spfft.dst(out, type=1, axis=ax) / (n + 1)
            elif n == 1:
                out = out.copy()
            else:
                out = spfft.dct(out, type=1, axis=ax) / (n - 1)
                sl = [slice(None)] * out.ndim
                sl[ax] = 0
                out[tuple(sl)] /= 2
                sl[ax] = n - 1
                out[tuple(sl)] /= 2
        return out

    def inverse(self, coeffs) -> np.ndarray:
        """Coefficients to grid values; leading axes are treated as a batch."""
        out = np.asarray(coeffs, dtype=float)
        self.check_grid_shape(out)
        for axis in range(self.ndim):
            ax = out.ndim - self.ndim + axis
            n = self.n_modes[axis]
            if self.is_dirichlet:
                out = spfft.dst(out, type=1, axis=ax) / 2
            elif n == 1:
                out = out.copy()
            else:
                out = out.copy()
                sl = [slice(None)] * out.ndim
                sl[ax] = slice(1, n - 1)
                out[tuple(sl)] /= 2
                out = spfft.dct(out, type=1, axis=ax)
        return out

    def resize(self, coeffs, target: "SpectralDomain") -> np.ndarray:
        """Zero-pad or truncate coefficients onto ``target`` (same geometry and bc)."""
        if target.lengths != self.lengths or target.bc != self.bc:
            raise DomainError("resize needs domains with equal geometry and boundary condition")
        coeffs = np.asarray(coeffs, dtype=float)
        lead = coeffs.shape[: coeffs.ndim - self.ndim]
        out = np.zeros(lead + target.shape)
        sl = tuple(slice(0, min(a, b)) for a, b in zip(self.shape, target.shape))
        out[(Ellipsis,) + sl] = coeffs[(Ellipsis,) + sl]
        return out

    def basis_matrix(self, axis: int, x, deriv: int = 0, kind: str | None = None) -> np.ndarray:
        return _axis_basis(kind or self.bc, self.wavenumbers(axis), np.asarray(x, dtype=float), deriv)

    def grid_operator(self, axis: int, deriv: int, target: "SpectralDomain | None" = None) -> np.ndarray:
        """Cached matrix evaluating the ``deriv``-th derivative along ``axis`` on a grid."""
        target = target or self
        key = ("grid", axis, deriv, target.n_modes)
        mat = self._cache.get(key)
        if mat is None:
            mat = self.basis_matrix(axis, target.nodes(axis), deriv)
            self._cache[key] = mat
        return mat

    def evaluate_grid(self, coeffs, deriv=None, target: "SpectralDomain | None" = None) -> np.ndarray:
        """Evaluate a partial derivative of the series on the grid of ``target``.

        ``deriv`` is a tuple of derivative orders per axis. Leading axes of
        ``coeffs`` are treated as a batch.
        """
        coeffs = np.asarray(coeffs, dtype=float)
        deriv = tuple(deriv) if deriv is not None else (0,) * self.ndim
        out = coeffs
        for axis in range(self.ndim):
            ax = out.ndim - self.ndim + axis
            out = _apply_axis(self.grid_operator(axis, deriv[axis], target), out, ax)
        return out

    def evaluate_points(self, coeffs, points, deriv=None) -> np.ndarray:
        """Evaluate a partial derivative of the series at scattered points."""
        coeffs = np.asarray(coeffs, dtype=float)
        deriv = tuple(deriv) if deriv is not None else (0,) * self.ndim
        points = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
        mats = [self.basis_matrix(a, points[a], deriv[a]) for a in range(self.ndim)]
        if self.ndim == 1:
            return coeffs @ mats[0].T
        return np.einsum("...mn,pm,pn->...p", coeffs, mats[0], mats[1])

    def laplacian_coeffs(self, coeffs, power: int = 1) -> np.ndarray:
        return np.asarray(coeffs) * (-self.eigenvalues) ** power

    def trace(self, coeffs, kind: str = "value", laplacian_power: int = 0) -> np.ndarray:
        """Boundary trace of ``Delta^power u`` (``kind='value'``) or its normal derivative."""
        c = self.laplacian_coeffs(coeffs, laplacian_power) if laplacian_power else np.asarray(coeffs)
        pts, normals = self.boundary_points
        if kind == "value":
            return self.evaluate_points(c, pts)
        if kind != "normal":
            raise ValueError(f"unknown trace kind {kind!r}")
        out = 0.0
        for axis in range(self.ndim):
            deriv = tuple(1 if a == axis else 0 for a in range(self.ndim))
            out = out + normals[axis] * self.evaluate_points(c, pts, deriv)
        return out

    def integral(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        axes = tuple(range(c.ndim - self.ndim, c.ndim))
        return np.sum(c * self.basis_integrals, axis=axes)

    def mean(self, coeffs) -> np.ndarray:
        return self.integral(coeffs) / self.volume

    def l2_norm(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        axes = tuple(range(c.ndim - self.ndim, c.ndim))
        return np.sqrt(np.sum(c**2 * self.basis_norms_sq, axis=axes))

    def project_mean_zero(self, coeffs) -> np.ndarray:
        if not self.is_neumann:
            raise BoundaryConditionError("mean-zero projection is defined for Neumann domains only")
        out = np.array(coeffs, dtype=float, copy=True)
        out[(Ellipsis,) + (0,) * self.ndim] = 0.0
        return out


class GridFunction:
    """A scalar field stored by its eigenbasis coefficients on a domain."""

    __array_priority__ = 100

    def __init__(self, domain: SpectralDomain, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != domain.shape:
            raise DomainError(f"coefficient shape {coeffs.shape} does not match domain shape {domain.shape}")
        self.domain = domain
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros(domain.shape))

    @classmethod
    def from_values(cls, domain, values):
        return cls(domain, domain.forward(values))

    @classmethod
    def from_callable(cls, domain, fn: Callable):
        vals = np.broadcast_to(np.asarray(fn(*domain.grid()), dtype=float), domain.shape)
        return cls.from_values(domain, vals)

    @classmethod
    def mode(cls, domain, index, amplitude=1.0):
        """A single eigenfunction ``amplitude * phi_index`` (mode numbers, not array positions)."""
        index = tuple(np.atleast_1d(index))
        pos = tuple(int(np.searchsorted(domain.mode_numbers(a), index[a])) for a in range(domain.ndim))
        for a, p in enumerate(pos):
            if p >= domain.n_modes[a] or domain.mode_numbers(a)[p] != index[a]:
                raise DomainError(f"mode {index} is not retained on {domain}")
        c = np.zeros(domain.shape)
        c[pos] = amplitude
        return cls(domain, c)

    @property
    def values(self) -> np.ndarray:
        return self.domain.inverse(self.coeffs)

    def __call__(self, *points):
        return self.domain.evaluate_points(self.coeffs, points)

    def laplacian(self, power: int = 1) -> "GridFunction":
        return GridFunction(self.domain, self.domain.laplacian_coeffs(self.coeffs, power))

    def trace(self, kind="value", laplacian_power=0) -> np.ndarray:
        return self.domain.trace(self.coeffs, kind, laplacian_power)

    def integral(self) -> float:
        return float(self.domain.integral(self.coeffs))

    def mean(self) -> float:
        return float(self.domain.mean(self.coeffs))

    def l2_norm(self) -> float:
        return float(self.domain.l2_norm(self.coeffs))

    def project_mean_zero(self) -> "GridFunction":
        return GridFunction(self.domain, self.domain.project_mean_zero(self.coeffs))

    def resized(self, target: SpectralDomain) -> "GridFunction":
        return GridFunction(target, self.domain.resize(self.coeffs, target))

    def copy(self) -> "GridFunction":
        return GridFunction(self.domain, self.coeffs.copy())

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.domain != self.domain:
                raise DomainError("operands live on different domains")
            return other.coeffs
        return None

    def __add__(self, other):
        oc = self._other(other)
        if oc is None:
            return NotImplemented
        return GridFunction(self.domain, self.coeffs + oc)

    def __sub__(self, other):
        oc = self._other(other)
        if oc is None:
            return NotImplemented
        return GridFunction(self.domain, self.coeffs - oc)

    def __neg__(self):
        return GridFunction(self.domain, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, GridFunction):
            return dealiased_product(self, scalar)
        return GridFunction(self.domain, self.coeffs * float(scalar))

    def __rmul__(self, scalar):
        return self.__mul__(scalar)

    def __truediv__(self, scalar):
        return GridFunction(self.domain, self.coeffs / float(scalar))

    def __repr__(self):
        return f"GridFunction({self.domain!r}, |c|={np.linalg.norm(self.coeffs):.3e})"


def dealiased_product(f: GridFunction, g: GridFunction, factor: float = 1.5, truncate: bool = True) -> GridFunction:
    """Pointwise product evaluated on a refined grid.

    Both factors are padded to ``ceil(factor * N)`` modes, multiplied on the
    refined grid, transformed back and, unless ``truncate`` is false,
    truncated to the original modes. The untruncated result reproduces the
    product exactly at the refined nodes.
    """
    if f.domain != g.domain:
        raise DomainError("dealiased_product needs both factors on the same domain")
    if factor < 1.5:
        raise DomainError("refinement factor below 3/2 does not remove quadratic aliasing")
    dom = f.domain
    fine = dom.refined(factor)
    vals = fine.inverse(dom.resize(f.coeffs, fine)) * fine.inverse(dom.resize(g.coeffs, fine))
    prod = GridFunction(fine, fine.forward(vals))
    return prod.resized(dom) if truncate else prod
