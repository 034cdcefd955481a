"""Pointwise compatibility between initial and boundary data.

Initial fields may be GridFunctions, whose traces follow from the basis, or
callables of the space coordinates. Callables are resolved by Chebyshev
interpolation on the box so their boundary values and normal derivatives are
available; eigenbasis series of Dirichlet or Neumann type cannot carry
non-vanishing traces of the relevant order.

Time derivatives at ``t = 0`` use one-sided finite differences on the
supplied time grid (second order by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .domain import GridFunction, SpectralDomain
from .errors import BoundaryConditionError, ConfigError, DomainError
from .linear import ProblemData, sample_boundary, time_step, uniform_times

DEFAULT_DT = 1e-3


# ---------------------------------------------------------------------------
# finite differences in time


def fd_weights(deriv: int, n_points: int) -> np.ndarray:
    """One-sided weights ``w`` with ``sum_k w_k y(k) ~ y^(deriv)(0)`` for unit spacing."""
    if deriv == 0:
        return np.array([1.0])
    if n_points <= deriv:
        raise ValueError("need more points than the derivative order")
    k = np.arange(n_points, dtype=float)
    V = np.vander(k, n_points, increasing=True).T
    rhs = np.zeros(n_points)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(V, rhs)


def _stencil(deriv: int, fd_order: int, dt: float):
    w = fd_weights(deriv, deriv + fd_order if deriv else 1)
    return w / dt**deriv


def _derivative_at_zero(samples: np.ndarray, deriv: int, fd_order: int, dt: float) -> np.ndarray:
    w = _stencil(deriv, fd_order, dt)
    if samples.shape[0] < w.size:
        raise ConfigError(f"need at least {w.size} time samples for a derivative of order {deriv}")
    return np.tensordot(w, samples[: w.size], axes=(0, 0))


# ---------------------------------------------------------------------------
# fields with boundary traces


class ChebField:
    """Smooth field on the domain box given by tensor Chebyshev coefficients."""

    def __init__(self, domain: SpectralDomain, coeffs: np.ndarray):
        self.domain = domain
        self.coeffs = np.asarray(coeffs, dtype=float)

    @classmethod
    def from_callable(cls, domain: SpectralDomain, fn, sizes=(17, 33, 65, 129)) -> "ChebField":
        coeffs = None
        for n in sizes:
            coeffs = cls._interpolate(domain, fn, n)
            scale = max(np.max(np.abs(coeffs)), 1e-300)
            tail = max(np.max(np.abs(np.take(coeffs, range(n - 3, n), axis=a))) for a in range(domain.ndim))
            if tail <= 1e-13 * scale:
                break
        coeffs = np.where(np.abs(coeffs) < 1e-15 * np.max(np.abs(coeffs), initial=0.0), 0.0, coeffs)
        return cls(domain, coeffs)

    @staticmethod
    def _interpolate(domain, fn, n):
        xi = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        axes = [(xi + 1) * L / 2 for L in domain.lengths]
        vals = np.broadcast_to(np.asarray(fn(*np.meshgrid(*axes, indexing="ij")), dtype=float), (n,) * domain.ndim)
        vinv = np.linalg.inv(cheb.chebvander(xi, n - 1))
        out = vals
        for a in range(domain.ndim):
            out = np.moveaxis(np.tensordot(vinv, out, axes=([1], [a])), 0, a)
        return out

    def _xi(self, axis, x):
        return 2 * np.asarray(x, dtype=float) / self.domain.lengths[axis] - 1

    def derivative(self, axis: int, m: int = 1) -> "ChebField":
        d = cheb.chebder(self.coeffs, m=m, scl=2 / self.domain.lengths[axis], axis=axis)
        pad = [(0, 0)] * self.coeffs.ndim
        pad[axis] = (0, self.coeffs.shape[axis] - d.shape[axis])
        return ChebField(self.domain, np.pad(d, pad))

    def laplacian(self, power: int = 1) -> "ChebField":
        out = self
        for _ in range(power):
            parts = [out.derivative(a, 2).coeffs for a in range(self.domain.ndim)]
            out = ChebField(self.domain, sum(parts))
        return out

    def __call__(self, *points):
        if self.domain.ndim == 1:
            return cheb.chebval(self._xi(0, points[0]), self.coeffs)
        return cheb.chebval2d(self._xi(0, points[0]), self._xi(1, points[1]), self.coeffs)

    def trace(self, kind="value", laplacian_power=0) -> np.ndarray:
        fld = self.laplacian(laplacian_power) if laplacian_power else self
        pts, normals = self.domain.boundary_points
        if kind == "value":
            return fld(*pts)
        out = 0.0
        for a in range(self.domain.ndim):
            out = out + normals[a] * fld.derivative(a)(*pts)
        return out

    def integral(self) -> float:
        c = self.coeffs
        for a in reversed(range(self.domain.ndim)):
            c = cheb.chebint(c, m=1, lbnd=-1, scl=self.domain.lengths[a] / 2, axis=a)
            c = np.sum(c, axis=a)
        return float(c)

    def __add__(self, other):
        if isinstance(other, ChebField):
            n = np.maximum(self.coeffs.shape, other.coeffs.shape)
            pad = lambda c: np.pad(c, [(0, int(m - s)) for m, s in zip(n, c.shape)])
            return ChebField(self.domain, pad(self.coeffs) + pad(other.coeffs))
        return NotImplemented

    def __mul__(self, scalar):
        return ChebField(self.domain, self.coeffs * float(scalar))

    __rmul__ = __mul__


class FieldSum:
    """Sum of GridFunction and ChebField parts; linear operations act partwise."""

    def __init__(self, domain: SpectralDomain, parts=()):
        self.domain = domain
        grid = [p for p in parts if isinstance(p, GridFunction)]
        smooth = [p for p in parts if isinstance(p, ChebField)]
        self.parts = []
        if grid:
            self.parts.append(GridFunction(domain, sum(p.coeffs for p in grid)))
        if smooth:
            acc = smooth[0]
            for p in smooth[1:]:
                acc = acc + p
            self.parts.append(acc)

    def laplacian(self, power: int = 1) -> "FieldSum":
        return FieldSum(self.domain, [p.laplacian(power) for p in self.parts])

    def trace(self, kind="value", laplacian_power=0) -> np.ndarray:
        out = np.zeros(self.domain.n_boundary_points)
        for p in self.parts:
            out = out + p.trace(kind, laplacian_power)
        return out

    def integral(self) -> float:
        return float(sum(p.integral() for p in self.parts))

    def __call__(self, *points):
        return sum(p(*points) for p in self.parts) if self.parts else 0.0 * points[0]

    def __add__(self, other):
        return FieldSum(self.domain, self.parts + list(other.parts))

    def __mul__(self, scalar):
        return FieldSum(self.domain, [p * scalar for p in self.parts])

    __rmul__ = __mul__

    def simplify(self):
        """A single GridFunction when no smooth part is present."""
        if not self.parts:
            return GridFunction.zeros(self.domain)
        if len(self.parts) == 1 and isinstance(self.parts[0], GridFunction):
            return self.parts[0]
        return self


def as_field(u, domain: SpectralDomain) -> FieldSum:
    if u is None:
        return FieldSum(domain)
    if isinstance(u, FieldSum):
        return u
    if isinstance(u, GridFunction):
        if u.domain != domain:
            raise DomainError("field lives on a different domain")
        return FieldSum(domain, [u])
    if isinstance(u, ChebField):
        return FieldSum(domain, [u])
    if callable(u):
        return FieldSum(domain, [ChebField.from_callable(domain, u)])
    return FieldSum(domain, [GridFunction.from_values(domain, u)])


def forcing_derivative_at_zero(f, domain: SpectralDomain, times, deriv: int, fd_order: int = 2) -> FieldSum:
    """``d^deriv f / dt^deriv`` at ``t = 0`` as a field."""
    if f is None:
        return FieldSum(domain)
    dt = time_step(times)
    w = _stencil(deriv, fd_order, dt)
    if callable(f):
        ts = np.asarray(times, dtype=float)[: w.size] if len(times) >= w.size else np.arange(w.size) * dt
        return as_field(lambda *x: sum(wk * np.asarray(f(tk, *x), dtype=float) for wk, tk in zip(w, ts)), domain)
    arr = np.asarray(f, dtype=float)
    return as_field(_derivative_at_zero(arr, deriv, fd_order, dt), domain)


def _kind(domain: SpectralDomain) -> str:
    return "value" if domain.is_dirichlet else "normal"


# ---------------------------------------------------------------------------
# reports


@dataclass
class CompatEntry:
    cond_id: str
    description: str
    residual: float | None
    threshold: float | None
    passed: bool
    active: bool
    refs: tuple = ()
    informational: bool = False

    def to_dict(self):
        return {
            "id": self.cond_id,
            "description": self.description,
            "residual": self.residual,
            "threshold": self.threshold,
            "pass": self.passed,
            "active": self.active,
            "informational": self.informational,
            "refs": list(self.refs),
        }


@dataclass
class CompatReport:
    problem: str
    entries: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries if e.active and not e.informational)

    @property
    def active_ids(self) -> list:
        return [e.cond_id for e in self.entries if e.active]

    @property
    def failed_ids(self) -> list:
        return [e.cond_id for e in self.entries if e.active and not e.informational and not e.passed]

    def entry(self, cond_id: str) -> CompatEntry:
        for e in self.entries:
            if e.cond_id == cond_id:
                return e
        raise KeyError(cond_id)

    def summary(self) -> str:
        if self.passed:
            return f"{self.problem}: all {len(self.active_ids)} active conditions pass"
        worst = ", ".join(f"{e.cond_id} (residual {e.residual:.3e})" for e in self.entries if e.cond_id in self.failed_ids)
        return f"{self.problem}: failed {worst}"

    def to_dict(self):
        return {
            "problem": self.problem,
            "pass": self.passed,
            "active": self.active_ids,
            "entries": [e.to_dict() for e in self.entries],
            **self.notes,
        }


def _check(cond_id, description, lhs, rhs, tol, active, refs) -> CompatEntry:
    resid = float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs)), initial=0.0))
    return CompatEntry(cond_id, description, resid, tol, bool(resid <= tol), active, tuple(refs))


def _info(cond_id, description, refs=()) -> CompatEntry:
    return CompatEntry(cond_id, description, None, None, True, True, tuple(refs), informational=True)


def _resolve_times(times, data_arrays):
    if times is not None:
        return np.asarray(times, dtype=float)
    for arr in data_arrays:
        if arr is not None and not callable(arr):
            raise ConfigError("sampled data need the time grid they were sampled on")
    return uniform_times(8 * DEFAULT_DT, DEFAULT_DT)


def default_tolerance(dt: float, fd_order: int, scale: float) -> float:
    """Acceptance threshold that absorbs the finite-difference error in time."""
    return 1e-8 + 10.0 * dt**fd_order * max(1.0, scale)


# ---------------------------------------------------------------------------
# third-order problem


def _boundary_conditions(data: ProblemData, times, tol, fd_order, switch: float, normal: bool) -> CompatReport:
    domain = data.domain
    times = _resolve_times(times, (data.g, data.h))
    dt = time_step(times)
    G = sample_boundary(data.g, domain, times)
    H = sample_boundary(data.h, domain, times)
    nb = domain.n_boundary_points
    zero = np.zeros((times.size, nb))
    G = zero if G is None else G
    H = zero if H is None else H
    scale = float(np.max(np.abs(G), initial=0.0) + np.max(np.abs(H), initial=0.0))
    if tol is None:
        tol = default_tolerance(dt, fd_order, scale)
    d = lambda arr, m: _derivative_at_zero(arr, m, fd_order, dt)
    u0, u1, u2 = (as_field(x, domain) for x in (data.u0, data.u1, data.u2))
    kind = "normal" if normal else "value"
    tr = "dnu " if normal else ""
    late = data.p_exponent > switch
    thr = "3" if normal else "3/2"
    rep = CompatReport("neumann" if normal else "dirichlet")
    rep.entries += [
        _check("u0-trace", f"{tr}u0|G = g(0)", u0.trace(kind), d(G, 0), tol, True, ("u0", "g")),
        _check("u1-trace", f"{tr}u1|G = g_t(0)", u1.trace(kind), d(G, 1), tol, True, ("u1", "g")),
        _check("lap-u0-trace", f"{tr}Lap u0|G = h(0)", u0.trace(kind, 1), d(H, 0), tol, True, ("u0", "h")),
        _check(
            "lap-u1-trace", f"{tr}Lap u1|G = h_t(0), active for p > {thr}", u1.trace(kind, 1), d(H, 1), tol, late, ("u1", "h")
        ),
        _check("u2-trace", f"{tr}u2|G = g_tt(0), active for p > {thr}", u2.trace(kind), d(G, 2), tol, late, ("u2", "g")),
        _info("boundary-regularity", "time-space regularity of g and h (not checked numerically)", ("g", "h")),
        _info("initial-regularity", "Sobolev regularity of u0, u1, u2 (not checked numerically)", ("u0", "u1", "u2")),
    ]
    rep.notes = {"tolerance": tol, "dt": dt, "fd_order": fd_order, "p_exponent": data.p_exponent}
    return rep


def dirichlet_compat(data: ProblemData, times=None, tol=None, fd_order: int = 2) -> CompatReport:
    """Trace conditions linking initial data to Dirichlet data ``(u, Delta u) = (g, h)``.

    Always checks ``u0 = g(0)``, ``u1 = g_t(0)``, ``Delta u0 = h(0)`` on the
    boundary; ``Delta u1 = h_t(0)`` and ``u2 = g_tt(0)`` become active for
    ``p > 3/2``.
    """
    if not data.domain.is_dirichlet:
        raise BoundaryConditionError("dirichlet_compat needs a Dirichlet domain")
    return _boundary_conditions(data, times, tol, fd_order, 1.5, normal=False)


def neumann_compat(data: ProblemData, times=None, tol=None, fd_order: int = 2) -> CompatReport:
    """Normal-derivative analogue of :func:`dirichlet_compat`; late conditions need ``p > 3``."""
    if not data.domain.is_neumann:
        raise BoundaryConditionError("neumann_compat needs a Neumann domain")
    return _boundary_conditions(data, times, tol, fd_order, 3.0, normal=True)


# ---------------------------------------------------------------------------
# heat problem


def derived_initial(f, u0, mu: float, count: int, domain: SpectralDomain, times=None, fd_order: int = 2) -> list:
    """``u_j = d_t^{j-1} f(0) + (Delta - mu) u_{j-1}`` for ``j = 1..count``."""
    times = _resolve_times(times, (f,))
    out = []
    prev = as_field(u0, domain)
    for j in range(1, count + 1):
        fj = forcing_derivative_at_zero(f, domain, times, j - 1, fd_order)
        prev = fj + prev.laplacian() + prev * (-mu)
        out.append(prev.simplify())
    return out


def _forcing_trace(f, domain, times, power):
    """``gamma_B Delta^power f(t)`` at every time sample, shape ``(nt, nb)``."""
    kind = _kind(domain)
    if f is None:
        return np.zeros((len(times), domain.n_boundary_points))
    if callable(f):
        return np.stack([as_field(lambda *x, t=t: f(t, *x), domain).trace(kind, power) for t in times])
    coeffs = domain.forward(np.asarray(f, dtype=float))
    return domain.trace(coeffs, kind, power)


def derived_boundary(f, g, mu: float, count: int, domain: SpectralDomain, times=None) -> list:
    """``g_{j+1} = (d_t + mu) g_j - gamma_B Delta^j f`` on the time grid, ``j = 0..count-1``."""
    times = _resolve_times(times, (f, g))
    dt = time_step(times)
    gj = sample_boundary(g, domain, times)
    if gj is None:
        gj = np.zeros((times.size, domain.n_boundary_points))
    out = []
    for j in range(count):
        gj = np.gradient(gj, dt, axis=0, edge_order=2) + mu * gj - _forcing_trace(f, domain, times, j)
        out.append(gj)
    return out


def active_heat_range(l: int, k: int, p_exponent, bc: str) -> int:
    """Largest ``j`` with ``j <= l + k - j_B/2 - 3/(2p)``; ``-1`` if none."""
    jb = 0 if bc == "dirichlet" else 1
    p = Fraction(p_exponent) if not isinstance(p_exponent, Fraction) else p_exponent
    shift = Fraction(jb, 2) + Fraction(3, 2) / p
    if shift == 1:
        raise ConfigError(f"p_exponent={float(p)} makes j_B/2 + 3/(2p) = 1, which is excluded")
    bound = l + k - shift
    return math.floor(bound) if bound >= 0 else -1


def heat_higher_compat(
    f, g, u0, mu: float, l: int, k: int, p_exponent: float, domain: SpectralDomain, times=None, tol=None, fd_order: int = 2
) -> CompatReport:
    """Conditions ``d_t^j g(0) = gamma_B u_j`` for the shifted heat problem.

    ``u_j`` follows :func:`derived_initial` for ``j < l + k``; the condition
    for ``j`` is active when ``j <= l + k - j_B/2 - 3/(2p)`` with ``j_D = 0``
    and ``j_N = 1``.
    """
    if l < 0 or k < 1:
        raise ConfigError(f"need l >= 0 and k >= 1, got l={l}, k={k}")
    jmax = active_heat_range(l, k, p_exponent, domain.bc)
    times = _resolve_times(times, (f, g))
    dt = time_step(times)
    G = sample_boundary(g, domain, times)
    if G is None:
        G = np.zeros((times.size, domain.n_boundary_points))
    top = l + k - 1
    us = [as_field(u0, domain)] + [as_field(u, domain) for u in derived_initial(f, u0, mu, top, domain, times, fd_order)]
    scale = float(np.max(np.abs(G), initial=0.0))
    if tol is None:
        tol = default_tolerance(dt, fd_order, scale)
    kind = _kind(domain)
    rep = CompatReport(f"heat-{domain.bc}")
    for j in range(1, top + 1):
        rep.entries.append(_info(f"u{j}-def", f"u{j} = d_t^{j - 1} f(0) + (Lap - mu) u{j - 1}", ("f", "u0")))
    for j in range(top + 1):
        lhs = _derivative_at_zero(G, j, fd_order, dt)
        rep.entries.append(
            _check(f"trace-j{j}", f"d_t^{j} g(0) = gamma u{j}", lhs, us[j].trace(kind), tol, j <= jmax, ("g", "u0", "f"))
        )
    rep.notes = {"tolerance": tol, "j_max": jmax, "l": l, "k": k, "p_exponent": float(p_exponent)}
    return rep


# ---------------------------------------------------------------------------
# Neumann mean constraint


def neumann_mean_compat(f, g, u0, domain: SpectralDomain, times=None, tol: float = 1e-8) -> CompatReport:
    """``int u0 = 0`` and ``int f(t) + int_Gamma g(t) = 0`` at every time sample."""
    if not domain.is_neumann:
        raise BoundaryConditionError("the mean constraint applies to Neumann domains")
    times = _resolve_times(times, (f, g))
    rep = CompatReport("neumann-mean")
    rep.entries.append(_check("u0-mean", "int u0 = 0", as_field(u0, domain).integral(), 0.0, tol, True, ("u0",)))
    G = sample_boundary(g, domain, times)
    from .linear import boundary_average

    flux = np.zeros(times.size) if G is None else boundary_average(domain, G) * domain.boundary_measure
    if f is None:
        fint = np.zeros(times.size)
    elif callable(f):
        fint = np.array([as_field(lambda *x, t=t: f(t, *x), domain).integral() for t in times])
    else:
        fint = domain.integral(domain.forward(np.asarray(f, dtype=float)))
    rep.entries.append(_check("flux-balance", "int f + int_G g = 0", fint + flux, 0.0, tol, True, ("f", "g")))
    rep.notes = {"tolerance": tol}
    return rep
