"""Linear solvers: heat, strongly damped wave, and the composed third-order problem.

All solvers work mode by mode. Inhomogeneous boundary data are removed with a
polynomial lifting ``u = v + l(g)``; the remainder ``v`` satisfies homogeneous
conditions and is advanced with the exact propagator of its mode plus a
Duhamel quadrature for the forcing (piecewise linear, or piecewise cubic
Hermite when the forcing's time derivative is available).

Boundary data are sampled at ``domain.boundary_points``: the two endpoints of
an interval, or the edge samples of a rectangle. Inhomogeneous boundary data
are supported on intervals; rectangles accept homogeneous data only.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_trapezoid

from .blockop import PdeParams, mode_matrix, mode_propagator
from .domain import GridFunction, SpectralDomain
from .errors import ConfigError, DomainError, ValidationError


# ---------------------------------------------------------------------------
# containers


def uniform_times(horizon: float, dt: float) -> np.ndarray:
    if not (dt > 0 and horizon > 0):
        raise ConfigError(f"need positive horizon and step, got T={horizon}, dt={dt}")
    n = int(round(horizon / dt))
    if n < 1 or not math.isclose(n * dt, horizon, rel_tol=1e-9):
        raise ConfigError(f"horizon {horizon} is not an integer multiple of dt={dt}")
    return np.arange(n + 1) * dt


def time_step(times: np.ndarray) -> float:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or times[0] != 0.0:
        raise ConfigError("time grid must be one-dimensional, start at 0 and have at least two samples")
    dt = np.diff(times)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * dt.mean():
        raise ConfigError("time grid must be uniform and increasing")
    return float(dt.mean())


@dataclass
class ProblemData:
    """Forcing, boundary and initial data of a linear problem.

    ``f`` is a callable ``f(t, *grid)`` or an array of grid values with shape
    ``(nt, *domain.shape)``. ``g`` and ``h`` are callables
    ``g(t, *boundary_points)`` or arrays of shape ``(nt, n_boundary_points)``;
    they hold values (Dirichlet) or outward normal derivatives (Neumann) of
    ``u`` and ``Delta u``. Initial fields may be GridFunctions, callables of
    the space coordinates, or grid-value arrays. ``None`` means zero.
    """

    domain: SpectralDomain
    f: object = None
    g: object = None
    h: object = None
    u0: object = None
    u1: object = None
    u2: object = None
    p_exponent: float = 2.0

    def __post_init__(self):
        p = float(self.p_exponent)
        if not p > 1:
            raise ConfigError(f"p_exponent must exceed 1, got {p}")
        if (self.domain.is_dirichlet and p == 1.5) or (self.domain.is_neumann and p == 3.0):
            raise ConfigError(f"p_exponent={p} is an excluded borderline value for {self.domain.bc} data")
        self.p_exponent = p


@dataclass
class FieldState:
    time: float
    u: GridFunction
    ut: GridFunction
    utt: GridFunction


@dataclass
class FieldSeries:
    """Coefficient arrays of ``u``, ``u_t``, ``u_tt`` on a time grid."""

    domain: SpectralDomain
    times: np.ndarray
    u: np.ndarray
    ut: np.ndarray | None = None
    utt: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def field(self, name: str, i: int) -> GridFunction:
        return GridFunction(self.domain, getattr(self, name)[i])

    def state(self, i: int) -> FieldState:
        zero = np.zeros(self.domain.shape)
        pick = lambda arr: GridFunction(self.domain, arr[i] if arr is not None else zero)
        return FieldState(float(self.times[i]), pick(self.u), pick(self.ut), pick(self.utt))

    def values(self, name: str = "u") -> np.ndarray:
        return self.domain.inverse(getattr(self, name))

    def mean(self, name: str = "u") -> np.ndarray:
        return self.domain.mean(getattr(self, name))


@dataclass
class MeanTrajectory:
    times: np.ndarray
    w: np.ndarray
    wt: np.ndarray
    wtt: np.ndarray | None = None


# ---------------------------------------------------------------------------
# sampling


def _n_positional(fn) -> int | None:
    try:
        sig = inspect.signature(fn)
    except (TypeError, ValueError):
        return None
    kinds = (inspect.Parameter.POSITIONAL_ONLY, inspect.Parameter.POSITIONAL_OR_KEYWORD)
    if any(p.kind == inspect.Parameter.VAR_POSITIONAL for p in sig.parameters.values()):
        return None
    return sum(p.kind in kinds for p in sig.parameters.values())


def sample_space(u, domain: SpectralDomain) -> np.ndarray:
    """Grid values of an initial field."""
    if u is None:
        return np.zeros(domain.shape)
    if isinstance(u, GridFunction):
        if u.domain != domain:
            raise DomainError("initial field lives on a different domain")
        return u.values
    if callable(u):
        return np.array(np.broadcast_to(np.asarray(u(*domain.grid()), dtype=float), domain.shape))
    arr = np.asarray(u, dtype=float)
    if arr.shape != domain.shape:
        raise DomainError(f"initial field shape {arr.shape} does not match grid {domain.shape}")
    return arr


def sample_forcing(f, domain: SpectralDomain, times: np.ndarray) -> np.ndarray | None:
    if f is None:
        return None
    shape = (times.size,) + domain.shape
    if callable(f):
        grid = domain.grid()
        return np.stack([np.broadcast_to(np.asarray(f(t, *grid), dtype=float), domain.shape) for t in times])
    arr = np.asarray(f, dtype=float)
    if arr.shape != shape:
        raise DomainError(f"forcing shape {arr.shape} does not match time x space grid {shape}")
    return arr


def sample_boundary(g, domain: SpectralDomain, times: np.ndarray) -> np.ndarray | None:
    if g is None:
        return None
    nb = domain.n_boundary_points
    if callable(g):
        pts = domain.boundary_points[0]
        nargs = _n_positional(g)
        if nargs == 1:
            call = lambda t: g(t)
        else:
            call = lambda t: g(t, *pts)
        return np.stack([np.broadcast_to(np.asarray(call(t), dtype=float), (nb,)) for t in times])
    arr = np.asarray(g, dtype=float)
    if arr.shape != (times.size, nb):
        raise DomainError(f"boundary data shape {arr.shape} does not match {(times.size, nb)}")
    return arr


def time_derivative(samples: np.ndarray, dt: float, order: int = 1) -> np.ndarray:
    out = samples
    for _ in range(order):
        out = np.gradient(out, dt, axis=0, edge_order=2)
    return out


def _is_zero(arr) -> bool:
    return arr is None or not np.any(arr)


# ---------------------------------------------------------------------------
# boundary lifting


def _lift_power_coeffs(domain: SpectralDomain, G: np.ndarray, H: np.ndarray | None = None) -> np.ndarray:
    """Power-basis coefficients ``(..., 5)`` of the interval lifting polynomial.

    Dirichlet: ``P = g`` at both ends and, when ``H`` is given, ``P'' = h``.
    Neumann: outward slopes ``g`` and, when ``H`` is given, outward third
    derivatives ``h``; the constant makes the mean zero.
    """
    L = domain.lengths[0]
    g0, gL = G[..., 0], G[..., 1]
    if H is None:
        h0 = hL = np.zeros_like(g0)
    else:
        h0, hL = H[..., 0], H[..., 1]
    c = np.zeros(G.shape[:-1] + (5,))
    if domain.is_dirichlet:
        c[..., 0] = g0
        c[..., 1] = (gL - g0) / L - h0 * L / 3 - hL * L / 6
        c[..., 2] = h0 / 2
        c[..., 3] = (hL - h0) / (6 * L)
    else:
        C = (g0 + gL) / L + h0 * L / 3 - hL * L / 6
        c[..., 1] = -g0
        c[..., 2] = C / 2
        c[..., 3] = -h0 / 6
        c[..., 4] = (h0 + hL) / (24 * L)
        c[..., 0] = -sum(c[..., p] * L**p / (p + 1) for p in range(1, 5))
    return c


def _poly_on_grid(domain: SpectralDomain, coeffs: np.ndarray, deriv: int = 0) -> np.ndarray:
    x = domain.nodes(0)
    mat = np.zeros((5, x.size))
    for p in range(deriv, 5):
        mat[p] = math.perm(p, deriv) * x ** (p - deriv)
    return coeffs @ mat


class _Lifting:
    """Polynomial lifting of boundary data on an interval; zero on rectangles.

    ``G`` holds the traces of ``u`` and ``H`` (optional) those of
    ``Delta u``, both with shape ``(nt, 2)``.
    """

    def __init__(self, domain: SpectralDomain, G, H=None):
        self.domain = domain
        self.active = not (_is_zero(G) and _is_zero(H))
        if self.active and domain.ndim != 1:
            raise NotImplementedError("inhomogeneous boundary data are supported on intervals only")
        self.H = None if _is_zero(H) else H

    def values(self, G, H=None) -> np.ndarray:
        out = _poly_on_grid(self.domain, _lift_power_coeffs(self.domain, G, H))
        if self.domain.is_neumann:
            # zero discrete mean keeps the constant mode free of lifting terms
            out = out - self.domain.mean(self.domain.forward(out))[..., None]
        return out

    def laplacian(self, G, H=None) -> np.ndarray:
        return _lift_laplacian(self.domain, _lift_power_coeffs(self.domain, G, H), G)


def _lift_laplacian(domain: SpectralDomain, coeffs: np.ndarray, G) -> np.ndarray:
    out = _poly_on_grid(domain, coeffs, deriv=2)
    if domain.is_neumann:
        # the mean of Delta l is the boundary flux; enforce it for the discrete mean as well
        flux = np.asarray(G)[..., 0] + np.asarray(G)[..., 1]
        out = out + (flux / domain.volume - domain.mean(domain.forward(out)))[..., None]
    return out


def lifted_laplacian(domain: SpectralDomain, values: np.ndarray, G=None, H=None) -> np.ndarray:
    """Grid values of ``Delta u`` for a field whose boundary traces are known.

    ``G`` and ``H`` are the traces of ``u`` and ``Delta u`` (values for
    Dirichlet, outward normal derivatives for Neumann). The polynomial
    carrying them is differentiated exactly; the remainder has homogeneous
    traces and is differentiated spectrally.
    """
    if _is_zero(G) and _is_zero(H):
        return domain.inverse(domain.laplacian_coeffs(domain.forward(values)))
    if domain.ndim != 1:
        raise NotImplementedError("inhomogeneous boundary data are supported on intervals only")
    G = np.zeros(2) if G is None else np.asarray(G, dtype=float)
    H = np.zeros(2) if H is None else np.asarray(H, dtype=float)
    pc = _lift_power_coeffs(domain, G, H)
    rest = values - _poly_on_grid(domain, pc)
    return _lift_laplacian(domain, pc, G) + domain.inverse(domain.laplacian_coeffs(domain.forward(rest)))


# ---------------------------------------------------------------------------
# modal Duhamel integration


def duhamel_weights(K: np.ndarray, h: float, order: int = 1):
    """Propagator and Duhamel weights for ``y' = -K y + F(t)`` over one step.

    Returns ``E = exp(-hK)`` and ``W_j = int_0^h exp(-(h-s)K) (s/h)^j / j! ds``
    for ``j = 0..order``; ``K`` may carry leading batch axes.
    """
    K = np.asarray(K, dtype=float)
    d = K.shape[-1]
    n = d * (order + 2)
    Z = np.zeros(K.shape[:-2] + (n, n))
    Z[..., :d, :d] = -h * K
    eye = np.eye(d)
    Z[..., :d, d : 2 * d] = h * eye
    for j in range(1, order + 1):
        Z[..., d * j : d * (j + 1), d * (j + 1) : d * (j + 2)] = eye
    X = scipy.linalg.expm(Z)
    E = X[..., :d, :d]
    W = [X[..., :d, d * (j + 1) : d * (j + 2)] for j in range(order + 1)]
    return E, W


def _integrate_modes(K, y0, h, n_steps, F=None, F_dot=None, F_ddot=None):
    """Advance ``y' = -K y + F`` on a uniform grid; arrays are ``(modes, d)``.

    ``F``, ``F_dot`` and ``F_ddot`` have shape ``(nt, modes, d)``. The
    forcing between samples is the linear interpolant, or the cubic (quintic)
    Hermite interpolant when its first (and second) derivative is supplied.
    """
    degree = 1 if F_dot is None else (3 if F_ddot is None else 5)
    E, W = duhamel_weights(K, h, degree)
    out = np.empty((n_steps + 1,) + y0.shape)
    out[0] = y0
    y = y0
    mv = lambda A, x: np.einsum("mij,mj->mi", A, x)
    for n in range(n_steps):
        y = mv(E, y)
        if F is not None:
            F0, F1 = F[n], F[n + 1]
            if degree == 1:
                y = y + mv(W[0], F0) + mv(W[1], F1 - F0)
            elif degree == 3:
                D0, D1 = h * F_dot[n], h * F_dot[n + 1]
                a2 = -3 * F0 - 2 * D0 + 3 * F1 - D1
                a3 = 2 * F0 + D0 - 2 * F1 + D1
                y = y + mv(W[0], F0) + mv(W[1], D0) + 2 * mv(W[2], a2) + 6 * mv(W[3], a3)
            else:
                D0, D1 = h * F_dot[n], h * F_dot[n + 1]
                S0, S1 = h * h * F_ddot[n], h * h * F_ddot[n + 1]
                r0 = F1 - F0 - D0 - S0 / 2
                r1 = D1 - D0 - S0
                r2 = S1 - S0
                a3 = 10 * r0 - 4 * r1 + r2 / 2
                a4 = -15 * r0 + 7 * r1 - r2
                a5 = 6 * r0 - 3 * r1 + r2 / 2
                y = (
                    y
                    + mv(W[0], F0)
                    + mv(W[1], D0)
                    + mv(W[2], S0)
                    + 6 * mv(W[3], a3)
                    + 24 * mv(W[4], a4)
                    + 120 * mv(W[5], a5)
                )
        out[n + 1] = y
    return out


def _flat(domain: SpectralDomain, arr: np.ndarray) -> np.ndarray:
    lead = arr.shape[: arr.ndim - domain.ndim]
    return arr.reshape(lead + (-1,))


def _unflat(domain: SpectralDomain, arr: np.ndarray) -> np.ndarray:
    return arr.reshape(arr.shape[:-1] + domain.shape)


# ---------------------------------------------------------------------------
# heat


def _neumann_mean_guard(domain, mu, track_mean, u0v, fv, G):
    if not domain.is_neumann or mu > 0 or track_mean:
        return
    bad = abs(float(domain.mean(domain.forward(u0v)))) > 1e-12
    bad |= fv is not None and np.max(np.abs(domain.mean(domain.forward(fv)))) > 1e-12
    bad |= G is not None and np.max(np.abs(G.sum(axis=-1))) > 1e-12
    if bad:
        raise ValidationError(
            "Neumann heat problem with mu = 0 and data of nonzero mean; pass track_mean=True to follow the mean"
        )


def solve_heat(
    domain: SpectralDomain,
    times,
    a: float = 1.0,
    mu: float = 0.0,
    f=None,
    g=None,
    u0=None,
    f_dot=None,
    f_ddot=None,
    f_boundary=None,
    track_mean: bool = False,
) -> FieldSeries:
    """Solve ``u_t + mu u - a Delta u = f`` with ``B u = g`` and ``u(0) = u0``.

    Returns ``u`` and ``u_t``; ``u_tt`` as well when ``f_dot`` (grid values
    of ``f_t``) is given, which also switches the Duhamel quadrature to cubic
    Hermite; ``f_ddot`` (grid values of ``f_tt``) raises it to quintic
    Hermite. On a Dirichlet interval, the boundary values of ``f`` (taken
    from ``f_boundary`` or from a callable ``f``) fix ``Delta u`` on the
    boundary, and the lifting carries that trace too, so the remainder
    forcing vanishes at the endpoints.
    """
    if a <= 0 or mu < 0:
        raise ConfigError(f"need a > 0 and mu >= 0, got a={a}, mu={mu}")
    times = np.asarray(times, dtype=float)
    dt = time_step(times)
    fv = sample_forcing(f, domain, times)
    fdv = sample_forcing(f_dot, domain, times)
    fddv = None if fdv is None else sample_forcing(f_ddot, domain, times)
    G = sample_boundary(g, domain, times)
    u0v = sample_space(u0, domain)
    _neumann_mean_guard(domain, mu, track_mean, u0v, fv, G)

    FB = sample_boundary(f_boundary, domain, times)
    if FB is None and callable(f) and domain.ndim == 1:
        FB = np.stack([np.asarray(f(t, domain.boundary_points[0][0]), dtype=float) for t in times])
    H = None
    if domain.is_dirichlet and domain.ndim == 1 and not _is_zero(FB):
        Gz = np.zeros_like(FB) if G is None else G
        H = (time_derivative(Gz, dt) + mu * Gz - FB) / a
        G = Gz
    lift = _Lifting(domain, G, H)

    F = np.zeros((times.size,) + domain.shape) if fv is None else fv.copy()
    Fd = None if fdv is None else fdv.copy()
    Fdd = None if fddv is None else fddv.copy()
    v0 = u0v
    if lift.active:
        d = lambda arr, m: None if arr is None else time_derivative(arr, dt, m)
        Gt, Ht = d(G, 1), d(H, 1)
        ell, ell_t = lift.values(G, H), lift.values(Gt, Ht)
        F += -ell_t - mu * ell + a * lift.laplacian(G, H)
        v0 = u0v - ell[0]
        if Fd is not None:
            Gtt, Htt = d(G, 2), d(H, 2)
            ell_tt = lift.values(Gtt, Htt)
            Fd += -ell_tt - mu * ell_t + a * lift.laplacian(Gt, Ht)
        if Fdd is not None:
            Fdd += -lift.values(d(G, 3), d(H, 3)) - mu * ell_tt + a * lift.laplacian(Gtt, Htt)
    Fc = domain.forward(F)
    Fdc = None if Fd is None else domain.forward(Fd)
    Fddc = None if Fdd is None else domain.forward(Fdd)
    lam = domain.eigenvalues
    K = (mu + a * lam).reshape(-1, 1, 1)
    y = _integrate_modes(
        K,
        _flat(domain, domain.forward(v0))[:, None],
        dt,
        times.size - 1,
        _flat(domain, Fc)[..., None],
        None if Fdc is None else _flat(domain, Fdc)[..., None],
        None if Fddc is None else _flat(domain, Fddc)[..., None],
    )
    v = _unflat(domain, y[..., 0])
    vt = Fc - (mu + a * lam) * v
    u, ut, utt = v, vt, None
    if lift.active:
        u = v + domain.forward(ell)
        ut = vt + domain.forward(ell_t)
    if Fdc is not None:
        utt = Fdc - (mu + a * lam) * vt
        if lift.active:
            utt = utt + domain.forward(ell_tt)
    return FieldSeries(domain, times, u, ut, utt)


# ---------------------------------------------------------------------------
# strongly damped wave


def solve_westervelt_linear(
    domain: SpectralDomain,
    times,
    b: float = 1.0,
    c: float = 1.0,
    f=None,
    g=None,
    u0=None,
    u1=None,
) -> FieldSeries:
    """Solve ``u_tt - b Delta u_t - c^2 Delta u = f`` with ``B u = g``."""
    if b <= 0 or c <= 0:
        raise ConfigError(f"need b > 0 and c > 0, got b={b}, c={c}")
    times = np.asarray(times, dtype=float)
    dt = time_step(times)
    fv = sample_forcing(f, domain, times)
    G = sample_boundary(g, domain, times)
    u0v, u1v = sample_space(u0, domain), sample_space(u1, domain)
    lift = _Lifting(domain, G)

    F = np.zeros((times.size,) + domain.shape) if fv is None else fv.copy()
    v0, v1 = u0v, u1v
    if lift.active:
        Gt, Gtt = time_derivative(G, dt), time_derivative(G, dt, 2)
        ell, ell_t, ell_tt = lift.values(G), lift.values(Gt), lift.values(Gtt)
        F += -ell_tt + b * lift.laplacian(Gt) + c * c * lift.laplacian(G)
        v0, v1 = u0v - ell[0], u1v - ell_t[0]
    Fc = domain.forward(F)
    lam = _flat(domain, domain.eigenvalues)
    K = np.zeros((lam.size, 2, 2))
    K[:, 0, 1] = -1.0
    K[:, 1, 0] = c * c * lam
    K[:, 1, 1] = b * lam
    y0 = np.stack([_flat(domain, domain.forward(v0)), _flat(domain, domain.forward(v1))], axis=-1)
    Ff = np.zeros((times.size, lam.size, 2))
    Ff[..., 1] = _flat(domain, Fc)
    y = _integrate_modes(K, y0, dt, times.size - 1, Ff if fv is not None or lift.active else None)
    v, vt = _unflat(domain, y[..., 0]), _unflat(domain, y[..., 1])
    lam_s = domain.eigenvalues
    vtt = Fc - b * lam_s * vt - c * c * lam_s * v
    if lift.active:
        return FieldSeries(
            domain,
            times,
            v + domain.forward(ell),
            vt + domain.forward(ell_t),
            vtt + domain.forward(ell_tt),
        )
    return FieldSeries(domain, times, v, vt, vtt)


# ---------------------------------------------------------------------------
# composed third-order problem


def check_compatibility(data: ProblemData, times, tol=None):
    from . import compat

    if data.domain.is_dirichlet:
        return compat.dirichlet_compat(data, times, tol=tol)
    return compat.neumann_compat(data, times, tol=tol)


def solve_bc_linear(
    data: ProblemData, times, params: PdeParams, force: bool = False, compat_tol=None
) -> FieldSeries:
    """Solve ``(a Delta - d/dt)(u_tt - b Delta u_t - c^2 Delta u) = f`` in two stages.

    Stage one solves the strongly damped wave equation for
    ``w = a Delta u - u_t`` with boundary value ``a h - g_t`` and initial
    data ``(a Delta u0 - u1, a Delta u1 - u2)``. Stage two solves
    ``u_t - a Delta u = -w`` with ``B u = g`` and ``u(0) = u0``.
    ``extra`` holds ``w`` and ``w_t``.
    """
    domain = data.domain
    times = np.asarray(times, dtype=float)
    dt = time_step(times)
    if not force:
        report = check_compatibility(data, times, compat_tol)
        if not report.passed:
            raise ValidationError("data violate the compatibility conditions: " + report.summary(), report)
    a = params.a
    G = sample_boundary(data.g, domain, times)
    H = sample_boundary(data.h, domain, times)
    u0v, u1v, u2v = (sample_space(x, domain) for x in (data.u0, data.u1, data.u2))

    Gt = None if G is None else time_derivative(G, dt)
    Ht = None if H is None else time_derivative(H, dt)
    pick = lambda arr, i: None if arr is None else arr[i]
    w0 = a * lifted_laplacian(domain, u0v, pick(G, 0), pick(H, 0)) - u1v
    w1 = a * lifted_laplacian(domain, u1v, pick(Gt, 0), pick(Ht, 0)) - u2v

    WB = None
    if G is not None or H is not None:
        WB = np.zeros((times.size, domain.n_boundary_points))
        if H is not None:
            WB += a * H
        if G is not None:
            WB -= Gt
    stage1 = solve_westervelt_linear(domain, times, params.b, params.c, data.f, WB, w0, w1)
    w, wt = stage1.u, stage1.ut
    stage2 = solve_heat(
        domain,
        times,
        a=a,
        mu=0.0,
        f=-domain.inverse(w),
        g=G,
        u0=u0v,
        f_dot=-domain.inverse(wt),
        f_ddot=-domain.inverse(stage1.utt),
        f_boundary=None if WB is None else -WB,
        track_mean=True,
    )
    return FieldSeries(domain, times, stage2.u, stage2.ut, stage2.utt, {"w": w, "wt": wt})


def solve_direct(data: ProblemData, times, params: PdeParams) -> FieldSeries:
    """Propagate ``v = (u, u_t, u_tt - b Delta u_t - c^2 Delta u)`` mode by mode.

    Homogeneous boundary data only. Without forcing the exact propagator is
    applied at every output time; with forcing, piecewise-linear Duhamel steps
    are used.
    """
    domain = data.domain
    times = np.asarray(times, dtype=float)
    for g in (data.g, data.h):
        if not _is_zero(sample_boundary(g, domain, times)):
            raise ConfigError("the direct propagator handles homogeneous boundary data only")
    dt = time_step(times)
    b, c = params.b, params.c
    lam = _flat(domain, domain.eigenvalues)
    coeffs = [_flat(domain, domain.forward(sample_space(x, domain))) for x in (data.u0, data.u1, data.u2)]
    y0 = np.stack([coeffs[0], coeffs[1], coeffs[2] + b * lam * coeffs[1] + c * c * lam * coeffs[0]], axis=-1)
    fv = sample_forcing(data.f, domain, times)
    if fv is None:
        y = np.empty((times.size,) + y0.shape)
        for m, lv in enumerate(lam):
            y[:, m] = mode_propagator(mode_matrix(lv, params), times) @ y0[m]
    else:
        K = np.stack([mode_matrix(lv, params).matrix for lv in lam])
        Ff = np.zeros((times.size, lam.size, 3))
        Ff[..., 2] = -_flat(domain, domain.forward(fv))
        y = _integrate_modes(K, y0, dt, times.size - 1, Ff)
    u, ut, v3 = (_unflat(domain, y[..., i]) for i in range(3))
    lam_s = domain.eigenvalues
    utt = v3 - b * lam_s * ut - c * c * lam_s * u
    return FieldSeries(domain, times, u, ut, utt)


# ---------------------------------------------------------------------------
# Neumann mean dynamics


def neumann_mean_ode(
    times,
    params: PdeParams,
    domain: SpectralDomain,
    order: int = 2,
    f_bar=None,
    g_bar=None,
    h_bar=None,
    u0_mean: float = 0.0,
    u1_mean: float = 0.0,
    u2_mean: float = 0.0,
) -> MeanTrajectory:
    """Spatial mean of a Neumann solution from boundary fluxes and forcing.

    ``g_bar`` and ``h_bar`` are boundary averages of the fluxes of ``u`` and
    ``Delta u``; ``f_bar`` is the spatial mean of the forcing. With
    ``r = |Gamma| / |Omega|``:

    * order 1 (heat ``u_t - a Delta u = f``): ``m_t = f_bar + a r g_bar``
    * order 2 (``u_tt - b Delta u_t = f``): ``m_tt = f_bar + b r g_bar_t``
    * order 3 (full linear problem):
      ``m_ttt = -f_bar + r((a+b) g_bar_tt + c^2 g_bar_t - a b h_bar_t - a c^2 h_bar)``
    """
    if order not in (1, 2, 3):
        raise ConfigError(f"order must be 1, 2 or 3, got {order}")
    if not domain.is_neumann:
        raise ConfigError("mean dynamics are defined for Neumann domains")
    times = np.asarray(times, dtype=float)
    dt = time_step(times)
    r = domain.boundary_measure / domain.volume
    zeros = np.zeros(times.size)
    as_series = lambda s: zeros if s is None else np.broadcast_to(np.asarray(s, dtype=float), times.shape).copy()
    f_bar, g_bar, h_bar = as_series(f_bar), as_series(g_bar), as_series(h_bar)
    integ = lambda y: cumulative_trapezoid(y, times, initial=0.0)
    a, b, c = params.a, params.b, params.c

    if order == 1:
        rate = f_bar + a * r * g_bar
        return MeanTrajectory(times, u0_mean + integ(rate), rate)
    g_t = np.gradient(g_bar, dt, edge_order=2)
    if order == 2:
        wtt = f_bar + b * r * g_t
        wt = u1_mean + integ(f_bar) + b * r * (g_bar - g_bar[0])
        return MeanTrajectory(times, u0_mean + integ(wt), wt, wtt)
    wtt = (
        u2_mean
        + integ(-f_bar - a * c * c * r * h_bar)
        + r * ((a + b) * (g_t - g_t[0]) + c * c * (g_bar - g_bar[0]) - a * b * (h_bar - h_bar[0]))
    )
    wt = u1_mean + integ(wtt)
    return MeanTrajectory(times, u0_mean + integ(wt), wt, wtt)


def boundary_average(domain: SpectralDomain, G: np.ndarray) -> np.ndarray:
    """``|Gamma|^{-1} int_Gamma g`` for sampled boundary data."""
    G = np.asarray(G, dtype=float)
    if domain.ndim == 1:
        return G.mean(axis=-1)
    lx, ly = domain.lengths
    nx, ny = domain.n_modes
    w = np.concatenate([np.full(2 * ny, ly / ny), np.full(2 * nx, lx / nx)])
    return (G * w).sum(axis=-1) / domain.boundary_measure
