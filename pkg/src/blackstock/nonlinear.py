"""Pseudospectral simulation of the nonlinear equation.

The state is ``v = (u, u_t, u_tt - b Delta u_t - c^2 Delta u)`` per mode. Its
linear part is the block ``-M``; the nonlinearity only enters the third
component through

    R = (-2k u_t Lin - Q) / (1 + 2k u_t),
    Lin = (a+b) Delta u_tt + c^2 Delta u_t - ab Delta^2 u_t - a c^2 Delta^2 u,
    Q = 2k u_tt^2 + 2s (|grad u_t|^2 + grad u . grad u_tt),

which is ``u_ttt - Lin`` after solving the chain-rule expansion of
``(k u_t^2 + s |grad u|^2)_tt`` for ``u_ttt``. Products and the division are
evaluated on a grid refined by 3/2 and projected back onto the basis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .blockop import PdeParams, mode_matrix, mode_propagator
from .domain import GridFunction, SpectralDomain
from .errors import ConfigError, DivergenceError, GuardViolationError, NumericalError, ValidationError
from .linear import (
    FieldSeries,
    FieldState,
    ProblemData,
    check_compatibility,
    sample_boundary,
    sample_space,
    solve_bc_linear,
    uniform_times,
)

log = logging.getLogger(__name__)

INTEGRATORS = ("if-rk4", "rk4")
SOLVERS = ("direct-quasilinear", "picard")


@dataclass(frozen=True)
class SimConfig:
    params: PdeParams
    domain: SpectralDomain
    T: float = 30.0
    dt: float = 1e-3
    guard: float = 0.5
    solver: str = "direct-quasilinear"
    integrator: str = "if-rk4"
    picard_max_iter: int = 50
    picard_tol: float = 1e-12
    record_every: int = 1

    def __post_init__(self):
        if not 0 < self.guard < 1:
            raise ConfigError(f"guard must lie in (0, 1), got {self.guard}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"unknown integrator {self.integrator!r}; expected one of {INTEGRATORS}")
        if self.record_every < 1 or self.picard_max_iter < 1:
            raise ConfigError("record_every and picard_max_iter must be positive")
        uniform_times(self.T, self.dt)

    @property
    def times(self) -> np.ndarray:
        return uniform_times(self.T, self.dt)


class _Nonlinearity:
    """Evaluates the nonlinear remainder on the refined grid."""

    def __init__(self, domain: SpectralDomain, params: PdeParams, guard: float):
        self.domain = domain
        self.fine = domain.refined(1.5)
        self.params = params
        self.guard = guard
        self.lam = domain.eigenvalues
        self.last_guard_min = 1.0
        self._grad_orders = [tuple(int(a == b) for b in range(domain.ndim)) for a in range(domain.ndim)]

    def grid(self, coeffs, deriv=None):
        return self.domain.evaluate_grid(coeffs, deriv, target=self.fine)

    def grad(self, coeffs):
        return [self.grid(coeffs, d) for d in self._grad_orders]

    def linear_third(self, u, ut, utt):
        p, lam = self.params, self.lam
        return -(p.a + p.b) * lam * utt - p.c**2 * lam * ut - p.a * p.b * lam**2 * ut - p.a * p.c**2 * lam**2 * u

    def fine_fields(self, u, ut, utt, time=None):
        """Fine-grid ``Lin``, ``R`` and the degeneracy factor for coefficient arrays."""
        p = self.params
        lin_c = self.linear_third(u, ut, utt)
        lin = self.grid(lin_c)
        ut_f = self.grid(ut)
        den = 1.0 + 2.0 * p.k * ut_f
        self._check_guard(den, time)
        q = 2.0 * p.k * self.grid(utt) ** 2
        if p.s:
            gu, gut, gutt = self.grad(u), self.grad(ut), self.grad(utt)
            q = q + 2.0 * sum(x * x + y * z for x, y, z in zip(gut, gu, gutt))
        rem = (-2.0 * p.k * ut_f * lin - q) / den
        return lin, rem, den

    def remainder(self, u, ut, utt, time=None):
        if self.params.k == 0 and self.params.s == 0:
            self.last_guard_min = 1.0
            return np.zeros(self.domain.shape)
        _, rem, _ = self.fine_fields(u, ut, utt, time)
        return self.fine.resize(self.fine.forward(rem), self.domain)

    def _check_guard(self, den, time):
        gmin = float(den.min())
        self.last_guard_min = gmin
        if not np.isfinite(gmin):
            raise NumericalError(f"non-finite values in the state at t={time}")
        if gmin < self.guard:
            idx = np.unravel_index(int(np.argmin(den)), den.shape)
            loc = tuple(float(self.fine.nodes(a)[i]) for a, i in enumerate(idx))
            raise GuardViolationError(
                f"1 + 2k u_t = {gmin:.4g} < guard {self.guard} at x={loc}, t={time}; data leave the small-data regime",
                time=time,
                location=loc,
                value=gmin,
            )


def rhs_expanded(state: FieldState, params: PdeParams, guard: float = 0.5, truncate: bool = True) -> GridFunction:
    """``u_ttt`` from ``(u, u_t, u_tt)``.

    With ``truncate=False`` the result lives on the refined grid and equals
    the pointwise expression at the refined nodes.
    """
    dom = state.u.domain
    nl = _Nonlinearity(dom, params, guard)
    u, ut, utt = state.u.coeffs, state.ut.coeffs, state.utt.coeffs
    lin_c = nl.linear_third(u, ut, utt)
    if params.k == 0 and params.s == 0:
        out = GridFunction(dom, lin_c)
        return out if truncate else out.resized(nl.fine)
    lin, rem, _ = nl.fine_fields(u, ut, utt, state.time)
    fine = GridFunction(nl.fine, nl.fine.forward(lin + rem))
    return fine.resized(dom) if truncate else fine


# ---------------------------------------------------------------------------
# time stepping


class _Stepper:
    def __init__(self, config: SimConfig):
        self.config = config
        dom, p = config.domain, config.params
        self.domain = dom
        self.nl = _Nonlinearity(dom, p, config.guard)
        lam = dom.eigenvalues.ravel()
        self.lam = lam
        self.M = np.stack([mode_matrix(lv, p).matrix for lv in lam])
        h = config.dt
        if config.integrator == "if-rk4":
            self.E = np.empty_like(self.M)
            self.E2 = np.empty_like(self.M)
            for i, lv in enumerate(lam):
                block = mode_matrix(lv, p)
                self.E[i], self.E2[i] = mode_propagator(block, [h, h / 2])
        self.b, self.c = p.b, p.c

    def _split(self, y):
        shape = self.domain.shape
        u = y[:, 0].reshape(shape)
        ut = y[:, 1].reshape(shape)
        utt = (y[:, 2] - self.b * self.lam * y[:, 1] - self.c**2 * self.lam * y[:, 0]).reshape(shape)
        return u, ut, utt

    def nonlinear(self, y, t):
        out = np.zeros_like(y)
        out[:, 2] = self.nl.remainder(*self._split(y), time=t).ravel()
        return out

    def full(self, y, t):
        return -np.einsum("mij,mj->mi", self.M, y) + self.nonlinear(y, t)

    def step(self, y, t):
        h = self.config.dt
        if self.config.integrator == "rk4":
            k1 = self.full(y, t)
            k2 = self.full(y + h / 2 * k1, t + h / 2)
            k3 = self.full(y + h / 2 * k2, t + h / 2)
            k4 = self.full(y + h * k3, t + h)
            return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        mv = lambda A, x: np.einsum("mij,mj->mi", A, x)
        E, E2 = self.E, self.E2
        k1 = h * self.nonlinear(y, t)
        k2 = h * self.nonlinear(mv(E2, y + k1 / 2), t + h / 2)
        k3 = h * self.nonlinear(mv(E2, y) + k2 / 2, t + h / 2)
        k4 = h * self.nonlinear(mv(E, y) + mv(E2, k3), t + h)
        return mv(E, y) + (mv(E, k1) + 2 * mv(E2, k2 + k3) + k4) / 6


def _require_homogeneous(data: ProblemData, times):
    if data.f is not None:
        raise ConfigError("the nonlinear problem takes no external forcing")
    for g in (data.g, data.h):
        arr = sample_boundary(g, data.domain, times[:3])
        if arr is not None and np.any(arr):
            raise ConfigError("the nonlinear solvers handle homogeneous boundary data only")


def _initial_state(data: ProblemData, params: PdeParams) -> np.ndarray:
    dom = data.domain
    c = [dom.forward(sample_space(x, dom)).ravel() for x in (data.u0, data.u1, data.u2)]
    lam = dom.eigenvalues.ravel()
    return np.stack([c[0], c[1], c[2] + params.b * lam * c[1] + params.c**2 * lam * c[0]], axis=-1)


def step(state: FieldState, dt: float, config: SimConfig) -> FieldState:
    """Advance one step with the configured integrator."""
    cfg = replace(config, dt=dt, T=dt)
    st = _Stepper(cfg)
    dom = state.u.domain
    lam = dom.eigenvalues.ravel()
    p = config.params
    y = np.stack(
        [
            state.u.coeffs.ravel(),
            state.ut.coeffs.ravel(),
            state.utt.coeffs.ravel() + p.b * lam * state.ut.coeffs.ravel() + p.c**2 * lam * state.u.coeffs.ravel(),
        ],
        axis=-1,
    )
    u, ut, utt = st._split(st.step(y, state.time))
    return FieldState(state.time + dt, GridFunction(dom, u), GridFunction(dom, ut), GridFunction(dom, utt))


def simulate(config: SimConfig, data: ProblemData, force: bool = False) -> FieldSeries:
    """Integrate the nonlinear problem on ``[0, T]`` with homogeneous boundary data.

    Every ``record_every``-th step is stored together with the minimum of
    ``1 + 2k u_t`` over the refined grid (``extra['guard_min']``).
    """
    if config.solver == "picard":
        return picard_solve(config, data, force=force)
    if data.domain != config.domain:
        raise ConfigError("data and configuration use different domains")
    times = config.times
    _require_homogeneous(data, times)
    if not force:
        rep = check_compatibility(data, times)
        if not rep.passed:
            raise ValidationError("data violate the compatibility conditions: " + rep.summary(), rep)
    st = _Stepper(config)
    y = _initial_state(data, config.params)
    rec = list(range(0, times.size, config.record_every))
    if rec[-1] != times.size - 1:
        rec.append(times.size - 1)
    rec_set = set(rec)
    out = np.empty((len(rec), y.shape[0], 3))
    gmin = np.empty(len(rec))
    j = 0
    for n in range(times.size):
        if n in rec_set:
            st.nonlinear(y, times[n])
            out[j] = y
            gmin[j] = st.nl.last_guard_min
            j += 1
        if n == times.size - 1:
            break
        y = st.step(y, times[n])
        if not np.all(np.isfinite(y)):
            raise NumericalError(f"non-finite state after step {n + 1} (t={times[n + 1]:.6g})")
    shape = (len(rec),) + config.domain.shape
    lam = st.lam
    u = out[..., 0]
    ut = out[..., 1]
    utt = out[..., 2] - config.params.b * lam * ut - config.params.c**2 * lam * u
    return FieldSeries(
        config.domain,
        times[rec],
        u.reshape(shape),
        ut.reshape(shape),
        utt.reshape(shape),
        {"guard_min": gmin},
    )


# ---------------------------------------------------------------------------
# fixed-point iteration


def second_time_derivative(samples: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order finite differences along axis 0 (one-sided near the ends)."""
    n = samples.shape[0]
    if n < 6:
        raise ConfigError("need at least six time samples for fourth-order differences")
    out = np.empty_like(samples)
    centred = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    out[2:-2] = sum(w * samples[i : n - 4 + i] for i, w in enumerate(centred))
    for row, offs in ((0, np.arange(6)), (1, np.arange(-1, 5))):
        w = _weights_at(offs, 2)
        out[row] = np.tensordot(w, samples[offs + row], axes=(0, 0))
        out[n - 1 - row] = np.tensordot(w, samples[n - 1 - row - offs], axes=(0, 0))
    return out / dt**2


def _weights_at(offsets, deriv):
    offsets = np.asarray(offsets, dtype=float)
    V = np.vander(offsets, offsets.size, increasing=True).T
    rhs = np.zeros(offsets.size)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(V, rhs)


def nonlinear_flux(domain: SpectralDomain, params: PdeParams, u, ut) -> np.ndarray:
    """``k u_t^2 + s |grad u|^2`` on the refined grid; leading axes are a batch."""
    fine = domain.refined(1.5)
    ut_f = domain.evaluate_grid(ut, target=fine)
    out = params.k * ut_f**2
    if params.s:
        for a in range(domain.ndim):
            d = tuple(int(a == b) for b in range(domain.ndim))
            out = out + domain.evaluate_grid(u, d, target=fine) ** 2
    return out


def picard_solve(config: SimConfig, data: ProblemData, force: bool = False) -> FieldSeries:
    """Fixed-point iteration ``u_b <- L^{-1}[N(u_s + u_b)_tt]`` around the linear flow ``u_s``.

    ``L^{-1}`` is the two-stage linear solver with homogeneous data. The
    iteration stops when successive corrections differ by less than
    ``picard_tol`` in the sup norm over the space-time grid and raises
    :class:`DivergenceError` when that difference grows three times in a row.
    """
    dom, p = config.domain, config.params
    times = config.times
    _require_homogeneous(data, times)
    star = solve_bc_linear(replace(data, f=None), times, p, force=force)
    fine = dom.refined(1.5)
    corr = None
    history = []
    growth = 0
    for it in range(1, config.picard_max_iter + 1):
        u = star.u + (0 if corr is None else corr.u)
        ut = star.ut + (0 if corr is None else corr.ut)
        with np.errstate(over="ignore", invalid="ignore"):
            ntt = second_time_derivative(nonlinear_flux(dom, p, u, ut), config.dt)
        if not np.all(np.isfinite(ntt)):
            raise DivergenceError("nonlinear forcing overflowed", it, history)
        forcing = dom.inverse(fine.resize(fine.forward(ntt), dom))
        new = solve_bc_linear(ProblemData(dom, f=forcing, p_exponent=data.p_exponent), times, p, force=True)
        prev = np.zeros_like(new.u) if corr is None else corr.u
        diff = float(np.max(np.abs(dom.inverse(new.u - prev))))
        corr = new
        log.debug("picard iteration %d: update %.3e", it, diff)
        if not math.isfinite(diff):
            raise DivergenceError("iterates became non-finite", it, history)
        if history and diff > history[-1]:
            growth += 1
            if growth >= 3:
                history.append(diff)
                raise DivergenceError(f"iterates grew over three consecutive iterations (update {diff:.3e})", it, history)
        else:
            growth = 0
        history.append(diff)
        if diff < config.picard_tol:
            break
    else:
        raise DivergenceError(f"no convergence within {config.picard_max_iter} iterations", it, history)
    rec = np.arange(0, times.size, config.record_every)
    if rec[-1] != times.size - 1:
        rec = np.append(rec, times.size - 1)
    series = FieldSeries(
        dom,
        times[rec],
        (star.u + corr.u)[rec],
        (star.ut + corr.ut)[rec],
        (star.utt + corr.utt)[rec],
        {"picard_updates": history},
    )
    ut_f = dom.evaluate_grid(series.ut, target=fine)
    series.extra["guard_min"] = (1 + 2 * p.k * ut_f).reshape(len(rec), -1).min(axis=1)
    return series
