"""Norm time series, exponential-rate fits, and comparison with the analytic rate."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .blockop import PdeParams, mode_decay_rate, omega0
from .domain import GridFunction, SpectralDomain
from .errors import ChannelUnderflowError, ConfigError

UNDERFLOW = 1e-14
MIN_SAMPLES = 20
R2_WARN = 0.999

CHANNELS = ("L2_norm_u", "L2_norm_ut", "L2_norm_utt", "H2_norm_u", "H4_norm_u", "state_norm", "mean_u")


def sobolev_norm(f: GridFunction, order: float) -> float:
    """Spectral ``H^s`` norm ``(sum (1 + lam_m)^s |c_m|^2 ||phi_m||^2)^{1/2}``."""
    return float(sobolev_norms(f.domain, f.coeffs, order))


def sobolev_norms(domain: SpectralDomain, coeffs, order: float) -> np.ndarray:
    if order < 0:
        raise ConfigError(f"Sobolev order must be non-negative, got {order}")
    c = np.asarray(coeffs, dtype=float)
    w = (1.0 + domain.eigenvalues) ** order * domain.basis_norms_sq
    axes = tuple(range(c.ndim - domain.ndim, c.ndim))
    return np.sqrt(np.sum(c * c * w, axis=axes))


@dataclass
class NormSeries:
    times: np.ndarray
    channels: dict

    def __getitem__(self, name):
        return self.channels[name]

    @classmethod
    def from_fields(cls, series, p_exponent: float = 2.0) -> "NormSeries":
        """Channels of a FieldSeries.

        ``state_norm`` is ``||u||_{H^4} + ||u_t||_{H^{4-2/p}} + ||u_tt||_{H^{2-2/p}}``.
        """
        dom = series.domain
        ch = {
            "L2_norm_u": sobolev_norms(dom, series.u, 0),
            "H2_norm_u": sobolev_norms(dom, series.u, 2),
            "H4_norm_u": sobolev_norms(dom, series.u, 4),
            "mean_u": dom.mean(series.u),
        }
        if series.ut is not None:
            ch["L2_norm_ut"] = sobolev_norms(dom, series.ut, 0)
        if series.utt is not None:
            ch["L2_norm_utt"] = sobolev_norms(dom, series.utt, 0)
        if series.ut is not None and series.utt is not None:
            ch["state_norm"] = (
                ch["H4_norm_u"]
                + sobolev_norms(dom, series.ut, 4 - 2 / p_exponent)
                + sobolev_norms(dom, series.utt, 2 - 2 / p_exponent)
            )
        for key in ("guard_min",):
            if key in series.extra:
                ch[key] = np.asarray(series.extra[key])
        return cls(np.asarray(series.times), ch)


@dataclass
class DecayFit:
    rate: float
    intercept: float
    r2: float
    method: str
    window: tuple
    n_points: int
    warning: str | None = None

    def line(self, times) -> np.ndarray:
        return math.log(self.intercept) - self.rate * np.asarray(times)

    def to_dict(self):
        return {
            "rate": self.rate,
            "intercept": self.intercept,
            "r2": self.r2,
            "method": self.method,
            "window": list(self.window),
            "n_points": self.n_points,
            "warning": self.warning,
        }


def _linfit(t, y):
    A = np.vstack([t, np.ones_like(t)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * t + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


def _peaks(t, ly):
    """Local maxima of ``ly`` refined by a parabola through three samples."""
    idx = np.where((ly[1:-1] > ly[:-2]) & (ly[1:-1] >= ly[2:]))[0] + 1
    tp, yp = [], []
    h = t[1] - t[0]
    for i in idx:
        y0, y1, y2 = ly[i - 1], ly[i], ly[i + 1]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den < 0 else 0.0
        tp.append(t[i] + off * h)
        yp.append(y1 - 0.25 * (y0 - y2) * off)
    return np.array(tp), np.array(yp)


def fit_decay(times, values, window=None, method: str = "auto") -> DecayFit:
    """Fit ``values ~ C exp(-rate t)`` by least squares on ``log values``.

    ``window`` defaults to the last 80% of the horizon. ``method`` is
    ``"direct"`` (all samples), ``"envelope"`` (upper envelope through the
    maxima of the detrended log, for oscillating norms) or ``"auto"``, which
    switches to the envelope when the window is not monotone or the direct
    fit has ``r^2`` below 0.999, provided at least three maxima exist.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise ConfigError("times and values differ in shape")
    if window is None:
        window = (t[0] + 0.2 * (t[-1] - t[0]), t[-1])
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < MIN_SAMPLES:
        raise ConfigError(f"window {window} holds {int(sel.sum())} samples; need at least {MIN_SAMPLES}")
    tw, yw = t[sel], y[sel]
    if np.any(~np.isfinite(yw)):
        raise ChannelUnderflowError("channel contains non-finite values")
    if np.any(yw <= UNDERFLOW):
        ok = np.where(yw > UNDERFLOW)[0]
        last = float(tw[ok[-1]]) if ok.size and ok[0] == 0 else None
        suggestion = (float(lo), last) if last is not None and last > lo else None
        raise ChannelUnderflowError(
            f"channel drops below {UNDERFLOW:g} inside window {window}; shrink the window", suggestion
        )
    if method not in ("auto", "direct", "envelope"):
        raise ConfigError(f"unknown fit method {method!r}")
    ly = np.log(yw)
    slope, icpt, r2 = _linfit(tw, ly)
    n = int(tw.size)
    used = "direct"
    d = np.diff(yw)
    monotone = np.all(d <= 0) or np.all(d >= 0)
    if method == "envelope" or (method == "auto" and (not monotone or r2 < R2_WARN)):
        trend = slope * tw + icpt
        tp, rp = _peaks(tw, ly - trend)
        if tp.size >= 3:
            slope, icpt, r2 = _linfit(tp, rp + slope * tp + icpt)
            used, n = "envelope", int(tp.size)
        elif method == "envelope":
            raise ConfigError("fewer than three local maxima in the window")
    warn = None
    if r2 < R2_WARN:
        warn = f"r^2 = {r2:.6f} below {R2_WARN}; decay is not cleanly exponential in this window"
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
    return DecayFit(-slope, math.exp(icpt), r2, used, (float(lo), float(hi)), n, warn)


@dataclass
class RateComparison:
    measured: float
    omega0: float
    mode_rate: float
    attaining: object
    tolerance: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_dict(self):
        return {
            "measured_rate": self.measured,
            "omega0": self.omega0,
            "slowest_mode_rate": self.mode_rate,
            "omega0_attained_by": str(self.attaining),
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            **self.details,
        }


def slowest_mode_rate(params: PdeParams, domain: SpectralDomain) -> float:
    """Decay rate of the eigenmode with the smallest admissible eigenvalue."""
    return mode_decay_rate(domain.smallest_admissible_eigenvalue(), params)


def compare_omega0(
    measured: float, params: PdeParams, domain: SpectralDomain, mode_rate: float | None = None, tol: float = 0.01
) -> RateComparison:
    """PASS when the measured rate is at least ``0.99 min(omega0, mode rate)`` and
    within relative ``tol`` of the analytic rate of the slowest excited mode.

    ``mode_rate`` defaults to the rate of the lowest admissible mode.
    """
    dc = omega0(params, domain)
    if mode_rate is None:
        mode_rate = slowest_mode_rate(params, domain)
    floor = 0.99 * min(dc.omega0, mode_rate)
    rel = abs(measured - mode_rate) / mode_rate
    ok = measured >= floor and rel <= tol
    return RateComparison(
        float(measured),
        dc.omega0,
        float(mode_rate),
        dc.attaining,
        tol,
        "PASS" if ok else "FAIL",
        {"lower_bound": floor, "relative_error_vs_mode": rel},
    )
