"""Figures written next to the CSV and JSON outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    fig.savefig(path, metadata={"Software": None, "Creation Time": None} if str(path).endswith(".png") else None)
    plt.close(fig)
    return path


def decay_figure(times, values, fit, path, channel="L2_norm_u", omega0=None):
    """Log-norm against time with the fitted line and, optionally, the slope ``-omega0``."""
    t = np.asarray(times)
    y = np.asarray(values)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        pos = y > 0
        ax.plot(t[pos], np.log(y[pos]), color="0.2", label=f"log {channel}")
        lo, hi = fit.window
        tw = t[(t >= lo) & (t <= hi)]
        ax.plot(tw, fit.line(tw), "--", color="tab:red", label=f"fit, rate {fit.rate:.5g}")
        if omega0 is not None:
            ax.plot(tw, np.log(fit.intercept) - omega0 * tw, ":", color="tab:blue", label=f"slope -omega0 = {-omega0:.5g}")
        ax.axvspan(lo, hi, color="0.9", zorder=0)
        ax.set_xlabel("t")
        ax.set_ylabel("log norm")
        ax.legend(loc="upper right")
        return _save(fig, path)


def spectrum_figure(eigs, omega0, path, accumulation=None):
    """Eigenvalues of ``-A`` in the complex plane with the bound ``Re = -omega0``."""
    z = np.asarray(eigs).ravel()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(z.real, z.imag, s=6, color="0.2", label="eigenvalues")
        ax.axvline(-omega0, color="tab:red", ls="--", label=f"Re = -omega0 = {-omega0:.5g}")
        if accumulation is not None:
            ax.axvline(-accumulation, color="tab:blue", ls=":", label=f"-c^2/b = {-accumulation:.5g}")
        ax.set_xscale("symlog", linthresh=max(omega0, 1e-3))
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        ax.legend(loc="lower left")
        return _save(fig, path)


def sweep_figure(rows, path):
    """Measured rate against the analytic ``omega0`` for each parameter triple."""
    om = np.array([r["omega0"] for r in rows])
    meas = np.array([r["measured_rate"] for r in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(om, meas, s=12, color="0.2")
        lim = [0, max(om.max(), meas.max()) * 1.1]
        ax.plot(lim, lim, "--", color="tab:red", label="measured = omega0")
        ax.set_xlabel("omega0")
        ax.set_ylabel("measured rate")
        ax.legend(loc="upper left")
        return _save(fig, path)


def norms_figure(norms, path):
    """Semilog plot of every positive norm channel."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name in ("L2_norm_u", "L2_norm_ut", "L2_norm_utt", "H2_norm_u"):
            if name in norms.channels:
                y = np.asarray(norms[name])
                pos = y > 0
                if pos.any():
                    ax.semilogy(norms.times[pos], y[pos], label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("norm")
        ax.legend(loc="upper right")
        return _save(fig, path)
