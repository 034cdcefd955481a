"""Command-line entry point.

Every subcommand reads one scenario (a YAML file or a bundled preset),
writes CSV/JSON results and PNG figures into ``--out`` and prints the
written paths. Exit codes: 0 success, 1 configuration error, 2 validation
or acceptance failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .blockop import mode_eigenvalues, mode_matrix, omega0, spectral_abscissa, zero_mode_block
from .compat import CompatReport, dirichlet_compat, heat_higher_compat, neumann_compat, neumann_mean_compat
from .decay import NormSeries, compare_omega0, fit_decay
from .domain import GridFunction
from .errors import BlackstockError, ConfigError
from .extension import extend, moment_residual
from .linear import solve_bc_linear, uniform_times
from .nonlinear import SimConfig, picard_solve, simulate
from .plotting import decay_figure, norms_figure, spectrum_figure, sweep_figure
from .scenario import PRESETS, Scenario, initial_field

log = logging.getLogger("blackstock")

TRAJECTORY_COLUMNS = (
    "time",
    "L2_norm_u",
    "L2_norm_ut",
    "L2_norm_utt",
    "H2_norm_u",
    "H4_norm_u",
    "state_norm",
    "mean_u",
)


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _meta(scenario: Scenario) -> dict:
    return {
        "version": __version__,
        "scenario": scenario.name,
        "scenario_hash": scenario.digest(),
        "seed": scenario.seed,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _atomic_write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: Path, meta: dict, columns, rows) -> Path:
    buf = io.StringIO()
    for key in ("version", "scenario", "scenario_hash", "seed", "created"):
        buf.write(f"# {key}: {meta[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return _atomic_write(path, buf.getvalue())


def write_json(path: Path, meta: dict, payload: dict) -> Path:
    body = {"meta": meta, **payload}
    return _atomic_write(path, json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def read_csv(path) -> tuple:
    """Columns of a CSV written by :func:`write_csv`; metadata lines are skipped."""
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(lines)
    header = next(reader)
    data = np.array([[float(v) for v in row] for row in reader if row])
    return {h: data[:, i] for i, h in enumerate(header)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(sc: Scenario, args) -> int:
    dom, p = sc.domain, sc.params
    lam = dom.eigenvalues.ravel()
    numbers = np.stack(np.meshgrid(*[dom.mode_numbers(a) for a in range(dom.ndim)], indexing="ij"), -1)
    numbers = numbers.reshape(-1, dom.ndim)
    rows, eigs = [], []
    for idx, lv in zip(numbers, lam):
        ev = mode_eigenvalues(mode_matrix(lv, p), p)
        eigs.append(-ev)
        rows.append([":".join(str(int(i)) for i in idx), lv, ev[1].real, ev[1].imag, ev[2].real, ev[2].imag, ev[0].real])
    out = Path(args.out)
    meta = _meta(sc)
    csv_path = write_csv(out / "spectrum.csv", meta, ("mode_index", "lambda", "re_mu1", "im_mu1", "re_mu2", "im_mu2", "mu3"), rows)
    dc = omega0(p, dom)
    sa = spectral_abscissa(p, dom, mean_zero=dom.is_neumann)
    report = {
        "omega0": dc.omega0,
        "omega0_attained_by": str(dc.attaining),
        "candidates": dc.candidates,
        "lambda_star": dc.lam_star,
        "spectral_abscissa_retained": sa.numeric,
        "spectral_abscissa_analytic": sa.analytic,
        "slowest_retained_mode": list(sa.slowest_mode),
        "zero_mode_nilpotent": zero_mode_block(p, dom) is not None,
    }
    json_path = write_json(out / "spectrum.json", meta, report)
    adm = dom.admissible_mask.ravel()
    fig = spectrum_figure(np.array(eigs)[adm], dc.omega0, out / "spectrum.png", p.accumulation_rate)
    print(f"omega0 = {dc.omega0:.17g} ({dc.attaining})")
    for pth in (csv_path, json_path, fig):
        print(pth)
    return 0


def _run_trajectory(sc: Scenario, mode: str, force: bool):
    s = sc.solver
    data = sc.problem_data()
    if mode == "linear":
        times = uniform_times(s["T"], s["dt"])
        series = solve_bc_linear(data, times, sc.params, force=force)
        keep = np.arange(0, times.size, s["record_every"])
        if keep[-1] != times.size - 1:
            keep = np.append(keep, times.size - 1)
        series.times, series.u, series.ut, series.utt = times[keep], series.u[keep], series.ut[keep], series.utt[keep]
        series.extra = {}
        return series
    cfg = SimConfig(
        sc.params,
        sc.domain,
        T=s["T"],
        dt=s["dt"],
        guard=s["guard"],
        solver="picard" if mode == "picard" else "direct-quasilinear",
        integrator=s["integrator"],
        picard_max_iter=s["picard_max_iter"],
        picard_tol=s["picard_tol"],
        record_every=s["record_every"],
    )
    if mode == "picard":
        return picard_solve(cfg, data, force=force)
    return simulate(cfg, data, force=force)


def cmd_simulate(sc: Scenario, args) -> int:
    mode = args.mode or sc.solver["kind"]
    series = _run_trajectory(sc, mode, args.force)
    norms = NormSeries.from_fields(series, sc.data["p_exponent"])
    cols = list(TRAJECTORY_COLUMNS) + (["guard_min"] if "guard_min" in norms.channels else [])
    table = [norms.times] + [norms[c] for c in cols[1:]]
    out = Path(args.out)
    meta = _meta(sc)
    path = write_csv(out / "trajectory.csv", meta, cols, zip(*table))
    fig = norms_figure(norms, out / "trajectory.png")
    print(f"{mode} trajectory: {len(norms.times)} samples on [0, {norms.times[-1]:.6g}]")
    print(path)
    print(fig)
    return 0


def cmd_compat(sc: Scenario, args) -> int:
    data = sc.problem_data()
    times = uniform_times(max(10 * sc.solver["dt"], 1e-2), sc.solver["dt"])
    problem = args.problem or sc.domain.bc
    if problem == "dirichlet":
        rep = dirichlet_compat(data, times)
    elif problem == "neumann":
        rep = neumann_compat(data, times)
        mean = neumann_mean_compat(data.f, data.g, data.u0, sc.domain, times)
        rep.entries.extend(mean.entries)
    elif problem == "heat":
        rep = heat_higher_compat(data.f, data.g, data.u0, 0.0, 0, 1, data.p_exponent, sc.domain, times)
    else:
        raise ConfigError(f"unknown problem {problem!r}")
    if problem in ("dirichlet", "neumann") and problem != sc.domain.bc:
        raise ConfigError(f"problem {problem} does not match the scenario's {sc.domain.bc} domain")
    path = write_json(Path(args.out) / "compat.json", _meta(sc), rep.to_dict())
    print(rep.summary())
    print(path)
    return 0 if rep.passed else 2


def _adaptive_window(t, y, window):
    lo, hi = window
    ok = np.where(y > 1e-10 * np.max(np.abs(y)))[0]
    if ok.size:
        hi = min(hi, float(t[ok[-1]]))
    return lo, hi


def cmd_decay(sc: Scenario, args) -> int:
    out = Path(args.out)
    src = Path(args.input) if args.input else out / "trajectory.csv"
    cols = read_csv(src)
    channel = args.channel or sc.decay["channel"]
    if channel not in cols:
        raise ConfigError(f"channel {channel!r} not in {src}; available: {sorted(cols)}")
    t, y = cols["time"], np.abs(cols[channel])
    window = tuple(args.window) if args.window else tuple(sc.decay["window"])
    fit = fit_decay(t, y, window=window)
    cmp_ = compare_omega0(fit.rate, sc.params, sc.domain, tol=sc.decay["tolerance"])
    meta = _meta(sc)
    payload = {"channel": channel, "input": str(src), "fit": fit.to_dict(), "comparison": cmp_.to_dict()}
    json_path = write_json(out / "decay.json", meta, payload)
    pos = y > 0
    rows = zip(t[pos], np.log(y[pos]), fit.line(t[pos]))
    csv_path = write_csv(out / "decay_fit.csv", meta, ("t", "log_norm", "fitted"), rows)
    fig = decay_figure(t, y, fit, out / "decay.png", channel, cmp_.omega0)
    print(f"rate {fit.rate:.17g} (r2 {fit.r2:.6f}); omega0 {cmp_.omega0:.6g}; slowest mode {cmp_.mode_rate:.6g}: {cmp_.verdict}")
    for pth in (json_path, csv_path, fig):
        print(pth)
    return 0 if cmp_.passed else 2


def cmd_extend(sc: Scenario, args) -> int:
    l = args.order if args.order is not None else sc.extend["order"]
    dom = sc.domain
    fields = [initial_field(dom, "random-smooth", 1.0, sc.seed + j, 4) for j in range(l + 1)]
    S = extend(fields)
    coeffs = S.vc
    checks = []
    for m in range(l + 1):
        ref = fields[m].coeffs
        scale = max(np.max(np.abs(ref)), 1e-300)
        exact = S.derivative_at_zero(m).coeffs
        rounded = S.weight_derivative_at_zero(m).coeffs
        checks.append(
            {
                "m": m,
                "moment_rel_error": float(np.max(np.abs(exact - ref)) / scale),
                "float_weights_rel_error": float(np.max(np.abs(rounded - ref)) / scale),
            }
        )
    ts = np.linspace(0.0, 2.0, 41)
    norms = [GridFunction(dom, c).l2_norm() for c in S.coeffs(ts)]
    payload = {
        "order": l,
        "coefficients": [[str(v) for v in row] for row in coeffs.matrix],
        "exact_rational": coeffs.exact,
        "moment_residual": moment_residual(coeffs),
        "derivative_checks": checks,
        "times": ts,
        "L2_norm_S": norms,
    }
    path = write_json(Path(args.out) / "extend.json", _meta(sc), payload)
    worst = max(c["moment_rel_error"] for c in checks)
    lossy = max(c["float_weights_rel_error"] for c in checks)
    print(f"order {l}: derivative relative error {worst:.1e}; through rounded exponential weights {lossy:.1e}")
    print(path)
    return 0


def _sweep_one(job):
    """Linear run for one triple; the horizon stretches to ``20 / omega0`` and the fit uses its second half."""
    raw, a, b, c = job
    raw = {**raw, "params": {**raw.get("params", {}), "a": a, "b": b, "c": c}}
    probe = Scenario.from_dict(raw)
    horizon = max(probe.solver["T"], 20.0 / omega0(probe.params, probe.domain).omega0)
    dt = max(probe.solver["dt"], horizon / 6000)
    raw["solver"] = {**raw.get("solver", {}), "T": horizon, "dt": dt, "record_every": 1}
    sc = Scenario.from_dict(raw)
    series = _run_trajectory(sc, "linear", force=False)
    norms = NormSeries.from_fields(series)
    y = norms[sc.decay["channel"]]
    window = _adaptive_window(norms.times, y, (horizon / 2, horizon))
    fit = fit_decay(norms.times, y, window=window)
    cmp_ = compare_omega0(fit.rate, sc.params, sc.domain, tol=sc.decay["tolerance"])
    return {
        "a": a,
        "b": b,
        "c": c,
        "omega0": cmp_.omega0,
        "slowest_mode_rate": cmp_.mode_rate,
        "measured_rate": fit.rate,
        "r2": fit.r2,
        "verdict": cmp_.verdict,
    }


def cmd_sweep(sc: Scenario, args) -> int:
    from .scenario import _strip_none

    raw = _strip_none(sc.to_dict())
    raw.pop("sweep", None)
    jobs = [(raw, float(a), float(b), float(c)) for a in sc.sweep["a"] for b in sc.sweep["b"] for c in sc.sweep["c"]]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    cols = ("a", "b", "c", "omega0", "slowest_mode_rate", "measured_rate", "r2", "verdict")
    out = Path(args.out)
    path = write_csv(out / "sweep.csv", _meta(sc), cols, ([r[k] for k in cols] for r in rows))
    fig = sweep_figure(rows, out / "sweep.png")
    n_pass = sum(r["verdict"] == "PASS" for r in rows)
    print(f"{n_pass}/{len(rows)} parameter triples PASS")
    print(path)
    print(fig)
    return 0 if n_pass == len(rows) else 2


COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "compat-check": cmd_compat,
    "decay": cmd_decay,
    "extend": cmd_extend,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="scenario YAML file")
    src.add_argument("--preset", choices=PRESETS, help="bundled scenario")
    common.add_argument("--out", default=None, help="output directory (default: scenario 'output')")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    common.add_argument("--force", action="store_true", help="skip the compatibility gate")

    ap = argparse.ArgumentParser(prog="blackstock", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"blackstock {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="per-mode eigenvalues and omega0")
    p = sub.add_parser("simulate", parents=[common], help="trajectory norms")
    m = p.add_mutually_exclusive_group()
    m.add_argument("--linear", dest="mode", action="store_const", const="linear")
    m.add_argument("--nonlinear", dest="mode", action="store_const", const="nonlinear")
    m.add_argument("--picard", dest="mode", action="store_const", const="picard")
    p = sub.add_parser("compat-check", parents=[common], help="compatibility report")
    p.add_argument("--problem", choices=("dirichlet", "neumann", "heat"))
    p = sub.add_parser("decay", parents=[common], help="fit a decay rate from a trajectory CSV")
    p.add_argument("--input", help="trajectory CSV (default: <out>/trajectory.csv)")
    p.add_argument("--channel")
    p.add_argument("--window", nargs=2, type=float, metavar=("T0", "T1"))
    p = sub.add_parser("extend", parents=[common], help="prescribed initial derivatives demo")
    p.add_argument("--order", type=int)
    sub.add_parser("sweep", parents=[common], help="omega0 against measured rates over a parameter grid")
    return ap


def _setup_logging():
    level = os.environ.get("BLACKSTOCK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def load_scenario(args) -> Scenario:
    if args.scenario:
        sc = Scenario.load(args.scenario)
    else:
        sc = Scenario.preset(args.preset or "dirichlet-baseline")
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        sc = sc.with_seed(args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be positive")
    return sc


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        sc = load_scenario(args)
        if args.out is None:
            args.out = sc.output
        if not hasattr(args, "mode"):
            args.mode = None
        return COMMANDS[args.command](sc, args)
    except BlackstockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        if isinstance(report, CompatReport):
            print(report.summary(), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
