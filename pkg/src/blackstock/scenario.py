"""Scenario files: strict YAML schema, bundled presets, initial-data presets."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .blockop import PdeParams
from .domain import DIRICHLET, GridFunction, SpectralDomain, normalize_bc
from .errors import ConfigError
from .linear import ProblemData

PRESETS = ("dirichlet-baseline", "neumann-meanzero", "big-b-accumulation", "nonlinear-small", "incompatible-data")
DATA_PRESETS = ("first-mode", "random-smooth", "offset", "zero")
SOLVER_KINDS = ("linear", "nonlinear", "picard")

_SCHEMA = {
    "name": str,
    "seed": int,
    "output": str,
    "params": {"a": float, "b": float, "c": float, "k": float, "s": int, "B_over_A": float},
    "domain": {"kind": str, "lengths": list, "n_modes": list, "bc": str},
    "data": {"preset": str, "amplitude": float, "n_terms": int, "files": dict, "p_exponent": float},
    "solver": {
        "kind": str,
        "T": float,
        "dt": float,
        "guard": float,
        "integrator": str,
        "picard_max_iter": int,
        "picard_tol": float,
        "record_every": int,
    },
    "decay": {"channel": str, "window": list, "tolerance": float},
    "extend": {"order": int},
    "sweep": {"a": list, "b": list, "c": list},
}

_DEFAULTS = {
    "name": "default",
    "seed": 0,
    "output": "out",
    "params": {"a": 1.0, "b": 1.0, "c": 1.0, "k": None, "s": 1, "B_over_A": None},
    "domain": {"kind": "interval", "lengths": [math.pi], "n_modes": [64], "bc": DIRICHLET},
    "data": {"preset": "first-mode", "amplitude": 1.0, "n_terms": 4, "files": None, "p_exponent": 2.0},
    "solver": {
        "kind": "linear",
        "T": 30.0,
        "dt": 1e-3,
        "guard": 0.5,
        "integrator": "if-rk4",
        "picard_max_iter": 50,
        "picard_tol": 1e-12,
        "record_every": 10,
    },
    "decay": {"channel": "L2_norm_u", "window": [5.0, 30.0], "tolerance": 0.01},
    "extend": {"order": 3},
    "sweep": {"a": [1.0], "b": [1.0], "c": [1.0]},
}


def _line_map(node, path=(), out=None):
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    return out


def _coerce(value, kind, where):
    if value is None:
        return None
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if kind is list:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [value]
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}")
    return value


def _validate(raw, schema, lines, path=()):
    if not isinstance(raw, dict):
        where = "/".join(path) or "<root>"
        raise ConfigError(f"line {lines.get(path, '?')}: {where} must be a mapping")
    out = {}
    for key, value in raw.items():
        p = path + (str(key),)
        where = f"line {lines.get(p, '?')}: field '{'.'.join(p)}'"
        if key not in schema:
            raise ConfigError(f"{where} is not recognised; allowed: {sorted(schema)}")
        kind = schema[key]
        out[key] = _validate(value, kind, lines, p) if isinstance(kind, dict) else _coerce(value, kind, where)
    return out


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class Scenario:
    name: str
    params: PdeParams
    domain: SpectralDomain
    data: dict
    solver: dict
    decay: dict
    extend: dict
    sweep: dict
    output: str = "out"
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, raw: dict, lines=None) -> "Scenario":
        checked = _validate(raw, _SCHEMA, lines or {})
        cfg = _merge(_DEFAULTS, checked)
        p = cfg["params"]
        params = PdeParams(p["a"], p["b"], p["c"], k=p["k"], s=p["s"], B_over_A=p["B_over_A"])
        d = cfg["domain"]
        bc = normalize_bc(d["bc"])
        lengths = [float(x) for x in d["lengths"]]
        modes = [int(x) for x in d["n_modes"]]
        if d["kind"] == "interval":
            if len(lengths) != 1 or len(modes) != 1:
                raise ConfigError("domain: an interval takes one length and one mode count")
            domain = SpectralDomain.interval(lengths[0], bc, modes[0])
        elif d["kind"] == "rectangle":
            if len(lengths) != 2 or len(modes) not in (1, 2):
                raise ConfigError("domain: a rectangle takes two lengths and one or two mode counts")
            domain = SpectralDomain.rectangle(lengths[0], lengths[1], bc, tuple(modes * (3 - len(modes))))
        else:
            raise ConfigError(f"domain.kind must be 'interval' or 'rectangle', got {d['kind']!r}")
        if cfg["data"]["preset"] not in DATA_PRESETS and not cfg["data"]["files"]:
            raise ConfigError(f"data.preset must be one of {DATA_PRESETS}, got {cfg['data']['preset']!r}")
        if cfg["solver"]["kind"] not in SOLVER_KINDS:
            raise ConfigError(f"solver.kind must be one of {SOLVER_KINDS}, got {cfg['solver']['kind']!r}")
        if len(cfg["decay"]["window"]) != 2:
            raise ConfigError("decay.window takes two times")
        if cfg["seed"] < 0 or cfg["seed"] >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return cls(
            cfg["name"],
            params,
            domain,
            cfg["data"],
            cfg["solver"],
            cfg["decay"],
            cfg["extend"],
            cfg["sweep"],
            cfg["output"],
            cfg["seed"],
            cfg,
        )

    @classmethod
    def from_yaml(cls, text: str, base_dir: Path | None = None) -> "Scenario":
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"scenario is not valid YAML: {exc}") from exc
        lines = _line_map(node) if node is not None else {}
        sc = cls.from_dict(raw or {}, lines)
        if base_dir is not None and sc.data.get("files"):
            sc.data["files"] = {k: str((base_dir / v).resolve()) for k, v in sc.data["files"].items()}
            sc.raw["data"]["files"] = dict(sc.data["files"])
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_yaml(text, path.parent)

    @classmethod
    def preset(cls, name: str) -> "Scenario":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
        text = resources.files("blackstock").joinpath("presets", f"{name}.yaml").read_text()
        return cls.from_yaml(text)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        body = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(body.encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "Scenario":
        raw = self.to_dict()
        raw["seed"] = int(seed)
        return Scenario.from_dict(_strip_none(raw))

    def with_params(self, **kw) -> "Scenario":
        raw = self.to_dict()
        raw["params"].update(kw)
        return Scenario.from_dict(_strip_none(raw))

    def problem_data(self) -> ProblemData:
        d = self.data
        p = d["p_exponent"]
        if d.get("files"):
            fields = {}
            for key, path in d["files"].items():
                if key not in ("u0", "u1", "u2"):
                    raise ConfigError(f"data.files: unsupported datum {key!r}; use u0, u1, u2")
                arr = np.load(path) if str(path).endswith(".npy") else np.loadtxt(path, delimiter=",", ndmin=1)
                fields[key] = np.asarray(arr, dtype=float).reshape(self.domain.shape)
            return ProblemData(self.domain, p_exponent=p, **fields)
        u0 = initial_field(self.domain, d["preset"], d["amplitude"], self.seed, d["n_terms"])
        return ProblemData(self.domain, u0=u0, p_exponent=p)


def _strip_none(d):
    if isinstance(d, dict):
        return {k: _strip_none(v) for k, v in d.items() if v is not None}
    return d


def initial_field(domain: SpectralDomain, preset: str, amplitude: float = 1.0, seed: int = 0, n_terms: int = 4):
    """Initial displacement for a data preset.

    ``first-mode`` is the lowest admissible eigenfunction, ``random-smooth``
    a seeded combination of the first ``n_terms`` admissible modes per axis
    with coefficients decaying like ``m^-3``, ``offset`` adds a constant
    (violating Dirichlet traces and the Neumann mean constraint).
    """
    if preset == "zero":
        return GridFunction.zeros(domain)
    if preset == "first-mode":
        return GridFunction.mode(domain, _lowest(domain), amplitude)
    if preset == "random-smooth":
        rng = np.random.default_rng(seed)
        coeffs = np.zeros(domain.shape)
        idx = np.ix_(*[np.arange(min(n_terms, n)) for n in domain.shape])
        m = np.meshgrid(*[domain.mode_numbers(a)[: min(n_terms, domain.shape[a])] for a in range(domain.ndim)], indexing="ij")
        scale = np.prod([np.maximum(mm, 1.0) for mm in m], axis=0) ** -3.0
        coeffs[idx] = amplitude * rng.standard_normal(scale.shape) * scale
        if domain.is_neumann:
            coeffs.flat[0] = 0.0
        return GridFunction(domain, coeffs)
    if preset == "offset":
        idx = _lowest(domain)
        trig = np.sin if domain.is_dirichlet else np.cos

        def shifted(*x):
            out = np.ones(np.broadcast(*x).shape)
            for xa, m, length in zip(x, idx, domain.lengths):
                out = out * trig(m * np.pi * np.asarray(xa) / length)
            return amplitude * (1.0 + out)

        return shifted
    raise ConfigError(f"unknown data preset {preset!r}; choose from {DATA_PRESETS}")


def _lowest(domain: SpectralDomain) -> tuple:
    lam = np.where(domain.admissible_mask, domain.eigenvalues, np.inf)
    idx = np.unravel_index(int(np.argmin(lam)), domain.shape)
    return tuple(int(domain.mode_numbers(a)[j]) for a, j in enumerate(idx))
