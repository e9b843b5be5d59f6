"""
JSON run configuration.

Layout::

    {
      "bath":   {"nm": {"n": 1, "m_re": 0.5, "m_im": 0.5}},   # or "bv" / "hkkr"
      "lambda": null,
      "system": {"d": 2, "H": {"name": "sz", "scale": 0.5}, "L": "sm"},
      "run":    {"T": 1.0, "dt": 0.001, "trajectories": 10000, "seed": 0,
                 "observables": ["sz"], "stride": 250, "scheme": "euler",
                 "filter": "kushner", "rho0": "excited", "workers": 1},
      "output": {"directory": "out", "max_trajectory_files": 10}
    }

``bath`` holds exactly one of ``nm`` (BV representation of ``(n, m)``),
``bv`` (``r``, ``rho``, ``theta``) or ``hkkr`` (``n``, ``m_re``, ``m_im``).
Matrices are a qubit name (``sx sy sz sm sp id``), ``{"name", "scale"}``, or
nested rows of ``[re, im]`` pairs.  :func:`dump_config` always writes
matrices as explicit rows, so dump and parse round-trip exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ValidationError
from .gaussian import SqueezingParams
from .system import NAMED_QUBIT_OPERATORS, SystemModel

Matrix = tuple  # tuple of rows of complex

BATH_KINDS = ("nm", "bv", "hkkr")
STATE_NAMES = ("excited", "ground", "mixed", "plus")


@dataclass(frozen=True)
class BathSpec:
    kind: str
    values: tuple  # (n, m_re, m_im) or (r, rho, theta)

    def params(self) -> SqueezingParams:
        if self.kind == "bv":
            from .bogoliubov import balanced_from_bv

            return balanced_from_bv(*self.values).marginal()
        n, re, im = self.values
        return SqueezingParams(n, complex(re, im))

    def representation(self):
        from .bogoliubov import balanced_from_bv, balanced_from_hkkr, balanced_from_nm

        if self.kind == "bv":
            return balanced_from_bv(*self.values)
        if self.kind == "hkkr":
            n, re, im = self.values
            return balanced_from_hkkr(n, complex(re, im))
        return balanced_from_nm(self.params())


@dataclass(frozen=True)
class RunSettings:
    T: float = 1.0
    dt: float = 1e-3
    trajectories: int = 10000
    seed: int = 0
    observables: tuple = (("sz", None),)  # (name, matrix or None for a named operator)
    stride: int = 250
    scheme: str = "euler"
    filter: str = "kushner"
    rho0: object = "excited"  # state name or matrix
    workers: int = 1


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "out"
    max_trajectory_files: int = 10


@dataclass(frozen=True)
class RunConfig:
    bath: BathSpec
    H: Matrix
    L: Matrix
    lam: float | None = None
    run: RunSettings = field(default_factory=RunSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    @property
    def d(self) -> int:
        return len(self.H)

    def model(self) -> SystemModel:
        return SystemModel(np.array(self.H), np.array(self.L), self.bath.params())

    def observables(self) -> dict:
        return {name: np.array(_resolve_named(name) if mat is None else mat) for name, mat in self.run.observables}

    def initial_state(self) -> np.ndarray:
        r = self.run.rho0
        if isinstance(r, str):
            return named_state(r, self.d)
        return np.array(r)

    def with_overrides(self, seed=None, trajectories=None) -> "RunConfig":
        run = self.run
        if seed is not None:
            run = replace(run, seed=int(seed))
        if trajectories is not None:
            run = replace(run, trajectories=int(trajectories))
        return replace(self, run=run)


def named_state(name: str, d: int) -> np.ndarray:
    rho = np.zeros((d, d), dtype=complex)
    if name == "excited":
        rho[-1, -1] = 1
    elif name == "ground":
        rho[0, 0] = 1
    elif name == "mixed":
        rho = np.eye(d, dtype=complex) / d
    elif name == "plus":
        rho[:, :] = 1.0 / d
    else:
        raise ConfigError(f"run.rho0: unknown state name {name!r} (expected one of {', '.join(STATE_NAMES)})")
    return rho


def _resolve_named(name: str) -> np.ndarray:
    try:
        return NAMED_QUBIT_OPERATORS[name]
    except KeyError:
        raise ConfigError(f"unknown operator name {name!r}") from None


# ---------------------------------------------------------------------------
# parsing

def _field(obj: dict, key: str, path: str, kind=None, default=...):
    if key not in obj:
        if default is ...:
            raise ConfigError(f"{path}.{key}: required field missing")
        return default
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ConfigError(f"{path}.{key}: expected a finite number, got {val!r}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{path}.{key}: expected an integer, got {val!r}")
        return val
    if kind is str and not isinstance(val, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {val!r}")
    return val


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(extra)}")


def parse_matrix(spec, path: str, d: int | None = None) -> Matrix:
    if isinstance(spec, str):
        mat = _resolve_named(spec)
    elif isinstance(spec, dict):
        _check_keys(spec, ("name", "scale"), path)
        name = _field(spec, "name", path, str)
        scale = _field(spec, "scale", path, float, 1.0)
        mat = scale * _resolve_named(name)
    elif isinstance(spec, list):
        try:
            rows = []
            for row in spec:
                rows.append([complex(float(e[0]), float(e[1])) if isinstance(e, list) and len(e) == 2 else _bad() for e in row])
            mat = np.array(rows, dtype=complex)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: matrix entries must be [re, im] pairs") from None
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.size == 0:
            raise ConfigError(f"{path}: matrix must be square, got shape {mat.shape}")
    else:
        raise ConfigError(f"{path}: expected an operator name, {{name, scale}} or nested [re, im] rows")
    if d is not None and mat.shape != (d, d):
        raise ConfigError(f"{path}: expected a {d}x{d} matrix, got {mat.shape}")
    return tuple(tuple(complex(v) for v in row) for row in mat)


def _bad():
    raise ValueError


def _parse_bath(obj) -> BathSpec:
    _check_keys(obj, BATH_KINDS, "bath")
    present = [k for k in BATH_KINDS if k in obj]
    if len(present) != 1:
        raise ConfigError(f"bath: exactly one of {', '.join(BATH_KINDS)} is required, got {present or 'none'}")
    kind = present[0]
    sub = obj[kind]
    path = f"bath.{kind}"
    if kind == "bv":
        _check_keys(sub, ("r", "rho", "theta"), path)
        values = tuple(_field(sub, k, path, float) for k in ("r", "rho", "theta"))
    else:
        _check_keys(sub, ("n", "m_re", "m_im"), path)
        values = (_field(sub, "n", path, float), _field(sub, "m_re", path, float, 0.0), _field(sub, "m_im", path, float, 0.0))
    spec = BathSpec(kind, values)
    try:
        spec.params().validate()
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return spec


def _parse_run(obj, d) -> RunSettings:
    path = "run"
    _check_keys(obj, RunSettings.__dataclass_fields__, path)
    base = RunSettings()
    T = _field(obj, "T", path, float, base.T)
    dt = _field(obj, "dt", path, float, base.dt)
    if T <= 0 or dt <= 0:
        raise ConfigError("run.T and run.dt must be positive")
    steps = round(T / dt)
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ConfigError(f"run.T={T} must be an integer multiple of run.dt={dt}")
    M = _field(obj, "trajectories", path, int, base.trajectories)
    if M < 1:
        raise ConfigError("run.trajectories must be at least 1")
    stride = _field(obj, "stride", path, int, base.stride)
    if stride < 1 or steps % stride:
        raise ConfigError(f"run.stride must be a positive divisor of the step count {steps}")
    scheme = _field(obj, "scheme", path, str, base.scheme)
    if scheme not in ("euler", "normalized"):
        raise ConfigError(f"run.scheme: expected 'euler' or 'normalized', got {scheme!r}")
    filt = _field(obj, "filter", path, str, base.filter)
    if filt not in ("kushner", "zakai"):
        raise ConfigError(f"run.filter: expected 'kushner' or 'zakai', got {filt!r}")
    raw_obs = obj.get("observables", ["sz"])
    obs = []
    if isinstance(raw_obs, list):
        for i, name in enumerate(raw_obs):
            if not isinstance(name, str):
                raise ConfigError(f"run.observables[{i}]: expected an operator name")
            obs.append((name, parse_matrix(name, f"run.observables[{i}]", d)))
    elif isinstance(raw_obs, dict):
        for name, spec in raw_obs.items():
            obs.append((name, parse_matrix(spec, f"run.observables.{name}", d)))
    else:
        raise ConfigError("run.observables: expected a list of names or an object of matrices")
    if not obs:
        raise ConfigError("run.observables: at least one observable is required")
    rho0 = obj.get("rho0", base.rho0)
    if isinstance(rho0, str):
        named_state(rho0, d)
    else:
        rho0 = parse_matrix(rho0, "run.rho0", d)
        try:
            from .system import check_state

            check_state(np.array(rho0), d)
        except ValidationError as exc:
            raise ConfigError(f"run.rho0: {exc}") from None
    workers = _field(obj, "workers", path, int, base.workers)
    return RunSettings(T, dt, M, _field(obj, "seed", path, int, base.seed), tuple(obs), stride, scheme, filt, rho0, workers)


def parse_config(doc: dict) -> RunConfig:
    """Build a :class:`RunConfig` from a decoded JSON document."""
    _check_keys(doc, ("bath", "lambda", "system", "run", "output"), "config")
    bath = _parse_bath(_field(doc, "bath", "config"))
    system = _field(doc, "system", "config")
    _check_keys(system, ("d", "H", "L"), "system")
    d = _field(system, "d", "system", int, None)
    H = parse_matrix(_field(system, "H", "system"), "system.H", d)
    d = len(H)
    L = parse_matrix(_field(system, "L", "system"), "system.L", d)
    h = np.array(H)
    if np.max(np.abs(h - h.conj().T)) > 1e-10:
        raise ConfigError("system.H: matrix is not Hermitian")
    lam = doc.get("lambda")
    if lam is not None:
        lam = _field(doc, "lambda", "config", float)
    run = _parse_run(doc.get("run", {}), d)
    out = doc.get("output", {})
    _check_keys(out, ("directory", "max_trajectory_files"), "output")
    output = OutputSettings(
        _field(out, "directory", "output", str, OutputSettings.directory),
        _field(out, "max_trajectory_files", "output", int, OutputSettings.max_trajectory_files),
    )
    return RunConfig(bath, H, L, lam, run, output)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    return parse_config(doc)


# ---------------------------------------------------------------------------
# dumping

def _dump_matrix(mat: Matrix) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in mat]


def config_to_dict(cfg: RunConfig) -> dict:
    keys = ("r", "rho", "theta") if cfg.bath.kind == "bv" else ("n", "m_re", "m_im")
    run = cfg.run
    return {
        "bath": {cfg.bath.kind: dict(zip(keys, cfg.bath.values))},
        "lambda": cfg.lam,
        "system": {"d": cfg.d, "H": _dump_matrix(cfg.H), "L": _dump_matrix(cfg.L)},
        "run": {
            "T": run.T,
            "dt": run.dt,
            "trajectories": run.trajectories,
            "seed": run.seed,
            "observables": {name: _dump_matrix(mat) for name, mat in run.observables},
            "stride": run.stride,
            "scheme": run.scheme,
            "filter": run.filter,
            "rho0": run.rho0 if isinstance(run.rho0, str) else _dump_matrix(run.rho0),
            "workers": run.workers,
        },
        "output": {"directory": cfg.output.directory, "max_trajectory_files": cfg.output.max_trajectory_files},
    }


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


def default_config() -> RunConfig:
    """Squeezed demo qubit: ``L = sigma_-``, ``H = sigma_z / 2``, ``n = 1``, ``m = 0.8 e^{i pi/4}``."""
    m = 0.8 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    return parse_config({
        "bath": {"hkkr": {"n": 1.0, "m_re": m.real, "m_im": m.imag}},
        "system": {"H": {"name": "sz", "scale": 0.5}, "L": "sm"},
        "run": {"observables": ["sx", "sy", "sz"]},
    })
