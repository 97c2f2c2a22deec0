"""Experiment configuration: JSON files mapped onto frozen dataclasses.

A config file has the shape::

    {"experiment": "bistable", "seed": 7, "out": "runs/bistable",
     "workers": 1, "params": {...}}

``params`` is specific to the experiment and may be partial; missing keys
take the defaults below. Unknown keys anywhere are errors, reported with
their key path (``params.integrator.dt``).
"""

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ConfigError

Matrix = Union[float, list]


def as_matrix_spec(value, n, path):
    """Scalar -> ``value * I``, flat list -> diagonal, nested list -> matrix."""
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a number or a (nested) list of numbers")
    if a.ndim == 0:
        a = a * np.eye(n)
    elif a.ndim == 1:
        a = np.diag(a)
    if a.shape != (n, n):
        raise ConfigError(f"{path}: expected a {n}x{n} matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{path}: non-finite entries")
    return a


def matrix_dim(value, default=1):
    a = np.asarray(value, dtype=float)
    return default if a.ndim == 0 else a.shape[0]


def _positive(path, value):
    if not (isinstance(value, (int, float)) and value > 0):
        raise ConfigError(f"{path}: must be positive, got {value!r}")


def _count(path, value, minimum=1):
    if not (isinstance(value, int) and value >= minimum):
        raise ConfigError(f"{path}: must be an integer >= {minimum}, got {value!r}")


# --------------------------------------------------------------------------
# parameter blocks


@dataclass(frozen=True)
class Integrator:
    dt: float = 5e-3
    n_steps: int = 1_000_000
    thin: int = 200

    def check(self, path):
        _positive(f"{path}.dt", self.dt)
        _count(f"{path}.n_steps", self.n_steps, 0)
        _count(f"{path}.thin", self.thin)


@dataclass(frozen=True)
class OuKlParams:
    k: Matrix = 1.0
    gamma: Matrix = 1.0
    beta: float = 1.0
    sigma0: Matrix = 0.1
    alphas: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    t_max: float = 20.0
    n_times: int = 2001
    fit_window: list = field(default_factory=lambda: [1e-10, 1e-2])

    def check(self, path):
        _positive(f"{path}.beta", self.beta)
        _positive(f"{path}.t_max", self.t_max)
        _count(f"{path}.n_times", self.n_times, 2)
        if not self.alphas:
            raise ConfigError(f"{path}.alphas: need at least one value")
        for i, a in enumerate(self.alphas):
            _positive(f"{path}.alphas[{i}]", a)
        lo, hi = _pair(f"{path}.fit_window", self.fit_window)
        if not 0 < lo < hi:
            raise ConfigError(f"{path}.fit_window: need 0 < lo < hi")


@dataclass(frozen=True)
class RatioParams:
    k: Matrix = field(default_factory=lambda: [1.0, 1.0])
    gamma: Matrix = field(default_factory=lambda: [1.0, 2.0])
    beta: float = 1.0
    alpha_range: list = field(default_factory=lambda: [0.05, 10.0])
    n_grid: int = 400
    tol: float = 1e-8

    def check(self, path):
        _positive(f"{path}.beta", self.beta)
        _positive(f"{path}.tol", self.tol)
        _count(f"{path}.n_grid", self.n_grid, 2)
        lo, hi = _pair(f"{path}.alpha_range", self.alpha_range)
        if not 0 < lo < hi:
            raise ConfigError(f"{path}.alpha_range: need 0 < lo < hi")


@dataclass(frozen=True)
class BistableParams:
    d: int = 10
    k: float = 1.0
    gamma_diag: float = 0.04
    gamma_off: float = 0.02
    beta_bar: float = 1.0
    beta: float = 5.0
    integrator: Integrator = Integrator()
    replicas: int = 20
    chunk: int = 20
    init_x: Matrix = -1.0
    init_y: Matrix = 0.0
    band: float = 0.5
    bins: int = 60
    hist_range: list = field(default_factory=lambda: [-2.5, 2.5])
    max_lag: int = 50

    def check(self, path):
        _count(f"{path}.d", self.d, 0)
        for name in ("k", "beta_bar", "beta", "band"):
            _positive(f"{path}.{name}", getattr(self, name))
        self.integrator.check(f"{path}.integrator")
        _count(f"{path}.replicas", self.replicas)
        _count(f"{path}.chunk", self.chunk)
        _count(f"{path}.bins", self.bins)
        _count(f"{path}.max_lag", self.max_lag, 0)
        lo, hi = _pair(f"{path}.hist_range", self.hist_range)
        if not lo < hi:
            raise ConfigError(f"{path}.hist_range: need lo < hi")


@dataclass(frozen=True)
class LjCoolParams:
    n_particles: int = 7
    dim: int = 2
    eps: float = 1.0
    sig: float = 1.0
    gamma: float = 0.1
    beta_bar: float = 1.0
    betas: list = field(default_factory=lambda: [1.0, 100.0])
    integrator: Integrator = Integrator(n_steps=200_000)
    replicas: int = 1
    chunk: int = 10
    init_spacing: float = 2.0
    init_noise: float = 0.1
    oracle_starts: int = 50
    oracle_dt: float = 1e-3
    oracle_steps: int = 20_000

    def check(self, path):
        _count(f"{path}.n_particles", self.n_particles, 2)
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"{path}.dim: must be 1, 2 or 3, got {self.dim!r}")
        for name in ("eps", "sig", "gamma", "beta_bar", "init_spacing", "oracle_dt"):
            _positive(f"{path}.{name}", getattr(self, name))
        if not (isinstance(self.init_noise, (int, float)) and self.init_noise >= 0):
            raise ConfigError(f"{path}.init_noise: must be non-negative")
        if not self.betas:
            raise ConfigError(f"{path}.betas: need at least one value")
        for i, b in enumerate(self.betas):
            _positive(f"{path}.betas[{i}]", b)
        self.integrator.check(f"{path}.integrator")
        _count(f"{path}.replicas", self.replicas)
        _count(f"{path}.chunk", self.chunk)
        _count(f"{path}.oracle_starts", self.oracle_starts, 0)
        _count(f"{path}.oracle_steps", self.oracle_steps, 0)


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "quadratic"
    k: Matrix = 1.0
    d: int = 0
    coupling: float = 1.0

    def check(self, path):
        if self.kind not in ("quadratic", "double_well"):
            raise ConfigError(f"{path}.kind: must be 'quadratic' or 'double_well', got {self.kind!r}")
        _count(f"{path}.d", self.d, 0)
        _positive(f"{path}.coupling", self.coupling)


@dataclass(frozen=True)
class LimitsParams:
    regime: str = "fixed_sim_temp"
    potential: PotentialSpec = PotentialSpec()
    gamma: Matrix = 1.0
    beta_bar: float = 1.0
    beta: float = 1.0
    eps: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    replicas: int = 50
    chunk: int = 50
    horizon: float = 1.0
    init_x: Matrix = 1.0
    init_y: Matrix = 0.0

    def check(self, path):
        if self.regime not in ("fixed_sim_temp", "fixed_target_temp"):
            raise ConfigError(f"{path}.regime: must be 'fixed_sim_temp' or 'fixed_target_temp', got {self.regime!r}")
        self.potential.check(f"{path}.potential")
        for name in ("beta_bar", "beta", "horizon"):
            _positive(f"{path}.{name}", getattr(self, name))
        if not self.eps:
            raise ConfigError(f"{path}.eps: need at least one value")
        for i, e in enumerate(self.eps):
            if not (isinstance(e, (int, float)) and 0 < e <= 1):
                raise ConfigError(f"{path}.eps[{i}]: must lie in (0, 1], got {e!r}")
        if len(set(self.eps)) != len(self.eps):
            raise ConfigError(f"{path}.eps: values must be distinct")
        _count(f"{path}.replicas", self.replicas)
        _count(f"{path}.chunk", self.chunk)


@dataclass(frozen=True)
class AepParams:
    k: Matrix = field(default_factory=lambda: [1.0, 2.0])
    gamma: Matrix = field(default_factory=lambda: [1.0, 0.5])
    beta_bar: float = 1.0
    beta: float = 2.0
    m: Optional[Matrix] = None
    b: Optional[Matrix] = None
    sigma0: Matrix = 0.1
    n_samples: int = 1_000_000
    t_max: float = 10.0
    n_times: int = 201

    def check(self, path):
        _positive(f"{path}.beta_bar", self.beta_bar)
        _positive(f"{path}.beta", self.beta)
        _positive(f"{path}.t_max", self.t_max)
        _count(f"{path}.n_samples", self.n_samples, 2)
        _count(f"{path}.n_times", self.n_times, 2)
        if self.m is not None and self.b is not None:
            raise ConfigError(f"{path}: give at most one of 'm' and 'b'")


PARAMS = {
    "ou_kl": OuKlParams,
    "ratio": RatioParams,
    "bistable": BistableParams,
    "lj_cool": LjCoolParams,
    "limits": LimitsParams,
    "aep": AepParams,
}


def _pair(path, value):
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"{path}: expected a list of two numbers")
    return float(value[0]), float(value[1])


# --------------------------------------------------------------------------
# generic dict -> dataclass mapping


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key (allowed: {', '.join(sorted(fields))})")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            value = _build(hint, value, f"{path}.{name}")
        else:
            value = _coerce(hint, value, f"{path}.{name}")
        kwargs[name] = value
    return cls(**kwargs)


def _coerce(hint, value, path):
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if hint is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    # Matrix and Optional[Matrix]
    if value is None:
        if type(None) in typing.get_args(hint):
            return None
        raise ConfigError(f"{path}: must not be null")
    if isinstance(value, bool) or not isinstance(value, (int, float, list)):
        raise ConfigError(f"{path}: expected a number or a list, got {value!r}")
    return float(value) if isinstance(value, int) else value


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    return obj


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: object
    seed: int = 0
    out: str = "out"
    workers: int = 1

    def resolved(self):
        """Fully expanded config as plain JSON data (defaults filled in)."""
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "out": self.out,
            "workers": self.workers,
            "params": _plain(self.params),
        }

    def digest(self):
        """sha256 of the resolved config without ``out`` and ``workers``.

        Neither affects the numbers written, so reruns into another directory
        or with another thread count carry the same hash.
        """
        data = self.resolved()
        del data["out"], data["workers"]
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def stamp(self):
        return f"config_sha256={self.digest()} seed={self.seed}"


def parse_config(data, seed=None, out=None):
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    allowed = {"experiment", "seed", "out", "workers", "params"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key (allowed: {', '.join(sorted(allowed))})")
    name = data.get("experiment")
    if name not in PARAMS:
        raise ConfigError(f"experiment: must be one of {', '.join(PARAMS)}, got {name!r}")
    params = _build(PARAMS[name], data.get("params", {}), "params")
    params.check("params")
    seed = data.get("seed", 0) if seed is None else seed
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed: must be an integer in [0, 2^64), got {seed!r}")
    out = data.get("out", "out") if out is None else str(out)
    if not isinstance(out, str):
        raise ConfigError(f"out: expected a string, got {out!r}")
    workers = data.get("workers", 1)
    _count("workers", workers)
    return ExperimentConfig(experiment=name, params=params, seed=seed, out=out, workers=workers)


def load_config(path, seed=None, out=None):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    return parse_config(data, seed=seed, out=out)
