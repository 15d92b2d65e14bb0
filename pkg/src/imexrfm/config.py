"""Run configuration: schema, per-problem defaults and validation.

Config files are YAML mappings (JSON manifests are valid YAML, so a run
manifest can be fed back as a config). Keys left out take the per-problem
desk defaults from :data:`DESK_SETTINGS`; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .problems import FULL_SETTINGS, PROBLEMS

# Reduced settings that run in seconds to minutes on a laptop. tau_s sits a
# little above machine precision: at 1e-16 nearly nothing is truncated and some
# seeds give stage maps with spurious growing modes.
DESK_SETTINGS = {
    "heat_1d": {"m": [4], "j_n": 100, "q": 50, "r_m": 2.0, "t_end": 0.5, "dt": 1e-2, "tau_s": 1e-14},
    "allen_cahn_1d": {"m": [8], "j_n": 200, "q": 60, "r_m": 10.0, "t_end": 1.0, "dt": 1e-2, "tau_s": 1e-14},
    "burgers_1d": {"m": [2], "j_n": 200, "q": 60, "r_m": 10.0, "t_end": 0.5, "dt": 2e-2, "tau_s": 1e-14},
    "kdv_1d": {"m": [8], "j_n": 200, "q": 60, "r_m": 8.0, "t_end": 0.5, "dt": 2e-3, "tau_s": 1e-14},
    "cahn_hilliard_1d": {"m": [16], "j_n": 200, "q": 60, "r_m": 6.0, "t_end": 0.6, "dt": 1e-2, "tau_s": 1e-14},
    "allen_cahn_2d": {"m": [2, 2], "j_n": 100, "q": 5, "r_m": 1.0, "t_end": 0.6, "dt": 3e-2, "tau_s": 1e-14, "eval_points": 64},
}

# Spectral reference settings per problem (1-D periodic problems only).
ORACLE_DEFAULTS = {
    "heat_1d": {"modes": 256, "dt_ref": 1e-4, "integrator": "ifrk4"},
    "allen_cahn_1d": {"modes": 1024, "dt_ref": 1e-4, "integrator": "ifrk4"},
    "burgers_1d": {"modes": 512, "dt_ref": 1e-4, "integrator": "ifrk4"},
    "kdv_1d": {"modes": 512, "dt_ref": 1e-4, "integrator": "ifrk4"},
    "cahn_hilliard_1d": {"modes": 512, "dt_ref": 1e-5, "integrator": "ifrk4"},
}

SCHEMA_VERSION = 1


class _Loader(yaml.SafeLoader):
    """YAML loader that also reads ``1e-5`` (no decimal point) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*\.?[0-9_]*|\.[0-9_]+)(?:[eE][-+]?[0-9]+)?$|^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$"),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    problem: str = "allen_cahn_1d"
    overrides: dict = field(default_factory=dict)
    m: list = field(default_factory=lambda: [8])
    j_n: int = 200
    q: int = 60
    r_m: float = 10.0
    seed: int = 0
    tau_s: float = 1e-16
    activation: str = "tanh"
    pou: str = "psi_a"
    collocation: str = "uniform-closed"
    scheme: str = "ars443"
    t_end: float = 1.0
    dt: float | None = 1e-2
    dt_list: list = field(default_factory=list)
    # "exact": t_end must be a multiple of dt; "floor": stop at the last full step
    end_time: str = "exact"
    snapshot_times: list = field(default_factory=list)
    weights: dict = field(default_factory=lambda: {"pde": 1.0, "boundary": 1.0, "continuity": 1.0})
    row_scaling: str = "none"
    update: str = "pointwise"
    reuse_operator: bool = True
    oracle: dict = field(default_factory=dict)
    reference_dt: float | None = None
    eval_points: int = 256
    out_dir: str = "out"
    cache_dir: str | None = None

    @classmethod
    def for_problem(cls, problem: str, **kw) -> RunConfig:
        if problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {problem!r}; choose from {', '.join(PROBLEMS)}")
        base = dict(DESK_SETTINGS[problem])
        base["oracle"] = dict(ORACLE_DEFAULTS.get(problem, {}))
        base.update(kw)
        return from_dict({"problem": problem, **base})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def counts(self) -> list[int]:
        return [int(v) for v in (self.m if isinstance(self.m, (list, tuple)) else [self.m])]

    def steps_for(self, dt: float) -> int:
        """Number of steps to take with ``dt`` under the end-time policy."""
        ratio = self.t_end / dt
        if self.end_time == "floor":
            return int(math.floor(ratio + 1e-9))
        k = int(round(ratio))
        if k < 1 or abs(k * dt - self.t_end) > 1e-12 * max(1.0, self.t_end):
            raise ConfigError(f"K*dt != T: T={self.t_end} is not a multiple of dt={dt}")
        return k

    def validate(self) -> RunConfig:
        from .features import ACTIVATIONS, POUS
        from .imex import TABLEAUX

        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        dim = len(DESK_SETTINGS[self.problem]["m"])
        if len(self.counts) == 1 and dim > 1:
            self.m = self.counts * dim
        if len(self.counts) != dim or any(c < 1 for c in self.counts):
            raise ConfigError(f"m must hold {dim} positive counts")
        if self.j_n < 1 or self.q < 2:
            raise ConfigError("j_n must be >= 1 and q >= 2")
        if not self.r_m > 0:
            raise ConfigError("r_m must be positive")
        if not 0 <= self.tau_s < 1:
            raise ConfigError("tau_s must lie in [0, 1)")
        if self.activation not in ACTIVATIONS or self.pou not in POUS:
            raise ConfigError("unknown activation or PoU")
        if self.scheme not in TABLEAUX:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.end_time not in ("exact", "floor"):
            raise ConfigError("end_time must be 'exact' or 'floor'")
        if self.update not in ("pointwise", "last_stage"):
            raise ConfigError("update must be 'pointwise' or 'last_stage'")
        if self.row_scaling not in ("none", "max"):
            raise ConfigError("row_scaling must be 'none' or 'max'")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        for dt in self.all_dts():
            if not dt > 0:
                raise ConfigError("time steps must be positive")
            self.steps_for(dt)
        if any(w <= 0 for w in self.weights.values()):
            raise ConfigError("row-block weights must be positive")
        for t in self.snapshot_times:
            if not 0 <= t <= self.t_end:
                raise ConfigError(f"snapshot time {t} outside [0, {self.t_end}]")
        return self

    def all_dts(self) -> list[float]:
        dts = list(self.dt_list)
        if self.dt is not None:
            dts.append(self.dt)
        if self.reference_dt is not None:
            dts.append(self.reference_dt)
        return [float(v) for v in dts]


def from_dict(data: dict) -> RunConfig:
    data = dict(data)
    # manifests nest the echoed config
    if "config" in data and isinstance(data["config"], dict):
        data = dict(data["config"])
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    problem = data.get("problem", RunConfig.problem)
    if problem not in PROBLEMS:
        raise ConfigError(f"unknown problem {problem!r}; choose from {', '.join(PROBLEMS)}")
    merged = dict(DESK_SETTINGS[problem])
    merged["oracle"] = dict(ORACLE_DEFAULTS.get(problem, {}))
    merged.update(data)
    if isinstance(merged.get("m"), int):
        merged["m"] = [merged["m"]]
    for key in ("r_m", "tau_s", "t_end"):
        if key in merged:
            merged[key] = float(merged[key])
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
        data = json.loads(text) if path.suffix == ".json" else yaml.load(text, Loader=_Loader) or {}
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return from_dict(data)


def full_config(problem: str, **kw) -> RunConfig:
    """Full-scale configuration for ``problem``, with its whole dt set as ``dt_list``."""
    s = FULL_SETTINGS[problem]
    dim = len(DESK_SETTINGS[problem]["m"])
    base = {
        "m": [s["m"]] * dim,
        "j_n": s["j_n"],
        "q": s["q"],
        "r_m": s["r_m"],
        "t_end": s["t_end"],
        "dt_list": list(s["dt_set"]),
        "dt": None,
        "tau_s": 1e-16,
        "end_time": "floor",
    }
    base.update(kw)
    return RunConfig.for_problem(problem, **base)
