"""Experiment configuration: dataclasses, JSON round-trip, named built-ins."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

__all__ = ["ConfigError", "KernelConfig", "BasisConfig", "NoiseConfig", "NonlinearityConfig",
           "ControlConfig", "GridConfig", "ExperimentConfig", "BUILTINS", "builtin_config",
           "load_config"]


class ConfigError(ValueError):
    """Carries a list of itemised problems."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class KernelConfig:
    type: str = "exponential"
    k0: float = 1.0
    parameters: dict = field(default_factory=lambda: {"amplitude": 1.0, "rate": 1.0})
    gamma: float = 0.0


@dataclass
class BasisConfig:
    domain: str = "interval"
    N: int = 8
    q: float = 0.0
    scale: float = 1.0


@dataclass
class NoiseConfig:
    n_paths: int = 1000
    dt: float = 1e-3


@dataclass
class NonlinearityConfig:
    name: str = "zero"
    params: dict = field(default_factory=dict)


@dataclass
class ControlConfig:
    problem: str = "lq"
    params: dict = field(default_factory=dict)
    n_paths: int = 10_000
    n_steps: int = 50
    degree: int = 2
    m_random: int = 20


@dataclass
class GridConfig:
    T: float = 2.0
    n_intervals: int = 2000
    times: list = field(default_factory=lambda: [0.25, 1.0])
    modes: list = field(default_factory=lambda: list(range(1, 9)))
    laplace_lambdas: list = field(default_factory=lambda: [0.5, 1.0, 10.0])
    t1: float = 0.3
    t2: float = 0.5
    n_states: int = 100
    epsilons: list = field(default_factory=lambda: [0.25, 0.5, 0.75])


_SECTIONS = {"kernel": KernelConfig, "basis": BasisConfig, "noise": NoiseConfig,
             "nonlinearity": NonlinearityConfig, "control": ControlConfig, "grid": GridConfig}

_KERNEL_TYPES = {"heat", "exponential", "singular", "table"}
_NONLINEARITIES = {"zero", "constant", "linear", "sine", "saturating", "quadratic"}
_PROBLEMS = {"lq", "heat_tracking"}


@dataclass
class ExperimentConfig:
    kernel: KernelConfig = field(default_factory=KernelConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    nonlinearity: NonlinearityConfig = field(default_factory=NonlinearityConfig)
    control: Optional[ControlConfig] = None
    grid: GridConfig = field(default_factory=GridConfig)
    seed: int = 0
    workers: int = 1
    out: str = "runs"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        problems = []
        data = copy.deepcopy(data)
        top = {f.name for f in fields(cls)}
        for key in data:
            if key not in top:
                problems.append(f"unknown top-level key {key!r}")
        kwargs = {}
        for name, sub in _SECTIONS.items():
            raw = data.get(name)
            if raw is None:
                if name != "control":
                    kwargs[name] = sub()
                continue
            if not isinstance(raw, dict):
                problems.append(f"{name}: expected an object")
                continue
            allowed = {f.name for f in fields(sub)}
            extra = sorted(set(raw) - allowed)
            if extra:
                problems.append(f"{name}: unknown keys {extra}")
            kwargs[name] = sub(**{k: v for k, v in raw.items() if k in allowed})
        for key in ("seed", "workers", "out"):
            if key in data:
                kwargs[key] = data[key]
        cfg = cls(**kwargs)
        try:
            cfg.validate()
        except ConfigError as exc:
            problems.extend(exc.problems)
        if problems:
            raise ConfigError(problems)
        return cfg

    def validate(self):
        p = []
        if self.kernel.type not in _KERNEL_TYPES:
            p.append(f"kernel.type must be one of {sorted(_KERNEL_TYPES)}")
        if not self.kernel.k0 > 0:
            p.append("kernel.k0 must be positive")
        if not 0 <= self.kernel.gamma < 1:
            p.append("kernel.gamma must lie in [0, 1)")
        if self.basis.N < 1:
            p.append("basis.N must be at least 1")
        if self.noise.n_paths < 1:
            p.append("noise.n_paths must be at least 1")
        if not self.noise.dt > 0:
            p.append("noise.dt must be positive")
        if self.nonlinearity.name not in _NONLINEARITIES:
            p.append(f"nonlinearity.name must be one of {sorted(_NONLINEARITIES)}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**63:
            p.append("seed must be a nonnegative integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            p.append("workers must be a positive integer")
        g = self.grid
        if not g.T > 0 or g.n_intervals < 4:
            p.append("grid.T must be positive and grid.n_intervals >= 4")
        if any((not isinstance(m, int)) or m < 1 for m in g.modes):
            p.append("grid.modes must be positive integers")
        if any(t <= 0 for t in g.times):
            p.append("grid.times must be positive")
        if any(not 0 < e < 1 for e in g.epsilons):
            p.append("grid.epsilons must lie in (0, 1)")
        if self.control is not None:
            c = self.control
            if c.problem not in _PROBLEMS:
                p.append(f"control.problem must be one of {sorted(_PROBLEMS)}")
            if not 1 <= c.degree <= 3:
                p.append("control.degree must be 1, 2 or 3")
            if c.n_paths < 2 or c.n_steps < 1:
                p.append("control.n_paths >= 2 and control.n_steps >= 1 required")
        if p:
            raise ConfigError(p)
        return self

    def kernel_spec(self) -> dict:
        return asdict(self.kernel)

    def basis_spec(self) -> dict:
        return {"domain": self.basis.domain, "N": self.basis.N,
                "noise": {"q": self.basis.q, "scale": self.basis.scale}}


BUILTINS = {
    "default": {},
    "heat": {"kernel": {"type": "heat", "k0": 1.0, "parameters": {}}},
    "singular": {"kernel": {"type": "singular", "k0": 1.0, "gamma": 0.5,
                            "parameters": {"rate": 1.0, "amplitude": 1.0}}},
    "covariance": {"basis": {"N": 16, "q": 1.0}, "noise": {"n_paths": 10_000, "dt": 1e-3},
                   "grid": {"times": [0.25, 1.0]}},
    "sine": {"basis": {"N": 8}, "nonlinearity": {"name": "sine", "params": {"L": 1.0}},
             "noise": {"n_paths": 1000, "dt": 0.01}, "grid": {"T": 1.0}},
    "lq": {"control": {"problem": "lq", "params": {"a": 0.0, "b": 1.0, "q": 1.0, "p_T": 0.0,
                                                   "T": 1.0, "x0": 1.0}}},
}


def builtin_config(name: str) -> ExperimentConfig:
    if name not in BUILTINS:
        raise ConfigError([f"unknown built-in config {name!r}; choose from {sorted(BUILTINS)}"])
    return ExperimentConfig.from_dict(BUILTINS[name])


def load_config(path) -> tuple:
    """Read a config or a run manifest; returns (config, command or None)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config root must be an object"])
    if "manifest_version" in data:
        return ExperimentConfig.from_dict(data["config"]), data.get("command")
    return ExperimentConfig.from_dict(data), None
