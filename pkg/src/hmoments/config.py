"""Run configuration: a JSON document whose defaults reproduce the four-site study."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
import json

import numpy as np

from .errors import ConfigError
from .estimators import METHODS
from .models import Topology

SOURCES = ("exact", "sampled")


@dataclass(frozen=True)
class GridSpec:
    min: float
    max: float
    steps: int

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"grid steps must be an integer >= 1, got {self.steps!r}")
        if self.steps == 1 and self.min != self.max:
            raise ConfigError("a one-step grid needs min == max")
        if self.max < self.min:
            raise ConfigError("grid max is below min")

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, int(self.steps))

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """'A,B,STEPS' or a single value 'X'."""
        parts = [p.strip() for p in text.split(",")]
        try:
            if len(parts) == 1:
                x = float(parts[0])
                return cls(x, x, 1)
            if len(parts) == 3:
                return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}: {exc}") from None
        raise ConfigError(f"bad grid {text!r}; expected A,B,STEPS or a single value")


def _default_grid():
    return GridSpec(0.1, 0.9, 9)


@dataclass(frozen=True)
class ScanConfig:
    J: GridSpec = field(default_factory=_default_grid)
    U: GridSpec = field(default_factory=_default_grid)
    B: float = 1.0
    n_sites: int = 4
    topology: str = Topology.OPEN.value
    point: tuple[float, float] = (0.5, 0.5)
    theta0: float = -2.0
    theta1: float = 1.0
    source: str = "exact"
    shots: int = 8192
    p01: float = 0.0
    p10: float = 0.0
    calibrate: bool = False
    calibration_shots: int | None = None
    repeats: int = 1
    grouping_policy: str = "weight-descending"
    method: str = "ite"
    order: int = 15
    tau: float | str = 2.5
    tau_max: float = 10.0
    ite_scale: float = 0.5
    seed: int = 0
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"moments.source must be one of {SOURCES}, got {self.source!r}")
        if self.method not in METHODS:
            raise ConfigError(f"estimator.method must be one of {METHODS}, got {self.method!r}")
        if self.topology not in {t.value for t in Topology}:
            raise ConfigError(f"model.topology {self.topology!r} is not recognised")
        if self.source == "sampled" and self.shots < 1:
            raise ConfigError("moments.shots must be >= 1 in sampled mode")
        if not (0 <= self.p01 <= 1 and 0 <= self.p10 <= 1):
            raise ConfigError("noise probabilities must lie in [0, 1]")
        if self.order < 1:
            raise ConfigError("estimator.order must be >= 1")
        if isinstance(self.tau, str) and self.tau != "auto":
            raise ConfigError("estimator.tau must be a number or 'auto'")
        if not isinstance(self.tau, str) and self.tau < 0:
            raise ConfigError("estimator.tau must be non-negative")
        if self.workers < 1 or self.repeats < 1:
            raise ConfigError("workers and repeats must be >= 1")

    @property
    def noisy(self) -> bool:
        return self.p01 > 0 or self.p10 > 0

    def single_point(self) -> tuple[float, float]:
        """(U, J) used by single-point commands: a one-step grid wins over ``point``."""
        U = self.U.min if self.U.steps == 1 else self.point[0]
        J = self.J.min if self.J.steps == 1 else self.point[1]
        return float(U), float(J)

    def to_dict(self) -> dict:
        return {
            "model": {"J": asdict(self.J), "U": asdict(self.U), "B": self.B, "n_sites": self.n_sites,
                      "topology": self.topology, "point": {"U": self.point[0], "J": self.point[1]}},
            "ansatz": {"theta0": self.theta0, "theta1": self.theta1},
            "moments": {"source": self.source, "shots": self.shots,
                        "noise": {"p01": self.p01, "p10": self.p10},
                        "calibrate": self.calibrate, "calibration_shots": self.calibration_shots,
                        "repeats": self.repeats, "grouping_policy": self.grouping_policy},
            "estimator": {"method": self.method, "order": self.order, "tau": self.tau,
                          "tau_max": self.tau_max, "ite_scale": self.ite_scale},
            "seed": self.seed,
            "workers": self.workers,
            "out": self.out,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ScanConfig":
        flat: dict = {}
        layout = {
            "model": {"J", "U", "B", "n_sites", "topology", "point"},
            "ansatz": {"theta0", "theta1"},
            "moments": {"source", "shots", "noise", "calibrate", "calibration_shots", "repeats",
                        "grouping_policy"},
            "estimator": {"method", "order", "tau", "tau_max", "ite_scale"},
        }
        for key, val in d.items():
            if key in layout:
                if not isinstance(val, dict):
                    raise ConfigError(f"'{key}' must be an object")
                for sub, v in val.items():
                    if sub not in layout[key]:
                        raise ConfigError(f"unknown key '{key}.{sub}'")
                    flat[sub] = v
            elif key in ("seed", "workers", "out"):
                flat[key] = val
            else:
                raise ConfigError(f"unknown key '{key}'")
        try:
            for g in ("J", "U"):
                if g in flat:
                    flat[g] = GridSpec(**flat[g])
            if "point" in flat:
                flat["point"] = (float(flat["point"]["U"]), float(flat["point"]["J"]))
            if "noise" in flat:
                noise = flat.pop("noise")
                flat["p01"] = float(noise.get("p01", 0.0))
                flat["p10"] = float(noise.get("p10", 0.0))
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"malformed grid, point or noise block: {exc}") from None
        return cls(**flat)

    @classmethod
    def from_json(cls, text: str) -> "ScanConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    @classmethod
    def load(cls, path: str) -> "ScanConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text)

    def updated(self, **changes) -> "ScanConfig":
        known = {f.name for f in fields(self)}
        bad = set(changes) - known
        if bad:
            raise ConfigError(f"unknown settings {sorted(bad)}")
        return replace(self, **changes)
