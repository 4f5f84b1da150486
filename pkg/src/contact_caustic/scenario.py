"""Scenario configuration files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from .flow import FlowSettings
from .model import ConfigError, NormalFormCoefficients

H_RANGE = (1e-4, 0.2)
MIN_GRID = 512

_KEYS = {"name", "coefficients", "h", "side", "n_grid", "h_list", "k", "n_phi",
         "steps_per_period", "tol_energy", "expected", "checks", "provenance"}
_SIDES = {"plus": (1,), "minus": (-1,), "both": (1, -1)}


@dataclass(frozen=True)
class ScenarioConfig:
    coefficients: NormalFormCoefficients = field(default_factory=NormalFormCoefficients)
    h: float = 0.005
    side: str = "both"
    n_grid: int = 2048
    h_list: Tuple[float, ...] = tuple(round(0.005 * i, 3) for i in range(1, 13))
    k: int = 9
    n_phi: int = 64
    steps_per_period: int = 500
    tol_energy: float = 1e-9
    name: str = "unnamed"
    expected: Dict[str, str] = field(default_factory=dict)
    checks: Tuple[str, ...] = ("symbols",)
    provenance: str = ""

    def __post_init__(self):
        if not (H_RANGE[0] <= self.h <= H_RANGE[1]):
            raise ConfigError(f"h={self.h} outside the valid range {H_RANGE}")
        if self.side not in _SIDES:
            raise ConfigError(f"side must be one of {sorted(_SIDES)}")
        if int(self.n_grid) != self.n_grid or self.n_grid < MIN_GRID:
            raise ConfigError(f"n_grid must be an integer >= {MIN_GRID}")
        if any(not (0 < h <= H_RANGE[1]) for h in self.h_list):
            raise ConfigError("h_list entries must lie in (0, 0.2]")
        if self.steps_per_period < 16:
            raise ConfigError("steps_per_period must be at least 16")
        if not self.tol_energy > 0:
            raise ConfigError("tol_energy must be positive")
        for key, value in self.expected.items():
            if key not in ("plus", "minus"):
                raise ConfigError(f"expected symbols are keyed by plus/minus, got {key!r}")
        unknown = set(self.checks) - {"symbols", "fit", "heisenberg"}
        if unknown:
            raise ConfigError(f"unknown checks: {sorted(unknown)}")

    @property
    def sides(self) -> Tuple[int, ...]:
        return _SIDES[self.side]

    @property
    def settings(self) -> FlowSettings:
        return FlowSettings(steps_per_period=int(self.steps_per_period),
                            tol_energy=float(self.tol_energy))

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - _KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(data)
        kw["coefficients"] = NormalFormCoefficients.from_dict(data.get("coefficients", {}))
        try:
            for key in ("h", "tol_energy"):
                if key in kw:
                    kw[key] = float(kw[key])
            for key in ("n_grid", "k", "n_phi", "steps_per_period"):
                if key in kw:
                    kw[key] = int(kw[key])
            if "h_list" in kw:
                kw["h_list"] = tuple(float(h) for h in kw["h_list"])
            if "checks" in kw:
                kw["checks"] = tuple(kw["checks"])
            if "expected" in kw:
                kw["expected"] = dict(kw["expected"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def with_overrides(self, h: Optional[float] = None, side: Optional[str] = None,
                       n_grid: Optional[int] = None, steps_per_period: Optional[int] = None,
                       tol_energy: Optional[float] = None) -> "ScenarioConfig":
        changes = {k: v for k, v in dict(h=h, side=side, n_grid=n_grid,
                                         steps_per_period=steps_per_period,
                                         tol_energy=tol_energy).items() if v is not None}
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "coefficients": self.coefficients.to_dict(),
            "h": self.h,
            "side": self.side,
            "n_grid": self.n_grid,
            "h_list": list(self.h_list),
            "k": self.k,
            "n_phi": self.n_phi,
            "steps_per_period": self.steps_per_period,
            "tol_energy": self.tol_energy,
            "expected": dict(self.expected),
            "checks": list(self.checks),
            "provenance": self.provenance,
        }


def side_name(side: int) -> str:
    return "plus" if side > 0 else "minus"


def is_heisenberg(coeffs: NormalFormCoefficients) -> bool:
    d = coeffs.to_dict()
    return all(d[k] == 0 for k in d if k not in ("gamma_extra", "beta_terms")) \
        and not coeffs.gamma_extra and not coeffs.beta_terms
