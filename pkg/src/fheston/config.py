"""Run configuration: one YAML file of record, overridable from the command line."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .contracts import PayoffSpec, SigmaSpec, payoff_from_dict, sigma_from_dict
from .exceptions import UsageError
from .model import ModelParams


def _default_sigma() -> dict[str, Any]:
    return {"kind": "shifted-power", "c": 0.5, "a": 0.01, "q": 0.9}


def _default_payoff() -> dict[str, Any]:
    return {"kind": "indicator", "lower": 0.5, "upper": 1.0}


@dataclass
class RunConfig:
    """Everything a CLI run needs; defaults reproduce the published simulation setup."""

    model: dict[str, float] = field(default_factory=lambda: ModelParams().to_dict())
    sigma: dict[str, Any] = field(default_factory=_default_sigma)
    payoff: dict[str, Any] = field(default_factory=_default_payoff)
    grid_sizes: list[int] = field(default_factory=lambda: [100, 500, 1000])
    paths: int = 1000
    estimates: int = 1000
    scale: float = 1.0
    seed: int = 20240101
    estimator: str = "smoothed"
    ladder: list[int] = field(default_factory=lambda: [32, 64, 128, 256, 512])
    converge_paths: int = 10_000
    validate_p: float = 32.0
    validate_paths: int = 20_000
    out: str = "results"
    threads: int | None = None

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        merged = {}
        for name in known:
            default = getattr(base, name)
            value = d.get(name, default)
            if name == "model":
                value = {**default, **(value or {})}
            merged[name] = value
        cfg = cls(**merged)
        cfg.check()
        return cfg

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise UsageError("config file must contain a mapping at top level")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        return cls.loads(text)

    def check(self) -> None:
        if int(self.paths) < 1 or int(self.estimates) < 1:
            raise UsageError("paths and estimates must be >= 1")
        if not self.scale > 0:
            raise UsageError("scale must be positive")
        if not self.grid_sizes or min(self.grid_sizes) < 1:
            raise UsageError("grid_sizes must be a non-empty list of positive integers")
        if self.threads is not None and int(self.threads) < 1:
            raise UsageError("threads must be >= 1")
        # validates the nested specs eagerly
        self.model_params()
        self.sigma_spec()
        self.payoff_spec()

    def model_params(self) -> ModelParams:
        return ModelParams(**self.model)

    def sigma_spec(self) -> SigmaSpec:
        return sigma_from_dict(self.sigma)

    def payoff_spec(self) -> PayoffSpec:
        return payoff_from_dict(self.payoff)

    def scaled_estimates(self) -> int:
        return max(1, int(round(self.estimates * self.scale)))
