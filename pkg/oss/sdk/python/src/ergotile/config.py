"""Experiment configuration: profiles, loading and worker pools."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Literal, TypeVar

import yaml
from pydantic import BaseModel, Field, ValidationError as PydanticValidationError, model_validator

from ergotile.exceptions import ConfigError, ParameterError
from ergotile.kernels import ThetaProfile
from ergotile.rng import SplitMix64
from ergotile.schema import validate_config
from ergotile.tiles import TileSystem

logger = logging.getLogger(__name__)

THREADS_ENV = "ERGOTILE_THREADS"

_T = TypeVar("_T")
_R = TypeVar("_R")


class ResolutionConfig(BaseModel):
    """Sample grid: window [-2^a, 2^a), step 2^-b."""

    a: int = Field(5, ge=2, le=8)
    b: int = Field(8, ge=2, le=10)


class TileConfig(BaseModel):
    e: int = 24
    delta: int = Field(4, ge=1)
    c_sep: float = Field(2.0, gt=0)
    c_enl: float | None = None
    theta_low: float = Field(4.0, gt=0)
    theta_high: float = Field(16.0, gt=0)
    scale_residue: int = 0
    l1_residue: int = Field(0, ge=0, le=4)

    @model_validator(mode="after")
    def _check_theta(self) -> TileConfig:
        if self.theta_high <= self.theta_low:
            raise ValueError("theta_high must exceed theta_low")
        if self.e == 0:
            raise ValueError("e must be nonzero")
        return self


class SparsityConfig(BaseModel):
    gap_multiplier: float = Field(2.0, gt=0)
    separation_multiplier: float = Field(2.0, gt=0)


class KernelConfig(BaseModel):
    kind: Literal["average", "hilbert"] = "hilbert"
    M: int = Field(4, ge=2)


class ScaleConfig(BaseModel):
    U: list[int] = Field(default_factory=lambda: [0, 2, 4, 6])
    n: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_increasing(self) -> ScaleConfig:
        if any(x >= y for x, y in zip(self.U, self.U[1:])):
            raise ValueError("U must be strictly increasing")
        return self


PROFILES: dict[str, dict[str, Any]] = {
    "paper": {
        "tiles": {
            "e": 100,
            "delta": 1000,
            "c_sep": 10.0,
            "theta_low": 1000.0,
            "theta_high": 4000.0,
        },
        "sparsity": {"gap_multiplier": 100.0, "separation_multiplier": 100.0},
    },
    "test": {
        "tiles": {"e": 24, "delta": 4, "c_sep": 2.0, "theta_low": 4.0, "theta_high": 16.0},
        "sparsity": {"gap_multiplier": 2.0, "separation_multiplier": 2.0},
    },
}


class ExperimentConfig(BaseModel):
    """One experiment run."""

    kind: str
    profile: Literal["paper", "test"] = "test"
    seed: int = Field(1, ge=0)
    trials: int = Field(20, ge=1)
    output_dir: str = "results"
    resolution: ResolutionConfig = Field(default_factory=ResolutionConfig)
    tiles: TileConfig = Field(default_factory=TileConfig)
    sparsity: SparsityConfig = Field(default_factory=SparsityConfig)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    scales: ScaleConfig = Field(default_factory=ScaleConfig)
    params: dict[str, Any] = Field(default_factory=dict)

    def tile_system(self) -> TileSystem:
        t = self.tiles
        return TileSystem(
            e=t.e,
            delta=t.delta,
            c_sep=Fraction(t.c_sep).limit_denominator(10**6),
            c_enl=None if t.c_enl is None else Fraction(t.c_enl).limit_denominator(10**6),
            scale_residue=t.scale_residue,
            l1_residue=t.l1_residue,
        )

    def theta(self) -> ThetaProfile:
        return ThetaProfile(self.tiles.theta_low, self.tiles.theta_high)

    def rng(self) -> SplitMix64:
        return SplitMix64(self.seed)

    def param(self, key: str, default: _T) -> _T:
        """Per-experiment knob with a typed default."""
        value = self.params.get(key, default)
        if default is not None and not isinstance(value, type(default)):
            if isinstance(default, float) and isinstance(value, int):
                return float(value)  # type: ignore[return-value]
            raise ConfigError(f"params.{key} must be {type(default).__name__}, got {value!r}")
        return value  # type: ignore[no-any-return]


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def parse_config(raw: dict[str, Any]) -> ExperimentConfig:
    """Schema check, profile defaults, field validation, tile constraints.

    Raises
    ------
    ConfigError
        On any failure; schema failures raise its subclass ValidationError.
    """
    validate_config(raw)
    profile = raw.get("profile", "test")
    merged = _merge(PROFILES[profile], raw)
    try:
        config = ExperimentConfig(**merged)
    except PydanticValidationError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        config.tile_system().check()
    except ParameterError as exc:
        raise ConfigError(f"tile constants rejected: {exc}") from exc
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    """Load an experiment config from a YAML file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {p}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{p} must hold a mapping, got {type(raw).__name__}")
    return parse_config(raw)


def worker_count() -> int:
    """Worker threads from ERGOTILE_THREADS (default 1)."""
    value = os.environ.get(THREADS_ENV, "1")
    try:
        count = int(value)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from exc
    if count < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return count


def parallel_map(fn: Callable[[_T], _R], items: Iterable[_T]) -> list[_R]:
    """``fn`` over ``items`` on the worker pool, results in input order."""
    work = list(items)
    workers = worker_count()
    if workers == 1 or len(work) < 2:
        return [fn(item) for item in work]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))
