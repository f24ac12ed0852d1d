from __future__ import annotations

import json
import math
import sys
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigurationError
from .models import (
    CustomTable,
    DeltaPair,
    GammaMixture,
    PairedSymmetric,
    SettingsQuad,
    SourcePolicy,
    UniformOnCircle,
)

DEFAULT_CHUNK_SIZE = 65536
SEED_LIMIT = 2**64


class Settings(BaseSettings):

    model_config = SettingsConfigDict(
        env_prefix="BELLSIM_",
        case_sensitive=False,
    )

    seed: int | None = Field(default=None, ge=0, lt=SEED_LIMIT)
    log_level: str = "WARNING"
    max_workers: int | None = Field(default=None, ge=1)


_settings: Settings | None = None


def get_settings(reload: bool = False) -> Settings:
    global _settings

    if _settings is None or reload:
        try:
            _settings = Settings()
        except ValidationError as e:
            raise ConfigurationError(f"invalid BELLSIM_* environment: {_describe(e)}") from e

    return _settings


def reset_settings() -> None:
    global _settings
    _settings = None


class AnglesInput(BaseModel):

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    a: float
    a_prime: float
    b: float
    b_prime: float


class AuditConfig(BaseModel):

    model_config = ConfigDict(extra="forbid")

    z_threshold: float = Field(default=4.0, gt=0.0)
    chi2_alpha: float = Field(default=1e-3, gt=0.0, lt=1.0)
    min_cell_count: int = Field(default=20, ge=1)


class RunConfig(BaseModel):
    """A validated simulation run."""

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    theta: float | None = Field(default=None, description="Expands to a=2θ, a′=0, b=θ, b′=3θ")
    angles: AnglesInput | None = None
    gamma: float | None = Field(default=None, ge=0.0, le=1.0)
    source: Literal["gamma_mixture", "fixed_xi", "uniform"]
    xi: float | None = None
    xi_weights: tuple[tuple[float, float, float, float], ...] | None = Field(
        default=None, description="Optional per-pair ξ table replacing the paired-symmetric scheme"
    )
    events: int = Field(ge=0)
    seed: int = Field(ge=0, lt=SEED_LIMIT)
    chunk_size: int = Field(default=DEFAULT_CHUNK_SIZE, ge=1)
    audit: AuditConfig = Field(default_factory=AuditConfig)

    _seed_source: str = PrivateAttr(default="config")

    @model_validator(mode="after")
    def _check_consistency(self) -> RunConfig:
        if (self.theta is None) == (self.angles is None):
            raise ValueError("exactly one of 'theta' or 'angles' must be given")
        if self.source == "gamma_mixture" and self.gamma is None:
            raise ValueError("'gamma' is required for source 'gamma_mixture'")
        if self.source == "fixed_xi" and self.xi is None:
            raise ValueError("'xi' is required for source 'fixed_xi'")
        if self.source != "gamma_mixture":
            for key in ("gamma", "xi_weights"):
                if getattr(self, key) is not None:
                    raise ValueError(f"'{key}' is only used by source 'gamma_mixture'")
        if self.source != "fixed_xi" and self.xi is not None:
            raise ValueError("'xi' is only used by source 'fixed_xi'")
        if self.xi_weights is not None:
            try:
                CustomTable(weights=self.xi_weights)
            except ValidationError as e:
                raise ValueError(f"invalid 'xi_weights': {_first_message(e)}") from e
        try:
            self.quad()
            self.source_policy()
        except ValidationError as e:
            # 3θ can overflow a finite theta
            raise ValueError(f"invalid angles: {_first_message(e)}") from e
        return self

    @property
    def seed_source(self) -> str:
        return self._seed_source

    def quad(self) -> SettingsQuad:
        if self.theta is not None:
            return SettingsQuad.from_theta(self.theta)
        assert self.angles is not None
        return SettingsQuad(
            a=self.angles.a, a_prime=self.angles.a_prime, b=self.angles.b, b_prime=self.angles.b_prime
        )

    def source_policy(self) -> SourcePolicy:
        if self.source == "uniform":
            return UniformOnCircle()
        if self.source == "fixed_xi":
            assert self.xi is not None
            return DeltaPair(xi=self.xi)
        assert self.gamma is not None
        scheme = CustomTable(weights=self.xi_weights) if self.xi_weights else PairedSymmetric()
        return GammaMixture(gamma=self.gamma, scheme=scheme)


def _first_message(error: ValidationError) -> str:
    return str(error.errors()[0]["msg"]).removeprefix("Value error, ")


def _describe(error: ValidationError) -> str:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        kind = item["type"]
        if kind == "missing":
            messages.append(f"missing required key '{location}'")
        elif kind == "extra_forbidden":
            messages.append(f"unknown key '{location}'")
        elif kind in ("greater_than", "greater_than_equal", "less_than", "less_than_equal"):
            messages.append(f"value out of range for '{location}': {item['msg']}")
        elif kind == "finite_number":
            messages.append(f"'{location}' must be a finite number")
        elif kind == "value_error":
            messages.append(str(item["msg"]).removeprefix("Value error, "))
        else:
            messages.append(f"invalid value for '{location}': {item['msg']}")
    return "; ".join(messages)


def _degrees_to_radians(data: dict[str, Any]) -> dict[str, Any]:
    converted = dict(data)
    for key in ("theta", "xi"):
        if isinstance(converted.get(key), (int, float)):
            converted[key] = math.radians(converted[key])
    angles = converted.get("angles")
    if isinstance(angles, dict):
        converted["angles"] = {
            name: math.radians(value) if isinstance(value, (int, float)) else value
            for name, value in angles.items()
        }
    return converted


def parse_config(text: str, degrees: bool = False, settings: Settings | None = None) -> RunConfig:
    """Parse and validate a JSON run configuration.

    BELLSIM_SEED, when set, replaces the document's seed.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"malformed configuration document: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError("malformed configuration document: expected a JSON object")

    if degrees:
        data = _degrees_to_radians(data)

    settings = settings or get_settings()
    seed_source = "config"
    if settings.seed is not None:
        data["seed"] = settings.seed
        seed_source = "env"

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(_describe(e)) from e

    config._seed_source = seed_source
    return config


def load_config(path: str | Path, degrees: bool = False, settings: Settings | None = None) -> RunConfig:
    """Read a configuration from a file path, or from stdin when path is '-'."""
    if str(path) == "-":
        text = sys.stdin.read()
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"cannot read configuration file {path}: {e}") from e
    return parse_config(text, degrees=degrees, settings=settings)
