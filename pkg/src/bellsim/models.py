"""Pydantic models for bellsim domain types, estimates and reports."""

from __future__ import annotations

import math
from collections.abc import Iterator
from typing import Annotated, Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TWO_PI = 2.0 * math.pi

# CHSH order of the four settings pairs: k = 2 * index_a + index_b
PAIR_LABELS = ("a,b", "a,b'", "a',b", "a',b'")
CHSH_SIGNS = (1, 1, 1, -1)

# xi slots follow the quadruple order; slot 4 is a xi that was not drawn from it
SLOT_LABELS = ("a", "a'", "b", "b'")
EXTERNAL_SLOT = 4
N_SLOTS = 5


def normalize_radians(value: float) -> float:
    """Map any real to [0, 2π)."""
    wrapped = float(value) % TWO_PI
    # x % 2π can round up to 2π for tiny negative x
    if wrapped >= TWO_PI:
        return 0.0
    return wrapped


# --- Angles and settings ---

class Angle(BaseModel):
    """Orientation in radians, always stored in [0, 2π)."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(description="Orientation in radians, normalized to [0, 2π)")

    @model_validator(mode="before")
    @classmethod
    def _accept_number(cls, data: Any) -> Any:
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            return {"value": data}
        return data

    @field_validator("value")
    @classmethod
    def _normalize(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("angle must be a finite number of radians")
        return normalize_radians(v)

    @classmethod
    def of(cls, radians: float) -> Angle:
        return cls(value=radians)

    @classmethod
    def from_degrees(cls, degrees: float) -> Angle:
        return cls(value=math.radians(degrees))

    def __sub__(self, other: Angle) -> Angle:
        return Angle(value=self.value - other.value)

    def __add__(self, other: Angle) -> Angle:
        return Angle(value=self.value + other.value)

    def shift_pi(self) -> Angle:
        return Angle(value=self.value + math.pi)

    def degrees(self) -> float:
        return math.degrees(self.value)

    def __float__(self) -> float:
        return self.value


def as_angle(value: Angle | float) -> Angle:
    """Accept either an Angle or a raw number of radians."""
    if isinstance(value, Angle):
        return value
    return Angle(value=value)


class SettingsPair(BaseModel):
    """The settings chosen for one event: φ_A ∈ {a, a′}, φ_B ∈ {b, b′}."""

    model_config = ConfigDict(frozen=True)

    phi_a: Angle = Field(description="Chosen A-side setting")
    phi_b: Angle = Field(description="Chosen B-side setting")
    index_a: Literal[0, 1] = Field(description="0 for a, 1 for a′")
    index_b: Literal[0, 1] = Field(description="0 for b, 1 for b′")

    @property
    def k(self) -> int:
        """Position of the pair in CHSH order."""
        return 2 * self.index_a + self.index_b

    @property
    def label(self) -> str:
        return PAIR_LABELS[self.k]

    @property
    def chosen_slots(self) -> tuple[int, int]:
        return self.index_a, 2 + self.index_b

    @property
    def unchosen_slots(self) -> tuple[int, int]:
        return 1 - self.index_a, 2 + (1 - self.index_b)


class SettingsQuad(BaseModel):
    """The four CHSH analyzer orientations (a, a′, b, b′)."""

    model_config = ConfigDict(frozen=True)

    a: Angle
    a_prime: Angle
    b: Angle
    b_prime: Angle

    @classmethod
    def from_theta(cls, theta: float) -> SettingsQuad:
        """The one-parameter family a=2θ, a′=0, b=θ, b′=3θ."""
        return cls(a=2.0 * theta, a_prime=0.0, b=theta, b_prime=3.0 * theta)

    def slots(self) -> tuple[Angle, Angle, Angle, Angle]:
        return self.a, self.a_prime, self.b, self.b_prime

    def pair(self, k: int) -> SettingsPair:
        index_a, index_b = divmod(k, 2)
        return SettingsPair(
            phi_a=self.a if index_a == 0 else self.a_prime,
            phi_b=self.b if index_b == 0 else self.b_prime,
            index_a=index_a,
            index_b=index_b,
        )

    def pairs(self) -> Iterator[SettingsPair]:
        for k in range(4):
            yield self.pair(k)

    def pair_for(self, phi_a: Angle, phi_b: Angle) -> SettingsPair | None:
        """Resolve chosen angles to a pair; the unprimed slot wins on ties."""
        if phi_a == self.a:
            index_a = 0
        elif phi_a == self.a_prime:
            index_a = 1
        else:
            return None
        if phi_b == self.b:
            index_b = 0
        elif phi_b == self.b_prime:
            index_b = 1
        else:
            return None
        return self.pair(2 * index_a + index_b)


# --- Source policies ---

class PairedSymmetric(BaseModel):
    """Γ/2 on each chosen setting, (1−Γ)/2 on each unchosen one."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["paired_symmetric"] = "paired_symmetric"


class CustomTable(BaseModel):
    """Explicit ξ conditional: weights[pair k][slot] over slots (a, a′, b, b′)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["custom_table"] = "custom_table"
    weights: tuple[tuple[float, float, float, float], ...] = Field(
        description="Per settings pair (CHSH order), the four ξ-slot weights"
    )

    @field_validator("weights")
    @classmethod
    def _check_rows(cls, rows: tuple[tuple[float, ...], ...]) -> tuple[tuple[float, ...], ...]:
        if len(rows) != 4:
            raise ValueError("custom table needs one row per settings pair (4 rows)")
        for k, row in enumerate(rows):
            if any(w < 0.0 for w in row):
                raise ValueError(f"negative ξ weight for pair {PAIR_LABELS[k]}")
            if abs(math.fsum(row) - 1.0) > 1e-12:
                raise ValueError(f"ξ weights for pair {PAIR_LABELS[k]} do not sum to 1")
        return rows


XiScheme = Annotated[PairedSymmetric | CustomTable, Field(discriminator="kind")]


class DeltaPair(BaseModel):
    """ρ_λ = ½[δ(λ−ξ) + δ(λ−ξ+π)] at a fixed ξ."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["delta_pair"] = "delta_pair"
    xi: Angle


class UniformOnCircle(BaseModel):
    """Settings-independent uniform ρ_λ on [0, 2π)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform"] = "uniform"


class GammaMixture(BaseModel):
    """Delta-pair source whose ξ is drawn per event, correlated with the settings."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["gamma_mixture"] = "gamma_mixture"
    gamma: float = Field(ge=0.0, le=1.0, description="Probability that ξ is a chosen setting")
    scheme: XiScheme = Field(default_factory=PairedSymmetric)


SourcePolicy = Annotated[DeltaPair | UniformOnCircle | GammaMixture, Field(discriminator="kind")]


class EventRecord(BaseModel):
    """One realization of (settings, ξ, λ, A, B)."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    pair: SettingsPair
    xi: Angle | None = Field(description="Source orientation; None for the uniform source")
    xi_slot: int = Field(ge=0, le=EXTERNAL_SLOT, description="Quadruple slot of ξ, 4 if external")
    lambda_: Angle = Field(alias="lambda")
    lambda_branch: Literal[0, 1] | None = Field(
        default=None, description="0 for λ=ξ, 1 for λ=ξ+π; None for the uniform source"
    )
    outcome_a: Literal[1, -1]
    outcome_b: Literal[1, -1]


# --- Analytic outputs ---

class BetaPoint(BaseModel):
    """One (θ, Γ) point of the a=2θ, a′=0, b=θ, b′=3θ family."""

    theta: float = Field(description="Grid value of θ in radians, not wrapped")
    gamma: float
    beta_q: float
    beta_mixture: float
    beta_printed: float
    beta_uniform: float


# --- Simulation inputs and outputs ---

class RngStreamSpec(BaseModel):
    """(seed, stream_id) fully determines the uniform sequence."""

    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, lt=2**64)
    stream_id: int = Field(default=0, ge=0, lt=2**64)


class PairEstimate(BaseModel):
    """Estimates for one settings pair."""

    label: str
    n: int
    corr_hat: float
    corr_se: float
    marg_a_hat: float
    marg_a_se: float
    marg_b_hat: float
    marg_b_se: float


class Estimates(BaseModel):
    """Experimenter-side estimates derived from a tally."""

    pairs: list[PairEstimate]
    beta_hat: float
    beta_se: float = Field(ge=0.0)
    gamma_hat: float | None = Field(
        default=None, description="Fraction of events whose ξ is a chosen setting"
    )
    gamma_se: float | None = None


class ZScore(BaseModel):
    """One test statistic of an audit."""

    label: str
    estimate: float
    z: float


class SideAudit(BaseModel):
    """No-signaling checks for one side."""

    side: Literal["A", "B"]
    scores: list[ZScore]
    max_abs_z: float
    passed: bool


class NoSignalingReport(BaseModel):
    """Singles must not depend on the remote setting, and must vanish."""

    threshold: float
    sides: list[SideAudit]
    passed: bool


class CellTest(BaseModel):
    """Chi-square independence test of A and B inside one (pair, ξ, λ) cell."""

    pair: str
    xi_slot: int
    lambda_branch: int
    n: int
    chi2: float | None = None
    p_value: float | None = None
    skipped: str | None = Field(default=None, description="Reason the cell was not tested")


class FactorabilityReport(BaseModel):
    """Within-cell independence of A and B after Bonferroni correction."""

    applicable: bool
    alpha: float
    tested: int
    cells: list[CellTest]
    rejected: list[CellTest]
    passed: bool


class PairXiDistribution(BaseModel):
    """Empirical ξ distribution for one settings pair."""

    label: str
    n: int
    frequencies: list[float] = Field(description="Over slots (a, a′, b, b′)")
    external: float = Field(description="Fraction of events whose ξ was not a quadruple slot")
    expected: list[float] | None = None
    max_abs_z: float | None = None


class SubensembleReport(BaseModel):
    """Per-pair ξ distributions: the subensemble each CHSH term is measured on."""

    pairs: list[PairXiDistribution]
    marginal: list[float]
    gamma_hat: float | None
    gamma_se: float | None
