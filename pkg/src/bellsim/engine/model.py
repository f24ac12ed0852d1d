"""Response probabilities, hidden-state sampling and event generation.

Randomness only enters through explicitly passed uniforms in [0, 1), so every
function here is pure and can be called from any number of threads.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from ..exceptions import ConfigurationError
from ..models import (
    EXTERNAL_SLOT,
    PAIR_LABELS,
    TWO_PI,
    Angle,
    CustomTable,
    DeltaPair,
    EventRecord,
    GammaMixture,
    PairedSymmetric,
    SettingsPair,
    SettingsQuad,
    SourcePolicy,
    UniformOnCircle,
    XiScheme,
    as_angle,
)

logger = logging.getLogger(__name__)

UNIFORMS_PER_EVENT = 5


def _check_mu(mu: int) -> None:
    if mu not in (1, -1):
        raise ConfigurationError(f"outcome must be +1 or -1, got {mu!r}")


def _wrap(values: np.ndarray) -> np.ndarray:
    wrapped = np.mod(values, TWO_PI)
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


class ResponseModel:
    """P(A=μ|a,λ) = ½[1 + μ cos(a−λ)] and P(B=μ|b,λ) = ½[1 − μ cos(b−λ)].

    The device variables ω_a, ω_b are realized as independent uniforms on
    [0, 1): an outcome is +1 iff ω < P(+1). The μ = −1 probability is taken as
    the complement of the μ = +1 one so the pair always sums to exactly 1.
    """

    @staticmethod
    def plus_a(setting: Angle, lam: Angle) -> float:
        return 0.5 * (1.0 + math.cos((setting - lam).value))

    @staticmethod
    def plus_b(setting: Angle, lam: Angle) -> float:
        return 0.5 * (1.0 - math.cos((setting - lam).value))

    @staticmethod
    def plus_a_array(setting: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return 0.5 * (1.0 + np.cos(_wrap(setting - lam)))

    @staticmethod
    def plus_b_array(setting: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return 0.5 * (1.0 - np.cos(_wrap(setting - lam)))

    @staticmethod
    def mean_a(setting: Angle, lam: Angle) -> float:
        """E[A | a, λ]."""
        return math.cos((setting - lam).value)

    @staticmethod
    def mean_b(setting: Angle, lam: Angle) -> float:
        """E[B | b, λ]."""
        return -math.cos((setting - lam).value)


def response_prob_a(setting: Angle | float, lam: Angle | float, mu: int) -> float:
    """P(A = μ | setting, λ)."""
    _check_mu(mu)
    p_plus = ResponseModel.plus_a(as_angle(setting), as_angle(lam))
    return p_plus if mu == 1 else 1.0 - p_plus


def response_prob_b(setting: Angle | float, lam: Angle | float, mu: int) -> float:
    """P(B = μ | setting, λ)."""
    _check_mu(mu)
    p_plus = ResponseModel.plus_b(as_angle(setting), as_angle(lam))
    return p_plus if mu == 1 else 1.0 - p_plus


def sample_lambda(policy: DeltaPair | UniformOnCircle, u: float) -> Angle:
    """Draw λ from a concrete (ξ-resolved) source.

    The delta pair sends u < ½ to ξ and u ≥ ½ to ξ+π.
    """
    if isinstance(policy, DeltaPair):
        return policy.xi if u < 0.5 else policy.xi.shift_pi()
    if isinstance(policy, UniformOnCircle):
        return Angle(value=TWO_PI * u)
    raise ConfigurationError(
        f"sample_lambda needs a resolved source, got {type(policy).__name__}; draw ξ first"
    )


# --- ξ conditionals ---

def xi_conditional(scheme: XiScheme, gamma: float, pair: SettingsPair) -> list[tuple[int, float]]:
    """Ordered (slot, weight) list used for inverse-CDF selection of ξ."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigurationError(f"gamma must lie in [0, 1], got {gamma}")

    if isinstance(scheme, PairedSymmetric):
        chosen_a, chosen_b = pair.chosen_slots
        other_a, other_b = pair.unchosen_slots
        half_in = 0.5 * gamma
        half_out = 0.5 * (1.0 - gamma)
        return [(chosen_a, half_in), (chosen_b, half_in), (other_a, half_out), (other_b, half_out)]

    if isinstance(scheme, CustomTable):
        row = scheme.weights[pair.k]
        if len(row) != 4 or any(w < 0.0 for w in row) or abs(math.fsum(row) - 1.0) > 1e-12:
            raise ConfigurationError(
                f"ξ weights for pair {PAIR_LABELS[pair.k]} must be 4 non-negative values summing to 1"
            )
        return list(enumerate(row))

    raise ConfigurationError(f"unknown ξ scheme {scheme!r}")


def _index_pair(k: int) -> SettingsPair:
    # the conditionals only look at the indices, never at the angles
    index_a, index_b = divmod(k, 2)
    return SettingsPair(phi_a=0.0, phi_b=0.0, index_a=index_a, index_b=index_b)


def slot_weights(scheme: XiScheme, gamma: float, k: int) -> list[float]:
    """ξ weights of pair k laid out by slot (a, a′, b, b′)."""
    weights = [0.0] * 4
    for slot, weight in xi_conditional(scheme, gamma, _index_pair(k)):
        weights[slot] += weight
    return weights


class XiTable(NamedTuple):
    """Per-pair inverse-CDF tables shared by the scalar and vectorized samplers."""

    slots: np.ndarray  # (4, 4) int, slot at each ordered position
    cumulative: np.ndarray  # (4, 4) float
    fallback: np.ndarray  # (4,) int, last position with positive weight


@lru_cache(maxsize=64)
def xi_table(scheme: XiScheme, gamma: float) -> XiTable:
    slots = np.zeros((4, 4), dtype=np.int64)
    weights = np.zeros((4, 4), dtype=np.float64)
    for k in range(4):
        for position, (slot, weight) in enumerate(xi_conditional(scheme, gamma, _index_pair(k))):
            slots[k, position] = slot
            weights[k, position] = weight
    cumulative = np.cumsum(weights, axis=1)
    fallback = np.array([int(np.flatnonzero(row > 0.0)[-1]) for row in weights], dtype=np.int64)
    return XiTable(slots=slots, cumulative=cumulative, fallback=fallback)


def sample_xi_slot(scheme: XiScheme, gamma: float, pair: SettingsPair, u: float) -> int:
    table = xi_table(scheme, float(gamma))
    position = int(np.count_nonzero(table.cumulative[pair.k] <= u))
    if position == 4:
        position = int(table.fallback[pair.k])
    return int(table.slots[pair.k, position])


def sample_xi(
    scheme: XiScheme, gamma: float, quad: SettingsQuad, pair: SettingsPair, u: float
) -> Angle:
    """Draw ξ from the quadruple, conditional on the chosen settings."""
    return quad.slots()[sample_xi_slot(scheme, gamma, pair, u)]


def sample_outcome(p_plus: float, omega: float) -> int:
    """+1 iff ω < P(+1); the boundary ω = P(+1) goes to −1."""
    return 1 if omega < p_plus else -1


# --- Events ---

def pair_index(u_pair: float) -> int:
    """Uniform pair choice; equivalent to independent ½/½ choices per side."""
    return min(int(u_pair * 4.0), 3)


def generate_event(quad: SettingsQuad, source: SourcePolicy, randoms: Sequence[float]) -> EventRecord:
    """Generate one event from the uniforms (u_pair, u_xi, u_lambda, u_omega_a, u_omega_b).

    A reads only (φ_A, λ, ω_a) and B only (φ_B, λ, ω_b).
    """
    if len(randoms) != UNIFORMS_PER_EVENT:
        raise ConfigurationError(f"generate_event needs {UNIFORMS_PER_EVENT} uniforms, got {len(randoms)}")
    u_pair, u_xi, u_lambda, omega_a, omega_b = randoms

    pair = quad.pair(pair_index(u_pair))

    xi: Angle | None
    if isinstance(source, GammaMixture):
        slot = sample_xi_slot(source.scheme, source.gamma, pair, u_xi)
        xi = quad.slots()[slot]
        resolved: DeltaPair | UniformOnCircle = DeltaPair(xi=xi)
    elif isinstance(source, DeltaPair):
        slot, xi, resolved = EXTERNAL_SLOT, source.xi, source
    else:
        slot, xi, resolved = EXTERNAL_SLOT, None, source

    lam = sample_lambda(resolved, u_lambda)
    branch = None if xi is None else (0 if u_lambda < 0.5 else 1)

    outcome_a = sample_outcome(ResponseModel.plus_a(pair.phi_a, lam), omega_a)
    outcome_b = sample_outcome(ResponseModel.plus_b(pair.phi_b, lam), omega_b)

    return EventRecord(
        pair=pair,
        xi=xi,
        xi_slot=slot,
        lambda_=lam,
        lambda_branch=branch,
        outcome_a=outcome_a,
        outcome_b=outcome_b,
    )


class EventBlock(NamedTuple):
    """Column arrays for a block of events; outcome columns hold ±1."""

    pair: np.ndarray
    xi_slot: np.ndarray
    lambda_branch: np.ndarray
    outcome_a: np.ndarray
    outcome_b: np.ndarray


def generate_events(quad: SettingsQuad, source: SourcePolicy, uniforms: np.ndarray) -> EventBlock:
    """Vectorized generate_event over an (m, 5) array of uniforms."""
    uniforms = np.asarray(uniforms, dtype=np.float64)
    if uniforms.ndim != 2 or uniforms.shape[1] != UNIFORMS_PER_EVENT:
        raise ConfigurationError(f"expected an (m, {UNIFORMS_PER_EVENT}) array of uniforms")
    u_pair, u_xi, u_lambda, omega_a, omega_b = uniforms.T
    m = uniforms.shape[0]

    k = np.minimum((u_pair * 4.0).astype(np.int64), 3)
    index_a, index_b = np.divmod(k, 2)
    slot_values = np.array([angle.value for angle in quad.slots()])
    phi_a = np.where(index_a == 0, slot_values[0], slot_values[1])
    phi_b = np.where(index_b == 0, slot_values[2], slot_values[3])

    if isinstance(source, UniformOnCircle):
        slots = np.full(m, EXTERNAL_SLOT, dtype=np.int64)
        branch = np.zeros(m, dtype=np.int64)
        lam = _wrap(TWO_PI * u_lambda)
    else:
        if isinstance(source, GammaMixture):
            table = xi_table(source.scheme, source.gamma)
            position = np.count_nonzero(u_xi[:, None] >= table.cumulative[k], axis=1)
            position = np.where(position == 4, table.fallback[k], position)
            slots = table.slots[k, position]
            xi = slot_values[slots]
        else:
            slots = np.full(m, EXTERNAL_SLOT, dtype=np.int64)
            xi = np.full(m, source.xi.value)
        branch = (u_lambda >= 0.5).astype(np.int64)
        lam = np.where(branch == 0, xi, _wrap(xi + math.pi))

    outcome_a = np.where(omega_a < ResponseModel.plus_a_array(phi_a, lam), 1, -1)
    outcome_b = np.where(omega_b < ResponseModel.plus_b_array(phi_b, lam), 1, -1)

    return EventBlock(
        pair=k,
        xi_slot=slots.astype(np.int64),
        lambda_branch=branch,
        outcome_a=outcome_a.astype(np.int64),
        outcome_b=outcome_b.astype(np.int64),
    )
