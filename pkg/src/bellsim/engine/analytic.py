"""Closed-form correlations, marginals and CHSH values of the source model."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from ..exceptions import ConfigurationError
from ..models import (
    CHSH_SIGNS,
    Angle,
    BetaPoint,
    DeltaPair,
    GammaMixture,
    PairedSymmetric,
    SettingsPair,
    SettingsQuad,
    SourcePolicy,
    UniformOnCircle,
    XiScheme,
    as_angle,
)
from .model import ResponseModel, response_prob_a, response_prob_b, xi_conditional

logger = logging.getLogger(__name__)

CorrelationFn = Callable[[Angle, Angle], float]

LOCAL_BOUND = 2.0
TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)


def _cos(x: Angle, y: Angle) -> float:
    return math.cos((x - y).value)


def _sin(x: Angle, y: Angle) -> float:
    return math.sin((x - y).value)


# --- Correlations at fixed ξ ---

def corr_fixed_xi(a: Angle | float, b: Angle | float, xi: Angle | float) -> float:
    """E(a,b) for the delta-pair source at ξ: −cos(a−ξ)·cos(b−ξ)."""
    a, b, xi = as_angle(a), as_angle(b), as_angle(xi)
    return -_cos(a, xi) * _cos(b, xi)


def corr_fixed_xi_expanded(a: Angle | float, b: Angle | float, xi: Angle | float) -> float:
    """Same correlation written as −cos(a−b) + sin(a−ξ)·sin(b−ξ)."""
    a, b, xi = as_angle(a), as_angle(b), as_angle(xi)
    return -_cos(a, b) + _sin(a, xi) * _sin(b, xi)


def corr_via_ch_expansion(a: Angle | float, b: Angle | float, xi: Angle | float) -> float:
    """Four-term expansion over factorized outcome probabilities, averaged over λ ∈ {ξ, ξ+π}."""
    a, b, xi = as_angle(a), as_angle(b), as_angle(xi)
    total = 0.0
    for lam in (xi, xi.shift_pi()):
        a_plus, a_minus = response_prob_a(a, lam, 1), response_prob_a(a, lam, -1)
        b_plus, b_minus = response_prob_b(b, lam, 1), response_prob_b(b, lam, -1)
        total += 0.5 * (
            a_plus * b_plus + a_minus * b_minus - a_plus * b_minus - a_minus * b_plus
        )
    return total


def corr_uniform(a: Angle | float, b: Angle | float) -> float:
    """E(a,b) for a uniform ρ_λ: −½cos(a−b)."""
    return -0.5 * _cos(as_angle(a), as_angle(b))


# --- Marginals ---

def _delta_pair_single(mean_at_xi: float) -> float:
    # single-side means are odd under λ → λ+π, so the pair cancels exactly
    return 0.5 * (mean_at_xi + (-mean_at_xi))


def _marginal(
    setting: Angle,
    source: SourcePolicy,
    mean: Callable[[Angle, Angle], float],
    quad: SettingsQuad | None,
    pair: SettingsPair | None,
) -> float:
    if isinstance(source, UniformOnCircle):
        return 0.0
    if isinstance(source, DeltaPair):
        return _delta_pair_single(mean(setting, source.xi))
    if quad is None or pair is None:
        raise ConfigurationError("a gamma-mixture marginal needs the quadruple and the chosen pair")
    slots = quad.slots()
    return sum(
        weight * _delta_pair_single(mean(setting, slots[slot]))
        for slot, weight in xi_conditional(source.scheme, source.gamma, pair)
    )


def marginal_a(
    a: Angle | float,
    source: SourcePolicy,
    quad: SettingsQuad | None = None,
    pair: SettingsPair | None = None,
) -> float:
    """E[A] under the source."""
    return _marginal(as_angle(a), source, ResponseModel.mean_a, quad, pair)


def marginal_b(
    b: Angle | float,
    source: SourcePolicy,
    quad: SettingsQuad | None = None,
    pair: SettingsPair | None = None,
) -> float:
    """E[B] under the source."""
    return _marginal(as_angle(b), source, ResponseModel.mean_b, quad, pair)


# --- Γ mixtures ---

def pair_correlation(
    quad: SettingsQuad, pair: SettingsPair, gamma: float, scheme: XiScheme | None = None
) -> float:
    """Σ_ξ w(ξ | pair)·E(φ_A, φ_B; ξ) with the scheme's conditional weights."""
    scheme = scheme or PairedSymmetric()
    slots = quad.slots()
    return sum(
        weight * corr_fixed_xi(pair.phi_a, pair.phi_b, slots[slot])
        for slot, weight in xi_conditional(scheme, gamma, pair)
    )


def corr_gamma_mixture(
    a_chosen: Angle | float,
    b_chosen: Angle | float,
    quad: SettingsQuad,
    gamma: float,
    scheme: XiScheme | None = None,
) -> float:
    """Mixture correlation for the chosen settings, averaged over all events."""
    pair = quad.pair_for(as_angle(a_chosen), as_angle(b_chosen))
    if pair is None:
        raise ConfigurationError("chosen settings are not entries of the quadruple")
    return pair_correlation(quad, pair, gamma, scheme)


def corr_for_source(
    a: Angle | float,
    b: Angle | float,
    source: SourcePolicy,
    quad: SettingsQuad | None = None,
    pair: SettingsPair | None = None,
) -> float:
    """Correlation of any source policy."""
    if isinstance(source, UniformOnCircle):
        return corr_uniform(a, b)
    if isinstance(source, DeltaPair):
        return corr_fixed_xi(a, b, source.xi)
    if quad is None:
        raise ConfigurationError("a gamma-mixture correlation needs the quadruple")
    if pair is None:
        return corr_gamma_mixture(a, b, quad, source.gamma, source.scheme)
    return pair_correlation(quad, pair, source.gamma, source.scheme)


# --- CHSH ---

def chsh(correlation: CorrelationFn, quad: SettingsQuad) -> float:
    """E(a,b) + E(a,b′) + E(a′,b) − E(a′,b′)."""
    return (
        correlation(quad.a, quad.b)
        + correlation(quad.a, quad.b_prime)
        + correlation(quad.a_prime, quad.b)
        - correlation(quad.a_prime, quad.b_prime)
    )


def beta_q(quad: SettingsQuad) -> float:
    """Singlet prediction −cos(a−b) − cos(a−b′) − cos(a′−b) + cos(a′−b′)."""
    return chsh(lambda x, y: -_cos(x, y), quad)


def beta_uniform(quad: SettingsQuad) -> float:
    return chsh(corr_uniform, quad)


def beta_mixture(quad: SettingsQuad, gamma: float, scheme: XiScheme | None = None) -> float:
    """CHSH of the mixture, each term using the ξ conditional of its own pair."""
    return sum(
        sign * pair_correlation(quad, pair, gamma, scheme)
        for sign, pair in zip(CHSH_SIGNS, quad.pairs(), strict=True)
    )


def beta_printed(quad: SettingsQuad, gamma: float) -> float:
    """The published closed form with its four-sine correction bracket.

    Agrees with beta_mixture only at Γ = 1; kept for comparison.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ConfigurationError(f"gamma must lie in [0, 1], got {gamma}")
    a, a_p, b, b_p = quad.a, quad.a_prime, quad.b, quad.b_prime
    bracket = (
        _sin(a, b_p) * _sin(b, b_p)
        + _sin(a, b) * _sin(b_p, b)
        + _sin(a_p, b_p) * _sin(b, b_p)
        - _sin(a_p, b) * _sin(b_p, b)
    )
    return beta_q(quad) + 0.5 * (1.0 - gamma) * bracket


def beta_for_source(quad: SettingsQuad, source: SourcePolicy) -> float:
    if isinstance(source, GammaMixture):
        return beta_mixture(quad, source.gamma, source.scheme)
    return chsh(lambda x, y: corr_for_source(x, y, source), quad)


def violates_local_bound(value: float, tol: float = 1e-9) -> bool:
    return abs(value) > LOCAL_BOUND + tol


# --- Sweeps ---

def beta_point(theta: float, gamma: float, scheme: XiScheme | None = None) -> BetaPoint:
    quad = SettingsQuad.from_theta(theta)
    return BetaPoint(
        theta=theta,
        gamma=gamma,
        beta_q=beta_q(quad),
        beta_mixture=beta_mixture(quad, gamma, scheme),
        beta_printed=beta_printed(quad, gamma),
        beta_uniform=beta_uniform(quad),
    )


def theta_grid(theta_min: float, theta_max: float, steps: int) -> np.ndarray:
    """Inclusive uniform grid; both endpoints are emitted exactly."""
    if steps < 2:
        raise ConfigurationError(f"steps must be at least 2, got {steps}")
    if not (math.isfinite(theta_min) and math.isfinite(theta_max)) or theta_max <= theta_min:
        raise ConfigurationError(f"invalid theta range [{theta_min}, {theta_max}]")
    return np.linspace(theta_min, theta_max, steps)


def sweep_fig1(
    theta_min: float,
    theta_max: float,
    steps: int,
    gammas: Sequence[float],
    scheme: XiScheme | None = None,
) -> list[BetaPoint]:
    """β curves on the a=2θ, a′=0, b=θ, b′=3θ family; θ outer, Γ inner."""
    if not gammas:
        raise ConfigurationError("at least one gamma is required")
    for gamma in gammas:
        if not 0.0 <= gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {gamma}")

    grid = theta_grid(theta_min, theta_max, steps)
    logger.debug(f"Sweeping {steps} theta values x {len(gammas)} gammas")
    return [beta_point(float(theta), float(gamma), scheme) for theta in grid for gamma in gammas]
