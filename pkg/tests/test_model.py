"""Tests for angles, the response model, hidden-state sampling and event generation."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from bellsim.engine import model
from bellsim.engine.simulation import Tally
from bellsim.exceptions import ConfigurationError
from bellsim.models import (
    EXTERNAL_SLOT,
    TWO_PI,
    Angle,
    CustomTable,
    DeltaPair,
    EventRecord,
    GammaMixture,
    PairedSymmetric,
    SettingsQuad,
    UniformOnCircle,
)

radians = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False)
unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True)
gammas = st.floats(min_value=0.0, max_value=1.0)


@pytest.fixture
def distinct_quad():
    return SettingsQuad(a=0.1, a_prime=1.3, b=2.2, b_prime=4.0)


# --- Angle ---

@given(radians)
def test_angle_is_normalized(value):
    """Every angle lands in [0, 2π) and keeps its orientation."""
    angle = Angle(value=value)
    assert 0.0 <= angle.value < TWO_PI
    assert math.cos(angle.value) == pytest.approx(math.cos(value), abs=1e-9)


def test_angle_tiny_negative_wraps_to_zero():
    assert Angle(value=-1e-20).value == 0.0


def test_angle_rejects_non_finite():
    with pytest.raises(ValidationError):
        Angle(value=float("inf"))


def test_angle_arithmetic():
    assert (Angle.of(0.5) - Angle.of(1.0)).value == pytest.approx(TWO_PI - 0.5)
    assert Angle.of(1.0).shift_pi().value == pytest.approx(1.0 + math.pi)
    assert Angle.from_degrees(225).value == pytest.approx(5 * math.pi / 4)


def test_settings_quad_from_theta():
    quad = SettingsQuad.from_theta(5 * math.pi / 4)
    assert quad.a.value == pytest.approx(math.pi / 2)
    assert quad.a_prime.value == 0.0
    assert quad.b.value == pytest.approx(5 * math.pi / 4)
    assert quad.b_prime.value == pytest.approx(7 * math.pi / 4)


def test_pairs_follow_chsh_order(distinct_quad):
    labels = [pair.label for pair in distinct_quad.pairs()]
    assert labels == ["a,b", "a,b'", "a',b", "a',b'"]
    assert distinct_quad.pair(3).phi_a == distinct_quad.a_prime
    assert distinct_quad.pair(3).phi_b == distinct_quad.b_prime


def test_pair_for_prefers_unprimed_on_ties():
    quad = SettingsQuad(a=1.0, a_prime=1.0, b=2.0, b_prime=3.0)
    pair = quad.pair_for(Angle.of(1.0), Angle.of(3.0))
    assert pair is not None
    assert pair.k == 1
    assert quad.pair_for(Angle.of(0.5), Angle.of(3.0)) is None


# --- Response model ---

def test_response_probabilities_at_alignment():
    assert model.response_prob_a(0.0, 0.0, 1) == 1.0
    assert model.response_prob_a(0.0, 0.0, -1) == 0.0
    assert model.response_prob_b(0.0, 0.0, 1) == 0.0
    assert model.response_prob_b(0.0, 0.0, -1) == 1.0


@given(radians, radians)
def test_response_probabilities_are_normalized(setting, lam):
    for prob in (model.response_prob_a, model.response_prob_b):
        plus, minus = prob(setting, lam, 1), prob(setting, lam, -1)
        assert 0.0 <= plus <= 1.0
        assert 0.0 <= minus <= 1.0
        assert plus + minus == pytest.approx(1.0, abs=1e-15)


def test_response_probability_rejects_bad_outcome():
    with pytest.raises(ConfigurationError):
        model.response_prob_a(0.0, 0.0, 0)


# --- λ and ξ sampling ---

def test_sample_lambda_delta_pair():
    source = DeltaPair(xi=0.3)
    assert model.sample_lambda(source, 0.2).value == pytest.approx(0.3)
    assert model.sample_lambda(source, 0.5).value == pytest.approx(0.3 + math.pi)
    assert model.sample_lambda(source, 0.7).value == pytest.approx(0.3 + math.pi)


def test_sample_lambda_uniform():
    assert model.sample_lambda(UniformOnCircle(), 0.25).value == pytest.approx(math.pi / 2)


def test_sample_lambda_needs_resolved_source():
    with pytest.raises(ConfigurationError):
        model.sample_lambda(GammaMixture(gamma=0.5), 0.1)  # type: ignore[arg-type]


def test_paired_symmetric_conditional(distinct_quad):
    pair = distinct_quad.pair(0)
    weights = model.xi_conditional(PairedSymmetric(), 0.8, pair)
    assert weights == [(0, 0.4), (2, 0.4), (1, pytest.approx(0.1)), (3, pytest.approx(0.1))]
    assert model.slot_weights(PairedSymmetric(), 0.8, 3) == [
        pytest.approx(0.1),
        0.4,
        pytest.approx(0.1),
        0.4,
    ]


def test_xi_conditional_rejects_gamma_out_of_range(distinct_quad):
    with pytest.raises(ConfigurationError):
        model.xi_conditional(PairedSymmetric(), 1.2, distinct_quad.pair(0))


def test_sample_xi_inverse_cdf_order(distinct_quad):
    """Chosen A setting first, then chosen B, then the unchosen pair."""
    pair = distinct_quad.pair(0)
    assert model.sample_xi(PairedSymmetric(), 1.0, distinct_quad, pair, 0.4) == distinct_quad.a
    assert model.sample_xi(PairedSymmetric(), 1.0, distinct_quad, pair, 0.6) == distinct_quad.b
    assert model.sample_xi(PairedSymmetric(), 0.0, distinct_quad, pair, 0.1) == distinct_quad.a_prime
    assert model.sample_xi(PairedSymmetric(), 0.0, distinct_quad, pair, 0.9) == distinct_quad.b_prime


@given(unit, st.integers(min_value=0, max_value=3))
def test_full_correlation_never_draws_unchosen(u, k):
    pair = SettingsQuad(a=0.1, a_prime=1.3, b=2.2, b_prime=4.0).pair(k)
    slot = model.sample_xi_slot(PairedSymmetric(), 1.0, pair, u)
    assert slot in pair.chosen_slots


@given(unit, st.integers(min_value=0, max_value=3))
def test_zero_gamma_never_draws_chosen(u, k):
    pair = SettingsQuad(a=0.1, a_prime=1.3, b=2.2, b_prime=4.0).pair(k)
    slot = model.sample_xi_slot(PairedSymmetric(), 0.0, pair, u)
    assert slot in pair.unchosen_slots


def test_custom_table_is_validated():
    with pytest.raises(ValidationError):
        CustomTable(weights=((0.5, 0.5, 0.1, 0.0),) * 4)
    with pytest.raises(ValidationError):
        CustomTable(weights=((1.5, -0.5, 0.0, 0.0),) * 4)
    with pytest.raises(ValidationError):
        CustomTable(weights=((1.0, 0.0, 0.0, 0.0),) * 3)


def test_custom_table_drives_sampling(distinct_quad):
    table = CustomTable(weights=((0.0, 0.0, 0.0, 1.0),) * 4)
    for k in range(4):
        assert model.sample_xi_slot(table, 0.3, distinct_quad.pair(k), 0.0) == 3
        assert model.slot_weights(table, 0.3, k) == [0.0, 0.0, 0.0, 1.0]


# --- Outcomes and events ---

def test_sample_outcome_boundary():
    assert model.sample_outcome(0.5, 0.49) == 1
    assert model.sample_outcome(0.5, 0.5) == -1
    assert model.sample_outcome(1.0, 0.999) == 1
    assert model.sample_outcome(0.0, 0.0) == -1


def test_pair_index_is_uniform_partition():
    assert [model.pair_index(u) for u in (0.0, 0.24, 0.25, 0.6, 0.99)] == [0, 0, 1, 2, 3]


def test_generate_event_full_correlation():
    quad = SettingsQuad(a=0.7, a_prime=2.0, b=0.7, b_prime=3.0)
    event = model.generate_event(quad, GammaMixture(gamma=1.0), (0.1, 0.4, 0.25, 0.0, 0.99))
    assert event.pair.label == "a,b"
    assert event.xi == quad.a
    assert event.xi_slot == 0
    assert event.lambda_ == quad.b
    assert event.lambda_branch == 0
    assert event.outcome_a == 1
    assert event.outcome_b == -1


def test_generate_event_external_sources():
    quad = SettingsQuad(a=0.0, a_prime=1.0, b=2.0, b_prime=3.0)
    fixed = model.generate_event(quad, DeltaPair(xi=0.5), (0.9, 0.0, 0.75, 0.5, 0.5))
    assert fixed.pair.label == "a',b'"
    assert fixed.xi_slot == EXTERNAL_SLOT
    assert fixed.lambda_branch == 1
    assert fixed.lambda_.value == pytest.approx(0.5 + math.pi)

    uniform = model.generate_event(quad, UniformOnCircle(), (0.3, 0.0, 0.5, 0.5, 0.5))
    assert uniform.xi is None
    assert uniform.lambda_branch is None
    assert uniform.lambda_.value == pytest.approx(math.pi)


def test_generate_event_needs_five_uniforms():
    quad = SettingsQuad.from_theta(1.0)
    with pytest.raises(ConfigurationError):
        model.generate_event(quad, UniformOnCircle(), (0.1, 0.2, 0.3))


def test_event_record_uses_lambda_alias():
    quad = SettingsQuad.from_theta(1.0)
    event = model.generate_event(quad, DeltaPair(xi=0.0), (0.0, 0.0, 0.0, 0.0, 0.0))
    dumped = event.model_dump(by_alias=True)
    assert "lambda" in dumped
    assert EventRecord.model_validate(dumped) == event


@pytest.mark.parametrize(
    "source",
    [GammaMixture(gamma=0.8), GammaMixture(gamma=0.0), DeltaPair(xi=1.1), UniformOnCircle()],
    ids=["gamma-0.8", "gamma-0", "fixed-xi", "uniform"],
)
def test_vectorized_events_match_scalar_events(distinct_quad, source):
    uniforms = np.random.default_rng(7).random((300, 5))
    block = model.generate_events(distinct_quad, source, uniforms)
    records = [model.generate_event(distinct_quad, source, tuple(row)) for row in uniforms]

    assert [r.pair.k for r in records] == block.pair.tolist()
    assert [r.xi_slot for r in records] == block.xi_slot.tolist()
    assert [r.outcome_a for r in records] == block.outcome_a.tolist()
    assert [r.outcome_b for r in records] == block.outcome_b.tolist()

    resolved = not isinstance(source, UniformOnCircle)
    assert Tally.from_block(block, lambda_resolved=resolved) == Tally.from_records(records)


def test_generate_events_rejects_bad_shape(distinct_quad):
    with pytest.raises(ConfigurationError):
        model.generate_events(distinct_quad, UniformOnCircle(), np.zeros((3, 4)))


def _flip_pair(uniforms, mask):
    """Same uniforms, with u_pair moved to the pair whose index differs by the given bit mask."""
    replayed = uniforms.copy()
    scaled = 4.0 * uniforms[:, 0]
    k = np.minimum(scaled.astype(np.int64), 3)
    replayed[:, 0] = ((k ^ mask) + (scaled - k)) / 4.0
    return replayed


@pytest.mark.parametrize(
    "source",
    [DeltaPair(xi=1.1), DeltaPair(xi=5.0), UniformOnCircle()],
    ids=["fixed-xi", "fixed-xi-far", "uniform"],
)
def test_outcomes_depend_only_on_the_local_setting(distinct_quad, source):
    uniforms = np.random.default_rng(11).random((5000, 5))
    block = model.generate_events(distinct_quad, source, uniforms)

    flipped_b = model.generate_events(distinct_quad, source, _flip_pair(uniforms, 1))
    assert (flipped_b.pair == block.pair ^ 1).all()
    assert (flipped_b.outcome_a == block.outcome_a).all()
    assert (flipped_b.outcome_b != block.outcome_b).any()

    flipped_a = model.generate_events(distinct_quad, source, _flip_pair(uniforms, 2))
    assert (flipped_a.pair == block.pair ^ 2).all()
    assert (flipped_a.outcome_b == block.outcome_b).all()
    assert (flipped_a.outcome_a != block.outcome_a).any()


pair_indices = st.integers(min_value=0, max_value=3)
offsets = st.floats(min_value=0.0, max_value=0.99)


@given(pair_indices, offsets, unit, unit, unit, unit)
def test_scalar_outcome_ignores_the_remote_setting(k, frac, u_xi, u_lambda, omega_a, omega_b):
    quad = SettingsQuad(a=0.1, a_prime=1.3, b=2.2, b_prime=4.0)
    source = DeltaPair(xi=0.7)

    def replay(pair_index):
        uniforms = ((pair_index + frac) / 4.0, u_xi, u_lambda, omega_a, omega_b)
        return model.generate_event(quad, source, uniforms)

    event = replay(k)
    assert replay(k ^ 1).outcome_a == event.outcome_a
    assert replay(k ^ 2).outcome_b == event.outcome_b
