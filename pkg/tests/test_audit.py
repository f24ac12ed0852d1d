"""Tests for the no-signaling, factorability and subensemble diagnostics."""

import numpy as np
import pytest

from bellsim.engine import audit, simulation
from bellsim.engine.simulation import CELL_SHAPE, Tally
from bellsim.exceptions import InsufficientDataError
from bellsim.models import DeltaPair, GammaMixture, SettingsQuad, UniformOnCircle


@pytest.fixture(scope="module")
def mixture_run():
    quad = SettingsQuad.from_theta(5 * np.pi / 4)
    source = GammaMixture(gamma=0.8)
    tally, _ = simulation.simulate_point(quad, source, 400_000, seed=2718)
    return tally, source


def _balanced_cells():
    cells = np.zeros(CELL_SHAPE, dtype=np.int64)
    cells[:, 0, 0] = [[250, 250], [250, 250]]
    return cells


# --- No-signaling ---

def test_two_proportion_z():
    assert audit.two_proportion_z(50, 100, 50, 100) == 0.0
    assert audit.two_proportion_z(100, 100, 100, 100) == 0.0
    assert audit.two_proportion_z(80, 100, 20, 100) > 8.0


def test_simulated_mixture_passes_no_signaling(mixture_run):
    tally, _ = mixture_run
    report = audit.no_signaling_audit(tally)
    assert report.passed
    assert [side.side for side in report.sides] == ["A", "B"]
    # two remote comparisons and four zero-mean checks per side
    assert all(len(side.scores) == 6 for side in report.sides)


def test_planted_signaling_fails():
    cells = _balanced_cells()
    # A at setting a is always +1 when B measures b, balanced when B measures b'
    cells[0, 0, 0] = [[500, 0], [0, 0]]
    report = audit.no_signaling_audit(Tally(cells=cells))
    assert not report.passed
    assert not report.sides[0].passed
    assert report.sides[0].max_abs_z > 4.0


def test_threshold_is_configurable():
    cells = _balanced_cells()
    cells[0, 0, 0] = [[140, 125], [110, 125]]
    tally = Tally(cells=cells)
    assert audit.no_signaling_audit(tally, z_threshold=4.0).passed
    assert not audit.no_signaling_audit(tally, z_threshold=1.0).passed


def test_no_signaling_needs_every_pair():
    with pytest.raises(InsufficientDataError):
        audit.no_signaling_audit(Tally.zero())


# --- Factorability ---

def test_simulated_mixture_factorizes(mixture_run):
    tally, _ = mixture_run
    report = audit.factorability_audit(tally)
    assert report.applicable
    assert report.tested > 0
    assert report.passed


def test_planted_dependence_is_rejected():
    cells = np.zeros(CELL_SHAPE, dtype=np.int64)
    # A = B forced inside one λ cell
    cells[0, 0, 0] = [[200, 0], [0, 200]]
    report = audit.factorability_audit(Tally(cells=cells))
    assert report.tested == 1
    assert not report.passed
    assert report.rejected[0].pair == "a,b"


def test_degenerate_and_small_cells_are_skipped():
    cells = np.zeros(CELL_SHAPE, dtype=np.int64)
    cells[0, 0, 0] = [[60, 0], [60, 0]]
    cells[1, 1, 1] = [[2, 1], [1, 2]]
    report = audit.factorability_audit(Tally(cells=cells), min_count=20)
    reasons = sorted(cell.skipped for cell in report.cells)
    assert reasons == ["below minimum count", "degenerate margin"]
    assert report.tested == 0
    assert report.passed


def test_factorability_not_applicable_to_uniform_source(tsirelson_quad):
    tally, _ = simulation.simulate_point(tsirelson_quad, UniformOnCircle(), 2000, seed=1)
    report = audit.factorability_audit(tally)
    assert not report.applicable
    assert report.passed


# --- Subensembles ---

def test_subensemble_masses_match_configured_weights(mixture_run):
    tally, source = mixture_run
    report = audit.subensemble_report(tally, source)
    assert report.gamma_hat is not None and report.gamma_se is not None
    assert abs(report.gamma_hat - 0.8) <= 4 * report.gamma_se
    for entry in report.pairs:
        assert entry.external == 0.0
        assert entry.max_abs_z is not None and entry.max_abs_z < 4.0
        assert sum(entry.frequencies) == pytest.approx(1.0)
    # settings-correlated subensembles, but a balanced marginal over the quadruple
    assert report.marginal == pytest.approx([0.25] * 4, abs=0.01)


def test_full_correlation_subensembles(tsirelson_quad):
    tally, _ = simulation.simulate_point(tsirelson_quad, GammaMixture(gamma=1.0), 4000, seed=6)
    report = audit.subensemble_report(tally)
    assert report.gamma_hat == 1.0
    ab = report.pairs[0]
    assert ab.frequencies[1] == 0.0 and ab.frequencies[3] == 0.0
    assert ab.expected is None


def test_fixed_xi_has_no_gamma_estimate(tsirelson_quad):
    tally, _ = simulation.simulate_point(tsirelson_quad, DeltaPair(xi=0.2), 2000, seed=6)
    report = audit.subensemble_report(tally, DeltaPair(xi=0.2))
    assert report.gamma_hat is None
    assert all(entry.external == 1.0 for entry in report.pairs)
