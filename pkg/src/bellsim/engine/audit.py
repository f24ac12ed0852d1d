"""No-signaling, factorability and subensemble-selection diagnostics on a tally."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import stats

from ..exceptions import InsufficientDataError
from ..models import (
    EXTERNAL_SLOT,
    N_SLOTS,
    PAIR_LABELS,
    CellTest,
    FactorabilityReport,
    GammaMixture,
    NoSignalingReport,
    PairXiDistribution,
    SideAudit,
    SourcePolicy,
    SubensembleReport,
    ZScore,
)
from .model import slot_weights
from .simulation import Tally, gamma_estimate

logger = logging.getLogger(__name__)

DEFAULT_Z_THRESHOLD = 4.0
DEFAULT_CHI2_ALPHA = 1e-3
DEFAULT_MIN_CELL_COUNT = 20


def two_proportion_z(plus_1: int, n_1: int, plus_2: int, n_2: int) -> float:
    """Pooled two-proportion z statistic for P(+1) in two samples."""
    pooled = (plus_1 + plus_2) / (n_1 + n_2)
    variance = pooled * (1.0 - pooled) * (1.0 / n_1 + 1.0 / n_2)
    if variance == 0.0:
        return 0.0
    return (plus_1 / n_1 - plus_2 / n_2) / math.sqrt(variance)


def _zero_mean_z(plus: int, n: int) -> float:
    # P(+1) against ½, i.e. the ±1 mean against 0
    return (2.0 * plus / n - 1.0) * math.sqrt(n)


def _side_audit(
    side: str, plus: np.ndarray, n: np.ndarray, groups: list[tuple[str, int, int]], threshold: float
) -> SideAudit:
    scores: list[ZScore] = []
    for setting, k_1, k_2 in groups:
        mean_1 = 2.0 * plus[k_1] / n[k_1] - 1.0
        mean_2 = 2.0 * plus[k_2] / n[k_2] - 1.0
        scores.append(
            ZScore(
                label=f"<{side}> {setting}: {PAIR_LABELS[k_1]} vs {PAIR_LABELS[k_2]}",
                estimate=mean_1 - mean_2,
                z=two_proportion_z(int(plus[k_1]), int(n[k_1]), int(plus[k_2]), int(n[k_2])),
            )
        )
        for k, mean in ((k_1, mean_1), (k_2, mean_2)):
            scores.append(
                ZScore(
                    label=f"<{side}> at {PAIR_LABELS[k]}",
                    estimate=mean,
                    z=_zero_mean_z(int(plus[k]), int(n[k])),
                )
            )
    max_abs_z = max(abs(score.z) for score in scores)
    return SideAudit(side=side, scores=scores, max_abs_z=max_abs_z, passed=max_abs_z < threshold)


def no_signaling_audit(tally: Tally, z_threshold: float = DEFAULT_Z_THRESHOLD) -> NoSignalingReport:
    """Singles on each side must not depend on the remote setting and must vanish."""
    counts = tally.pair_counts
    n = counts.sum(axis=(1, 2))
    for k, label in enumerate(PAIR_LABELS):
        if n[k] == 0:
            raise InsufficientDataError(label)

    plus_a = counts[:, 0, :].sum(axis=1)
    plus_b = counts[:, :, 0].sum(axis=1)

    # A at a fixed local setting, split by the remote B setting, and vice versa
    side_a = _side_audit("A", plus_a, n, [("a", 0, 1), ("a'", 2, 3)], z_threshold)
    side_b = _side_audit("B", plus_b, n, [("b", 0, 2), ("b'", 1, 3)], z_threshold)

    report = NoSignalingReport(
        threshold=z_threshold, sides=[side_a, side_b], passed=side_a.passed and side_b.passed
    )
    logger.info(
        f"No-signaling audit: max |z| A={side_a.max_abs_z:.3f}, B={side_b.max_abs_z:.3f}, "
        f"passed={report.passed}"
    )
    return report


def factorability_audit(
    tally: Tally,
    alpha: float = DEFAULT_CHI2_ALPHA,
    min_count: int = DEFAULT_MIN_CELL_COUNT,
) -> FactorabilityReport:
    """Chi-square independence of A and B within each (pair, ξ, λ) cell.

    Bonferroni-corrected over the tested cells. Cells with a zero margin are
    trivially independent and are skipped, as are cells below min_count.
    """
    if not tally.lambda_resolved:
        return FactorabilityReport(
            applicable=False, alpha=alpha, tested=0, cells=[], rejected=[], passed=True
        )

    cells: list[CellTest] = []
    for k in range(4):
        for slot in range(N_SLOTS):
            for branch in range(2):
                table = tally.cells[k, slot, branch]
                n = int(table.sum())
                if n == 0:
                    continue
                cell = CellTest(pair=PAIR_LABELS[k], xi_slot=slot, lambda_branch=branch, n=n)
                if n < min_count:
                    cell.skipped = "below minimum count"
                elif (table.sum(axis=0) == 0).any() or (table.sum(axis=1) == 0).any():
                    cell.skipped = "degenerate margin"
                else:
                    chi2, p_value, _, _ = stats.chi2_contingency(table, correction=False)
                    cell.chi2 = float(chi2)
                    cell.p_value = float(p_value)
                cells.append(cell)

    tested = [cell for cell in cells if cell.p_value is not None]
    level = alpha / len(tested) if tested else alpha
    rejected = [cell for cell in tested if cell.p_value is not None and cell.p_value < level]

    logger.info(
        f"Factorability audit: {len(tested)} cells tested, {len(cells) - len(tested)} skipped, "
        f"{len(rejected)} rejected"
    )
    return FactorabilityReport(
        applicable=True,
        alpha=alpha,
        tested=len(tested),
        cells=cells,
        rejected=rejected,
        passed=not rejected,
    )


def _frequency_z(freq: float, weight: float, n: int) -> float:
    if weight <= 0.0 or weight >= 1.0:
        return 0.0 if freq == weight else math.inf
    return (freq - weight) / math.sqrt(weight * (1.0 - weight) / n)


def subensemble_report(tally: Tally, source: SourcePolicy | None = None) -> SubensembleReport:
    """The ξ distribution each CHSH term is effectively evaluated on."""
    xi = tally.xi_counts
    pairs: list[PairXiDistribution] = []
    for k, label in enumerate(PAIR_LABELS):
        n = int(xi[k].sum())
        freqs = [float(c) / n if n else 0.0 for c in xi[k, :EXTERNAL_SLOT]]
        external = float(xi[k, EXTERNAL_SLOT]) / n if n else 0.0
        entry = PairXiDistribution(label=label, n=n, frequencies=freqs, external=external)
        if isinstance(source, GammaMixture) and n:
            expected = slot_weights(source.scheme, source.gamma, k)
            entry.expected = expected
            entry.max_abs_z = max(
                abs(_frequency_z(f, w, n)) for f, w in zip(freqs, expected, strict=True)
            )
        pairs.append(entry)

    in_quad = xi[:, :EXTERNAL_SLOT].sum(axis=0)
    total = int(in_quad.sum())
    marginal = [float(c) / total if total else 0.0 for c in in_quad]
    gamma_hat, gamma_se = gamma_estimate(tally)

    return SubensembleReport(pairs=pairs, marginal=marginal, gamma_hat=gamma_hat, gamma_se=gamma_se)
