"""Command handlers behind the bellsim CLI: CSV sweeps, simulations and audits."""

from __future__ import annotations

import csv
import io
import logging
import math
import uuid
from collections.abc import Iterable, Sequence

from pydantic import BaseModel, Field

from .config import RunConfig
from .engine import analytic, audit, simulation
from .models import (
    SLOT_LABELS,
    GammaMixture,
    PairedSymmetric,
    SettingsQuad,
    UniformOnCircle,
)

logger = logging.getLogger("bellsim")

FIG1_THETA_MIN = math.pi
FIG1_THETA_MAX = 2.0 * math.pi
FIG1_GAMMAS = (1.0, 0.8, 0.5)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2


class CommandResult(BaseModel):
    """Rendered command output and the exit code it maps to."""

    output: str = Field(description="Text written to standard output")
    exit_code: int = Field(default=EXIT_OK, description="0 success, 1 configuration, 2 data/audit")


def fmt(value: float) -> str:
    """Full double precision, locale independent."""
    return format(value, ".17g")


def _csv(rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def _run_id() -> str:
    return uuid.uuid4().hex[:8]


def echo_config(config: RunConfig) -> str:
    """The fully resolved configuration as '#' comment lines."""
    quad = config.quad()
    lines = [
        f"# source={config.source}",
        f"# a={fmt(quad.a.value)}",
        f"# a_prime={fmt(quad.a_prime.value)}",
        f"# b={fmt(quad.b.value)}",
        f"# b_prime={fmt(quad.b_prime.value)}",
    ]
    if config.theta is not None:
        lines.append(f"# theta={fmt(config.theta)}")
    if config.gamma is not None:
        lines.append(f"# gamma={fmt(config.gamma)}")
    if config.xi is not None:
        lines.append(f"# xi={fmt(config.xi)}")
    if config.xi_weights is not None:
        lines.append("# xi_scheme=custom_table")
    lines += [
        f"# events={config.events}",
        f"# seed={config.seed}",
        f"# seed_source={config.seed_source}",
        f"# z_threshold={fmt(config.audit.z_threshold)}",
        f"# chi2_alpha={fmt(config.audit.chi2_alpha)}",
    ]
    return "\n".join(lines) + "\n"


# --- Analytic ---

def cmd_analytic_sweep(
    theta_min: float, theta_max: float, steps: int, gammas: Sequence[float]
) -> CommandResult:
    """β curves on the a=2θ, a′=0, b=θ, b′=3θ family as CSV, θ outer and Γ inner."""
    run_id = _run_id()
    logger.info(f"[{run_id}] Analytic sweep over [{theta_min}, {theta_max}], {steps} steps, gammas={list(gammas)}")

    points = analytic.sweep_fig1(theta_min, theta_max, steps, gammas)
    rows: list[Sequence[object]] = [
        ("theta", "gamma", "beta_q", "beta_mixture", "beta_printed", "beta_uniform")
    ]
    rows += [
        (
            fmt(p.theta),
            fmt(p.gamma),
            fmt(p.beta_q),
            fmt(p.beta_mixture),
            fmt(p.beta_printed),
            fmt(p.beta_uniform),
        )
        for p in points
    ]
    logger.info(f"[{run_id}] Emitted {len(points)} rows")
    return CommandResult(output=_csv(rows))


def cmd_beta_report(theta: float, gammas: Sequence[float]) -> CommandResult:
    """Side-by-side mixture and printed closed forms at one θ."""
    lines = [f"theta={fmt(theta)}"]
    quad = SettingsQuad.from_theta(theta)
    lines.append(f"beta_q={fmt(analytic.beta_q(quad))}")
    lines.append(f"beta_uniform={fmt(analytic.beta_uniform(quad))}")
    for gamma in gammas:
        point = analytic.beta_point(theta, gamma)
        flags = []
        if analytic.violates_local_bound(point.beta_mixture):
            flags.append("beta_mixture exceeds 2")
        if analytic.violates_local_bound(point.beta_printed):
            flags.append("beta_printed exceeds 2")
        lines.append(
            f"gamma={fmt(gamma)} beta_mixture={fmt(point.beta_mixture)} "
            f"beta_printed={fmt(point.beta_printed)}"
            + (f" [{'; '.join(flags)}]" if flags else "")
        )
    return CommandResult(output="\n".join(lines) + "\n")


# --- Simulation ---

def cmd_simulate(config: RunConfig, max_workers: int | None = None) -> CommandResult:
    """Run one configured simulation and report counts, correlations and β."""
    run_id = _run_id()
    quad = config.quad()
    source = config.source_policy()
    logger.info(f"[{run_id}] Simulating {config.events} events, source={config.source}")

    tally, estimates = simulation.simulate_point(
        quad,
        source,
        config.events,
        seed=config.seed,
        chunk_size=config.chunk_size,
        max_workers=max_workers,
    )

    rows: list[Sequence[object]] = [("pair", "n", "npp", "npm", "nmp", "nmm", "corr_hat", "corr_se")]
    counts = tally.pair_counts
    for k, pair in enumerate(estimates.pairs):
        npp, npm, nmp, nmm = (int(x) for x in counts[k].ravel())
        rows.append((pair.label, pair.n, npp, npm, nmp, nmm, fmt(pair.corr_hat), fmt(pair.corr_se)))
    rows.append(("beta_hat", "beta_se", "beta_analytic", "gamma_hat"))
    rows.append(
        (
            fmt(estimates.beta_hat),
            fmt(estimates.beta_se),
            fmt(analytic.beta_for_source(quad, source)),
            "" if estimates.gamma_hat is None else fmt(estimates.gamma_hat),
        )
    )
    logger.info(f"[{run_id}] beta_hat={estimates.beta_hat:.6f} +/- {estimates.beta_se:.6f}")
    return CommandResult(output=echo_config(config) + _csv(rows))


def cmd_reproduce_fig1(
    events_per_point: int,
    seed: int,
    steps: int = 41,
    chunk_size: int = simulation.DEFAULT_CHUNK_SIZE,
    max_workers: int | None = None,
    seed_source: str = "cli",
) -> CommandResult:
    """Analytic and simulated β on the θ ∈ [π, 2π] grid for Γ ∈ {1, 0.8, 0.5} and the uniform source.

    Each grid row owns its own RNG stream (stream id = row index).
    """
    run_id = _run_id()
    grid = analytic.theta_grid(FIG1_THETA_MIN, FIG1_THETA_MAX, steps)
    logger.info(f"[{run_id}] Reproducing the θ sweep: {steps} theta values, {events_per_point} events per point")

    header = (
        f"# events_per_point={events_per_point}\n# seed={seed}\n# seed_source={seed_source}\n"
        f"# steps={steps}\n"
    )
    rows: list[Sequence[object]] = [
        ("theta", "gamma", "beta_analytic", "beta_sim", "beta_se", "beta_uniform")
    ]
    worst = 0.0
    stream_id = 0
    for theta in grid:
        quad = SettingsQuad.from_theta(float(theta))
        uniform_beta = analytic.beta_uniform(quad)
        series: list[tuple[str, GammaMixture | UniformOnCircle]] = [
            (fmt(gamma), GammaMixture(gamma=gamma, scheme=PairedSymmetric())) for gamma in FIG1_GAMMAS
        ]
        series.append(("uniform", UniformOnCircle()))
        for label, source in series:
            expected = analytic.beta_for_source(quad, source)
            _, estimates = simulation.simulate_point(
                quad,
                source,
                events_per_point,
                seed=seed,
                stream_id=stream_id,
                chunk_size=chunk_size,
                max_workers=max_workers,
            )
            stream_id += 1
            deviation = abs(expected - estimates.beta_hat)
            if estimates.beta_se > 0.0:
                worst = max(worst, deviation / estimates.beta_se)
            elif deviation > 1e-12:
                worst = math.inf
            rows.append(
                (
                    fmt(float(theta)),
                    label,
                    fmt(expected),
                    fmt(estimates.beta_hat),
                    fmt(estimates.beta_se),
                    fmt(uniform_beta),
                )
            )

    logger.info(f"[{run_id}] Max |analytic - simulated| / se = {worst:.3f}")
    summary = f"# max_abs_deviation_over_se={fmt(worst)}\n"
    return CommandResult(output=header + _csv(rows) + summary)


# --- Audits ---

def cmd_no_signaling_audit(config: RunConfig, max_workers: int | None = None) -> CommandResult:
    """Simulate, then audit singles, ξ distributions and factorability."""
    run_id = _run_id()
    quad = config.quad()
    source = config.source_policy()
    logger.info(f"[{run_id}] No-signaling audit on {config.events} events, source={config.source}")

    tally, estimates = simulation.simulate_point(
        quad,
        source,
        config.events,
        seed=config.seed,
        chunk_size=config.chunk_size,
        max_workers=max_workers,
    )
    signaling = audit.no_signaling_audit(tally, z_threshold=config.audit.z_threshold)
    factorability = audit.factorability_audit(
        tally, alpha=config.audit.chi2_alpha, min_count=config.audit.min_cell_count
    )
    subensembles = audit.subensemble_report(tally, source)

    lines = [echo_config(config).rstrip("\n"), "", "singles:"]
    for pair in estimates.pairs:
        lines.append(
            f"  {pair.label}: n={pair.n} <A>={fmt(pair.marg_a_hat)} (se {fmt(pair.marg_a_se)}) "
            f"<B>={fmt(pair.marg_b_hat)} (se {fmt(pair.marg_b_se)})"
        )
    lines.append("z-scores:")
    for side in signaling.sides:
        for score in side.scores:
            lines.append(f"  {score.label}: estimate={fmt(score.estimate)} z={fmt(score.z)}")
        lines.append(f"  side {side.side}: max |z|={fmt(side.max_abs_z)} {'pass' if side.passed else 'FAIL'}")

    lines.append("xi distribution per pair (" + ", ".join(SLOT_LABELS) + ", external):")
    for entry in subensembles.pairs:
        freqs = " ".join(fmt(f) for f in entry.frequencies)
        line = f"  {entry.label}: {freqs} {fmt(entry.external)}"
        if entry.max_abs_z is not None:
            line += f" (max |z| vs configured weights {fmt(entry.max_abs_z)})"
        lines.append(line)
    lines.append("  marginal: " + " ".join(fmt(f) for f in subensembles.marginal))
    if subensembles.gamma_hat is not None and subensembles.gamma_se is not None:
        lines.append(f"gamma_hat={fmt(subensembles.gamma_hat)} (se {fmt(subensembles.gamma_se)})")
    else:
        lines.append("gamma_hat=n/a (source does not draw xi from the quadruple)")

    if factorability.applicable:
        lines.append(
            f"factorability: {factorability.tested} cells tested, "
            f"{len(factorability.cells) - factorability.tested} skipped, "
            f"{len(factorability.rejected)} rejected {'pass' if factorability.passed else 'FAIL'}"
        )
    else:
        lines.append("factorability: not applicable (lambda not resolved by the source)")

    lines.append(f"no-signaling: {'PASS' if signaling.passed else 'FAIL'}")
    logger.info(f"[{run_id}] Audit verdict passed={signaling.passed}")
    return CommandResult(
        output="\n".join(lines) + "\n", exit_code=EXIT_OK if signaling.passed else EXIT_DATA
    )
