"""Seeded, chunked event simulation and the experimenter-side estimators."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce

import numpy as np

from ..exceptions import ConfigurationError, InsufficientDataError
from ..models import (
    CHSH_SIGNS,
    EXTERNAL_SLOT,
    N_SLOTS,
    PAIR_LABELS,
    EventRecord,
    Estimates,
    PairEstimate,
    RngStreamSpec,
    SettingsQuad,
    SourcePolicy,
    UniformOnCircle,
)
from .model import UNIFORMS_PER_EVENT, EventBlock, generate_events

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 65536

# [pair k][xi slot][lambda branch][A: +1, -1][B: +1, -1]
CELL_SHAPE = (4, N_SLOTS, 2, 2, 2)
_PHILOX_BLOCK = 4


# --- Random streams ---

def philox_key(rng: RngStreamSpec) -> np.ndarray:
    return np.random.SeedSequence([rng.seed, rng.stream_id]).generate_state(2, dtype=np.uint64)


def event_uniforms(rng: RngStreamSpec, start: int, count: int) -> np.ndarray:
    """Uniforms for events [start, start + count) as a (count, 5) array.

    Event i always reads doubles 5i..5i+4 of the counter-based stream, so the
    result does not depend on how a run is split into chunks.
    """
    first = start * UNIFORMS_PER_EVENT
    block, skip = divmod(first, _PHILOX_BLOCK)
    bit_generator = np.random.Philox(key=philox_key(rng), counter=block)
    draws = np.random.Generator(bit_generator).random(skip + count * UNIFORMS_PER_EVENT)
    return draws[skip:].reshape(count, UNIFORMS_PER_EVENT)


# --- Tally ---

def _outcome_index(outcome: np.ndarray | int) -> np.ndarray | int:
    return (1 - outcome) // 2


@dataclass(frozen=True, eq=False)
class Tally:
    """Outcome counts per (settings pair, ξ slot, λ branch).

    lambda_resolved is False when λ was not drawn from a delta pair, in which
    case the ξ slot and λ branch indices carry no conditioning information.
    """

    cells: np.ndarray
    lambda_resolved: bool = True

    @classmethod
    def zero(cls, lambda_resolved: bool = True) -> Tally:
        return cls(cells=np.zeros(CELL_SHAPE, dtype=np.int64), lambda_resolved=lambda_resolved)

    @classmethod
    def from_block(cls, block: EventBlock, lambda_resolved: bool = True) -> Tally:
        flat = block.pair * N_SLOTS + block.xi_slot
        flat = flat * 2 + block.lambda_branch
        flat = flat * 2 + _outcome_index(block.outcome_a)
        flat = flat * 2 + _outcome_index(block.outcome_b)
        counts = np.bincount(flat, minlength=int(np.prod(CELL_SHAPE)))
        return cls(cells=counts.astype(np.int64).reshape(CELL_SHAPE), lambda_resolved=lambda_resolved)

    @classmethod
    def from_records(cls, records: Iterable[EventRecord]) -> Tally:
        cells = np.zeros(CELL_SHAPE, dtype=np.int64)
        resolved = True
        for record in records:
            if record.lambda_branch is None:
                resolved = False
            cells[
                record.pair.k,
                record.xi_slot,
                record.lambda_branch or 0,
                _outcome_index(record.outcome_a),
                _outcome_index(record.outcome_b),
            ] += 1
        return cls(cells=cells, lambda_resolved=resolved)

    def merge(self, other: Tally) -> Tally:
        return Tally(
            cells=self.cells + other.cells,
            lambda_resolved=self.lambda_resolved and other.lambda_resolved,
        )

    @property
    def pair_counts(self) -> np.ndarray:
        """n[pair][A][B], shape (4, 2, 2)."""
        return self.cells.sum(axis=(1, 2))

    @property
    def xi_counts(self) -> np.ndarray:
        """Events per (pair, ξ slot), shape (4, 5)."""
        return self.cells.sum(axis=(2, 3, 4))

    @property
    def total(self) -> int:
        return int(self.cells.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tally):
            return NotImplemented
        return self.lambda_resolved == other.lambda_resolved and np.array_equal(self.cells, other.cells)

    def __hash__(self) -> int:
        return hash((self.lambda_resolved, self.cells.tobytes()))


# --- Simulation ---

def _run_chunk(
    quad: SettingsQuad, source: SourcePolicy, rng: RngStreamSpec, start: int, count: int
) -> Tally:
    uniforms = event_uniforms(rng, start, count)
    block = generate_events(quad, source, uniforms)
    return Tally.from_block(block, lambda_resolved=not isinstance(source, UniformOnCircle))


def run_simulation(
    quad: SettingsQuad,
    source: SourcePolicy,
    n_events: int,
    rng: RngStreamSpec,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    max_workers: int | None = None,
) -> Tally:
    """Generate n_events events and accumulate them into a Tally.

    Chunks run on a thread pool, each with a private tally; the merged result
    is bit-identical for any chunk size and worker count.
    """
    if n_events < 0:
        raise ConfigurationError(f"n_events must be non-negative, got {n_events}")
    if chunk_size < 1:
        raise ConfigurationError(f"chunk_size must be at least 1, got {chunk_size}")

    resolved = not isinstance(source, UniformOnCircle)
    starts = range(0, n_events, chunk_size)
    logger.info(
        f"Simulating {n_events} events in {len(starts)} chunks "
        f"(seed={rng.seed}, stream={rng.stream_id}, source={source.kind})"
    )

    def work(start: int) -> Tally:
        count = min(chunk_size, n_events - start)
        logger.debug(f"Chunk at event {start}: {count} events")
        return _run_chunk(quad, source, rng, start, count)

    if len(starts) <= 1 or max_workers == 1:
        tallies = [work(start) for start in starts]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            tallies = list(executor.map(work, starts))

    return reduce(Tally.merge, tallies, Tally.zero(lambda_resolved=resolved))


# --- Estimation ---

def gamma_estimate(tally: Tally) -> tuple[float | None, float | None]:
    """Fraction of events whose ξ is one of the pair's chosen settings, with binomial SE."""
    xi = tally.xi_counts
    in_quad = int(xi[:, :EXTERNAL_SLOT].sum())
    if in_quad == 0:
        return None, None
    chosen = 0
    for k in range(4):
        index_a, index_b = divmod(k, 2)
        chosen += int(xi[k, index_a] + xi[k, 2 + index_b])
    gamma_hat = chosen / in_quad
    return gamma_hat, math.sqrt(gamma_hat * (1.0 - gamma_hat) / in_quad)


def _mean_and_se(plus_minus: int, n: int) -> tuple[float, float]:
    mean = plus_minus / n
    return mean, math.sqrt(max(0.0, 1.0 - mean * mean) / n)


def estimate(tally: Tally) -> Estimates:
    """Correlations, singles and CHSH value from the outcome counts alone."""
    counts = tally.pair_counts
    pairs: list[PairEstimate] = []
    for k, label in enumerate(PAIR_LABELS):
        npp, npm, nmp, nmm = (int(x) for x in counts[k].ravel())
        n = npp + npm + nmp + nmm
        if n == 0:
            raise InsufficientDataError(label)
        corr_hat, corr_se = _mean_and_se(npp + nmm - npm - nmp, n)
        marg_a_hat, marg_a_se = _mean_and_se(npp + npm - nmp - nmm, n)
        marg_b_hat, marg_b_se = _mean_and_se(npp + nmp - npm - nmm, n)
        pairs.append(
            PairEstimate(
                label=label,
                n=n,
                corr_hat=corr_hat,
                corr_se=corr_se,
                marg_a_hat=marg_a_hat,
                marg_a_se=marg_a_se,
                marg_b_hat=marg_b_hat,
                marg_b_se=marg_b_se,
            )
        )

    beta_hat = sum(sign * p.corr_hat for sign, p in zip(CHSH_SIGNS, pairs, strict=True))
    beta_se = math.sqrt(sum(p.corr_se**2 for p in pairs))
    gamma_hat, gamma_se = gamma_estimate(tally)

    return Estimates(
        pairs=pairs, beta_hat=beta_hat, beta_se=beta_se, gamma_hat=gamma_hat, gamma_se=gamma_se
    )


def simulate_point(
    quad: SettingsQuad,
    source: SourcePolicy,
    n_events: int,
    seed: int,
    stream_id: int = 0,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    max_workers: int | None = None,
) -> tuple[Tally, Estimates]:
    tally = run_simulation(
        quad,
        source,
        n_events,
        RngStreamSpec(seed=seed, stream_id=stream_id),
        chunk_size=chunk_size,
        max_workers=max_workers,
    )
    return tally, estimate(tally)
