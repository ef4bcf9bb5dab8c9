"""Agent memory and the production rule.

An agent's memory is a list of (round, origin, variant) entries, split into an
ego partition (what the agent itself produced) and an allo partition (what it
heard from partners). At production time the agent mixes the two partitions'
variant frequencies inside a sliding window of the last m rounds, optionally
redirects probability mass toward a high-quality variant it remembers, and
adds a uniform innovation floor:

    base(x) = (1 - beta) * [(1 - c) * f_ego(x) + c * f_allo(x)] + beta * target(x)
    P(x)    = (1 - mu) * base(x) + mu / n_variants

where beta = b * d and d is 1 iff some high-quality variant appears anywhere
in the window. target(x) spreads beta's mass uniformly over the high-quality
variants present (in this engine there is always exactly one). When the allo
partition is empty inside the window (always true in round 1), the social
weight c is reassigned to the ego side: the mixture falls back to f_ego alone.

Everything here is scalar and readable; the batch engine reimplements the same
arithmetic vectorized, in the same IEEE evaluation order, and the test suite
pins the two paths to bit-identical outputs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateRoundError,
    EmptyMemoryError,
    InvalidParamsError,
)

UNBOUNDED = math.inf


class Origin(enum.Enum):
    """Which side of an interaction a memory entry came from."""

    EGO = "ego"
    ALLO = "allo"


@dataclass(frozen=True)
class MemoryEntry:
    """One remembered production: who produced it is folded into origin."""

    round_no: int
    origin: Origin
    variant: int


@dataclass
class AgentMemory:
    """Chronological record of everything one agent produced and heard."""

    agent_id: int
    entries: list[MemoryEntry] = field(default_factory=list)

    @classmethod
    def initial(cls, agent_id: int) -> "AgentMemory":
        """Memory at the start of a run: the agent's own id as its seed variant."""
        return cls(agent_id, [MemoryEntry(0, Origin.EGO, agent_id)])

    def record(self, entry: MemoryEntry) -> None:
        if self.entries and entry.round_no < self.entries[-1].round_no:
            raise DuplicateRoundError(
                f"entry for round {entry.round_no} arrives after round "
                f"{self.entries[-1].round_no}"
            )
        self.entries.append(entry)

    def last_round(self) -> int:
        return self.entries[-1].round_no if self.entries else -1

    def window_entries(self, memory_window: float, current_round: int):
        """Entries visible when producing in current_round.

        The window covers rounds [current_round - m, current_round - 1]; an
        unbounded window keeps everything.
        """
        lo = -1 if math.isinf(memory_window) else current_round - memory_window
        hi = current_round - 1
        return [e for e in self.entries if lo <= e.round_no <= hi]


@dataclass(frozen=True)
class BiasParams:
    """Model parameters for one agent (shared by all agents in this engine).

    coordination_bias (c) weighs heard variants against own ones;
    content_sensitivity (b) is the maximum mass redirected to a remembered
    high-quality variant; mutation_rate (mu) is the uniform innovation floor;
    memory_window (m) is the number of past rounds kept, UNBOUNDED for all.
    """

    coordination_bias: float = 0.5
    content_sensitivity: float = 0.0
    mutation_rate: float = 0.0
    memory_window: float = UNBOUNDED

    def validate(self) -> None:
        for name in ("coordination_bias", "content_sensitivity", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParamsError(f"{name} must lie in [0, 1], got {v!r}")
        m = self.memory_window
        if math.isinf(m) and m > 0:
            return
        if not (isinstance(m, (int, float)) and float(m).is_integer() and m >= 1):
            raise InvalidParamsError(
                f"memory_window must be a positive integer or unbounded, got {m!r}"
            )


@dataclass(frozen=True)
class QualityAssignment:
    """Which variants count as high quality (adaptive content)."""

    high_quality: frozenset[int]

    @classmethod
    def single(cls, variant: int) -> "QualityAssignment":
        return cls(frozenset((variant,)))

    def is_high(self, variant: int) -> bool:
        return variant in self.high_quality


@dataclass(frozen=True)
class ProductionDistribution:
    """A probability vector over the variant space, with its cumulative sums."""

    probs: np.ndarray
    cumulative: np.ndarray

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "ProductionDistribution":
        return cls(probs, np.cumsum(probs))


def partition_frequencies(
    memory: AgentMemory,
    origin: Origin,
    memory_window: float,
    current_round: int,
) -> dict[int, float]:
    """Relative frequencies of variants in one partition of the active window.

    Returns an empty dict when the partition has no in-window entries.
    """
    counts: dict[int, int] = {}
    total = 0
    for e in memory.window_entries(memory_window, current_round):
        if e.origin is origin:
            counts[e.variant] = counts.get(e.variant, 0) + 1
            total += 1
    if total == 0:
        return {}
    return {v: k / total for v, k in counts.items()}


def production_distribution(
    memory: AgentMemory,
    params: BiasParams,
    quality: QualityAssignment,
    n_variants: int,
    current_round: int,
) -> ProductionDistribution:
    """The full production rule for one agent at one round.

    Raises InvalidParamsError for out-of-range parameters and EmptyMemoryError
    if no entry at all falls inside the window.
    """
    params.validate()
    if n_variants < 1:
        raise InvalidParamsError(f"n_variants must be positive, got {n_variants}")
    f_ego = partition_frequencies(memory, Origin.EGO, params.memory_window, current_round)
    f_allo = partition_frequencies(
        memory, Origin.ALLO, params.memory_window, current_round
    )
    if not f_ego and not f_allo:
        raise EmptyMemoryError(
            f"agent {memory.agent_id} remembers nothing within "
            f"{params.memory_window} rounds before round {current_round}"
        )
    for v in (*f_ego, *f_allo):
        if not 0 <= v < n_variants:
            raise InvalidParamsError(
                f"remembered variant {v} outside the space of {n_variants}"
            )

    ego_vec = np.zeros(n_variants)
    for v, p in f_ego.items():
        ego_vec[v] = p
    allo_vec = np.zeros(n_variants)
    for v, p in f_allo.items():
        allo_vec[v] = p

    c = params.coordination_bias
    # An empty partition hands its mixture weight to the other side.
    if not f_allo:
        pooled = ego_vec
    elif not f_ego:
        pooled = allo_vec
    else:
        pooled = (1.0 - c) * ego_vec + c * allo_vec

    remembered_high = sorted(
        v for v in set((*f_ego, *f_allo)) if quality.is_high(v)
    )
    gate = 1.0 if remembered_high else 0.0
    beta = params.content_sensitivity * gate
    target = np.zeros(n_variants)
    if remembered_high:
        target[remembered_high] = 1.0 / len(remembered_high)

    base = (1.0 - beta) * pooled + beta * target
    mu = params.mutation_rate
    probs = (1.0 - mu) * base + mu / n_variants
    return ProductionDistribution.from_probs(probs)


def sample_variant(dist: ProductionDistribution, u: float) -> int:
    """Inverse-CDF sample: the variant whose cumulative bin contains u in [0, 1)."""
    idx = int(np.searchsorted(dist.cumulative, u, side="right"))
    return min(idx, len(dist.cumulative) - 1)


def record_interaction(
    memory_a: AgentMemory,
    memory_b: AgentMemory,
    produced_a: int,
    produced_b: int,
    round_no: int,
) -> None:
    """Write one pairing's outcome into both partners' memories.

    Each partner stores its own production as an ego entry and the partner's
    as an allo entry. Recording the same round twice is an error.
    """
    if round_no < 1:
        raise InvalidParamsError(f"interactions start at round 1, got {round_no}")
    for mem in (memory_a, memory_b):
        if mem.last_round() >= round_no:
            raise DuplicateRoundError(
                f"agent {mem.agent_id} already has entries for round {round_no}"
            )
    memory_a.record(MemoryEntry(round_no, Origin.EGO, produced_a))
    memory_a.record(MemoryEntry(round_no, Origin.ALLO, produced_b))
    memory_b.record(MemoryEntry(round_no, Origin.EGO, produced_b))
    memory_b.record(MemoryEntry(round_no, Origin.ALLO, produced_a))
