"""Deterministic counter-based randomness.

Every random decision in a run is a pure function of a few small integers
(run seed, stream tag, agent id, round number). There is no mutable generator
state to thread through the simulation, which buys two things:

* the scalar reference path and the vectorized batch path consume exactly the
  same uniforms regardless of loop order, so they agree bit for bit;
* sweep output is byte-identical for any worker count, because nothing about
  scheduling can perturb the draws.

The mixing function is the public-domain splitmix64 finalizer. Python-int and
numpy-uint64 implementations are kept side by side and must match exactly
(covered by tests).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Stream tags keep draws for different purposes from ever sharing a key.
STREAM_PRODUCTION = 0x50524F44  # "PROD"
STREAM_OWNER = 0x4F574E52  # "OWNR"


def mix64(z: int) -> int:
    """Bijective avalanche on 64-bit integers (splitmix64 finalizer)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def absorb(seed: int, *words: int) -> int:
    """Fold integer words into a seed, one avalanche pass per word."""
    h = seed & MASK64
    for w in words:
        h = mix64((h + _GAMMA + (w & MASK64)) & MASK64)
    return h


def seed_derive(master_seed: int, point_index: int, replicate_index: int) -> int:
    """Run seed for one replicate of one grid point.

    Distinct (point_index, replicate_index) pairs give independent streams
    under the same master seed.
    """
    return absorb(master_seed, point_index, replicate_index)


def to_unit(h: int) -> float:
    """Map a 64-bit hash to a float in [0, 1) using its top 53 bits.

    Dividing by 2**64 instead can round up to exactly 1.0, which would break
    inverse-CDF sampling; the 53-bit construction cannot.
    """
    return (h >> 11) * 2.0**-53


def production_uniform(run_seed: int, agent_id: int, round_no: int) -> float:
    """The single uniform behind one agent's production draw in one round."""
    return to_unit(absorb(run_seed, STREAM_PRODUCTION, agent_id, round_no))


def owner_draw(run_seed: int, n_agents: int) -> int:
    """Pick the high-quality variant's initial owner for one run.

    For power-of-two n_agents the modulo is exactly uniform.
    """
    return absorb(run_seed, STREAM_OWNER) % n_agents


def mix64_np(z: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def absorb_np(seed: np.ndarray, *words) -> np.ndarray:
    """Vectorized absorb; words may be scalars or broadcastable arrays."""
    h = np.asarray(seed, dtype=np.uint64)
    for w in words:
        h = mix64_np(h + np.uint64(_GAMMA) + np.asarray(w, dtype=np.uint64))
    return h


def to_unit_np(h: np.ndarray) -> np.ndarray:
    """Vectorized to_unit."""
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def production_uniform_np(
    run_seeds: np.ndarray, agent_ids: np.ndarray, round_no: int
) -> np.ndarray:
    """Production uniforms for a (replicate, agent) grid, matching the scalar path.

    run_seeds and agent_ids broadcast against each other, e.g. shapes (R, 1)
    and (N,) give an (R, N) result.
    """
    return to_unit_np(absorb_np(run_seeds, STREAM_PRODUCTION, agent_ids, round_no))
