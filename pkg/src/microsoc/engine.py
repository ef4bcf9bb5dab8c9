"""Simulation runs, replicate batches, and parameter sweeps.

The batch kernel simulates all replicates of one parameter point at once,
carrying a (replicates, agents, variants) pair of ego/allo count tensors and
updating them incrementally as the memory window slides. Its arithmetic is
written in exactly the IEEE evaluation order of the scalar rule in core.py
(same divisions, same mixture expression, same cumulative-sum sampling), and
the uniforms come from the same counter-based keys, so a batched run is
bit-identical to the scalar reference loop; tests enforce that.

Sweeps iterate the parameter grid in a fixed order and derive every run seed
from (master_seed, point_index, replicate_index) alone, which makes output
independent of worker count and lets an interrupted sweep resume exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator

import numpy as np

from . import rng
from .core import UNBOUNDED, BiasParams
from .errors import InvalidParamsError, InvalidReplicatesError
from .metrics import entropy_from_counts
from .schedule import BUILTIN_SIZES, ConnectivityKind, Schedule, builtin_schedule

DEFAULT_MAX_ROUNDS = 200


@dataclass(frozen=True)
class FixedHorizon:
    """Run exactly this many rounds (None: one full round-robin, N-1)."""

    rounds: int | None = None


@dataclass(frozen=True)
class UntilConvergence:
    """Run the full round-robin, then cycle the schedule until the round's
    productions are unanimous, giving up after max_rounds."""

    max_rounds: int = DEFAULT_MAX_ROUNDS


Horizon = FixedHorizon | UntilConvergence


@dataclass(frozen=True)
class ParameterPoint:
    """One cell of the parameter grid.

    quality_owner is a 0-based agent id whose seed variant is the high-quality
    one, or None to draw the owner per run. schedule must be supplied iff
    connectivity is CUSTOM.
    """

    n_agents: int = 8
    connectivity: ConnectivityKind = ConnectivityKind.EARLY
    coordination_bias: float = 0.5
    content_sensitivity: float = 0.0
    memory_window: float = UNBOUNDED
    mutation_rate: float = 0.02
    quality_owner: int | None = None
    schedule: Schedule | None = None

    def bias_params(self) -> BiasParams:
        return BiasParams(
            coordination_bias=self.coordination_bias,
            content_sensitivity=self.content_sensitivity,
            mutation_rate=self.mutation_rate,
            memory_window=self.memory_window,
        )

    def validate(self) -> None:
        self.bias_params().validate()
        kind = ConnectivityKind(self.connectivity)
        if kind is ConnectivityKind.CUSTOM:
            if self.schedule is None:
                raise InvalidParamsError("custom connectivity needs a schedule")
            if self.schedule.n_agents != self.n_agents:
                raise InvalidParamsError(
                    f"schedule is for {self.schedule.n_agents} agents, "
                    f"point has {self.n_agents}"
                )
        elif self.schedule is not None:
            raise InvalidParamsError("schedule given but connectivity is builtin")
        elif self.n_agents not in BUILTIN_SIZES:
            raise InvalidParamsError(
                f"population size {self.n_agents} has no builtin schedule"
            )
        if self.quality_owner is not None and not (
            0 <= self.quality_owner < self.n_agents
        ):
            raise InvalidParamsError(
                f"quality owner {self.quality_owner} outside population of "
                f"{self.n_agents}"
            )

    def resolve_schedule(self) -> Schedule:
        if self.schedule is not None:
            return self.schedule
        return builtin_schedule(ConnectivityKind(self.connectivity), self.n_agents)


@dataclass(frozen=True)
class SimulationConfig:
    """A parameter point plus how long to run it and where seeds come from."""

    point: ParameterPoint = ParameterPoint()
    horizon: Horizon = FixedHorizon()
    master_seed: int = 0


@dataclass(frozen=True)
class RunResult:
    """Everything observable about one run.

    Arrays are indexed by round 1..n_rounds (index 0 is round 1); productions
    also includes the seeding round 0 as its first row. convergence_round is
    the first round with zero entropy, None if the run never converged.
    """

    point: ParameterPoint
    run_seed: int
    quality_owner: int
    productions: np.ndarray  # (n_rounds + 1, n_agents)
    entropy: np.ndarray
    entropy_norm: np.ndarray
    adaptiveness: np.ndarray
    delta_adaptiveness: np.ndarray
    convergence_round: int | None

    @property
    def n_rounds(self) -> int:
        return len(self.entropy)

    @property
    def converged(self) -> bool:
        return self.convergence_round is not None


@dataclass
class BatchResult:
    """Dense per-round metrics for all replicates of one point.

    Rows of the metric arrays are replicates; columns are rounds 1..max
    executed. n_rounds[r] says how many leading columns are meaningful for
    replicate r (they differ only in until-convergence mode).
    """

    point: ParameterPoint
    horizon: Horizon
    run_seeds: np.ndarray
    quality_owners: np.ndarray
    n_rounds: np.ndarray
    entropy: np.ndarray
    entropy_norm: np.ndarray
    adaptiveness: np.ndarray
    delta_adaptiveness: np.ndarray
    convergence_rounds: np.ndarray  # 0 where censored
    productions: np.ndarray | None  # (replicates, max_rounds + 1, n_agents)

    @property
    def n_replicates(self) -> int:
        return len(self.run_seeds)


def _simulate_batch(
    point: ParameterPoint,
    horizon: Horizon,
    run_seeds: np.ndarray,
    keep_productions: bool = True,
) -> BatchResult:
    """Run all replicates of one parameter point in lockstep."""
    point.validate()
    schedule = point.resolve_schedule()
    n = point.n_agents
    n_variants = n
    partners = schedule.partner_matrix()
    cycle = schedule.n_rounds

    if isinstance(horizon, FixedHorizon):
        max_rounds = horizon.rounds if horizon.rounds is not None else cycle
        if max_rounds < 1:
            raise InvalidParamsError(f"horizon must be >= 1 rounds, got {max_rounds}")
        stop_early = False
    else:
        max_rounds = horizon.max_rounds
        if max_rounds < cycle:
            raise InvalidParamsError(
                f"max_rounds {max_rounds} shorter than one round-robin ({cycle})"
            )
        stop_early = True

    n_reps = len(run_seeds)
    seeds = np.asarray([s & rng.MASK64 for s in run_seeds], dtype=np.uint64)
    if point.quality_owner is not None:
        owners = np.full(n_reps, point.quality_owner, dtype=np.int64)
    else:
        owners = (rng.absorb_np(seeds, rng.STREAM_OWNER) % np.uint64(n)).astype(np.int64)

    c = point.coordination_bias
    b = point.content_sensitivity
    mu = point.mutation_rate
    m = point.memory_window
    mu_floor = mu / n_variants
    log2n = math.log2(n)

    prods = np.empty((n_reps, max_rounds + 1, n), dtype=np.int16)
    prods[:, 0, :] = np.arange(n, dtype=np.int16)
    heard = np.empty((n_reps, max_rounds + 1, n), dtype=np.int16)

    ego_counts = np.zeros((n_reps, n, n_variants), dtype=np.int32)
    allo_counts = np.zeros((n_reps, n, n_variants), dtype=np.int32)
    flat_rows = np.arange(n_reps * n)
    ego_flat = ego_counts.reshape(n_reps * n, n_variants)
    allo_flat = allo_counts.reshape(n_reps * n, n_variants)

    ent = np.zeros((n_reps, max_rounds))
    adapt = np.zeros((n_reps, max_rounds))
    conv = np.zeros(n_reps, dtype=np.int64)
    rep_idx = np.arange(n_reps)
    agent_ids = np.arange(n, dtype=np.uint64)

    def window_start(t: int) -> int:
        return 0 if math.isinf(m) else max(0, t - int(m))

    executed = 0
    for t in range(1, max_rounds + 1):
        # Slide the window to [window_start(t), t-1]: the previous round's
        # productions enter, rounds that fell off the left edge leave.
        ego_flat[flat_rows, prods[:, t - 1, :].ravel()] += 1
        if t >= 2:
            allo_flat[flat_rows, heard[:, t - 1, :].ravel()] += 1
        lo, prev_lo = window_start(t), window_start(t - 1)
        for w in range(prev_lo, lo):
            ego_flat[flat_rows, prods[:, w, :].ravel()] -= 1
            if w >= 1:
                allo_flat[flat_rows, heard[:, w, :].ravel()] -= 1

        ego_total = t - lo
        allo_total = t - max(lo, 1)
        f_ego = ego_counts / ego_total
        if allo_total == 0:
            pooled = f_ego
        else:
            pooled = (1.0 - c) * f_ego + c * (allo_counts / allo_total)

        q_count = (
            ego_counts[rep_idx, :, owners] + allo_counts[rep_idx, :, owners]
        )  # (reps, agents): occurrences of the high-quality variant in window
        gate = (q_count > 0).astype(np.float64)
        beta = b * gate
        target = np.zeros((n_reps, n_variants))
        target[rep_idx, owners] = 1.0
        base = (1.0 - beta)[:, :, None] * pooled + beta[:, :, None] * target[:, None, :]
        probs = (1.0 - mu) * base + mu_floor

        cumulative = np.cumsum(probs, axis=-1)
        u = rng.production_uniform_np(seeds[:, None], agent_ids[None, :], t)
        idx = (cumulative <= u[:, :, None]).sum(axis=-1)
        np.minimum(idx, n_variants - 1, out=idx)
        prods[:, t, :] = idx.astype(np.int16)
        heard[:, t, :] = prods[:, t, partners[(t - 1) % cycle]]

        pool_counts = np.bincount(
            (rep_idx[:, None] * n_variants + idx).ravel(),
            minlength=n_reps * n_variants,
        ).reshape(n_reps, n_variants)
        h = entropy_from_counts(pool_counts)
        ent[:, t - 1] = h
        adapt[:, t - 1] = pool_counts[rep_idx, owners] / n
        conv[(conv == 0) & (h == 0.0)] = t

        executed = t
        if stop_early and t >= cycle and bool((conv > 0).all()):
            break

    ent = ent[:, :executed]
    adapt = adapt[:, :executed]
    ent_norm = ent / log2n
    a0 = np.full((n_reps, 1), 1 / n)
    delta = np.diff(np.concatenate([a0, adapt], axis=1), axis=1)

    if stop_early:
        n_rounds = np.where(conv > 0, np.maximum(conv, cycle), executed)
    else:
        n_rounds = np.full(n_reps, executed, dtype=np.int64)

    return BatchResult(
        point=point,
        horizon=horizon,
        run_seeds=seeds,
        quality_owners=owners,
        n_rounds=n_rounds,
        entropy=ent,
        entropy_norm=ent_norm,
        adaptiveness=adapt,
        delta_adaptiveness=delta,
        convergence_rounds=conv,
        productions=prods[:, : executed + 1, :] if keep_productions else None,
    )


def _result_from_batch(batch: BatchResult, r: int) -> RunResult:
    if batch.productions is None:
        raise InvalidParamsError("batch was run without keep_productions")
    T = int(batch.n_rounds[r])
    conv = int(batch.convergence_rounds[r])
    return RunResult(
        point=batch.point,
        run_seed=int(batch.run_seeds[r]),
        quality_owner=int(batch.quality_owners[r]),
        productions=batch.productions[r, : T + 1].copy(),
        entropy=batch.entropy[r, :T].copy(),
        entropy_norm=batch.entropy_norm[r, :T].copy(),
        adaptiveness=batch.adaptiveness[r, :T].copy(),
        delta_adaptiveness=batch.delta_adaptiveness[r, :T].copy(),
        convergence_round=conv if 0 < conv <= T else None,
    )


def run_simulation(config: SimulationConfig, replicate_index: int = 0) -> RunResult:
    """One run, seeded from (master_seed, point 0, replicate_index)."""
    seed = rng.seed_derive(config.master_seed, 0, replicate_index)
    batch = _simulate_batch(config.point, config.horizon, [seed])
    return _result_from_batch(batch, 0)


def run_replicates(
    point: ParameterPoint,
    replicates: int,
    master_seed: int,
    horizon: Horizon = FixedHorizon(),
    point_index: int = 0,
    keep_productions: bool = True,
) -> BatchResult:
    """All replicates of one point as a dense batch."""
    if not isinstance(replicates, int) or replicates < 1:
        raise InvalidReplicatesError(f"replicates must be >= 1, got {replicates!r}")
    seeds = np.array(
        [rng.seed_derive(master_seed, point_index, r) for r in range(replicates)],
        dtype=np.uint64,
    )
    return _simulate_batch(point, horizon, seeds, keep_productions=keep_productions)


def iter_results(batch: BatchResult) -> Iterator[RunResult]:
    """Per-replicate views of a batch (requires kept productions)."""
    for r in range(batch.n_replicates):
        yield _result_from_batch(batch, r)


@dataclass(frozen=True)
class SweepGrid:
    """The cartesian parameter grid of a sweep.

    Points enumerate in the fixed order (n_agents, connectivity, coordination,
    content, memory); the index of a point in that order keys its run seeds.
    """

    population_sizes: tuple[int, ...] = (8,)
    connectivity: tuple[ConnectivityKind, ...] = (
        ConnectivityKind.EARLY,
        ConnectivityKind.MID,
        ConnectivityKind.LATE,
    )
    coordination_bias_levels: tuple[float, ...] = tuple(
        round(0.1 * i, 1) for i in range(11)
    )
    content_bias_levels: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(11))
    memory_levels: tuple[float, ...] = (1, 3, 5, UNBOUNDED)
    mutation_rate: float = 0.02
    replicates: int = 1000
    quality_owner: int | None = None
    custom_schedules: dict = field(default_factory=dict)  # name -> Schedule

    def validate(self) -> None:
        if not all(
            self.__getattribute__(name)
            for name in (
                "population_sizes",
                "connectivity",
                "coordination_bias_levels",
                "content_bias_levels",
                "memory_levels",
            )
        ):
            raise InvalidParamsError("every grid dimension needs at least one level")
        if self.replicates < 1:
            raise InvalidReplicatesError(
                f"replicates must be >= 1, got {self.replicates!r}"
            )
        for p in self.points():
            p.validate()

    def points(self) -> list[ParameterPoint]:
        out = []
        for n, kind, c, b, m in product(
            self.population_sizes,
            self.connectivity,
            self.coordination_bias_levels,
            self.content_bias_levels,
            self.memory_levels,
        ):
            if isinstance(kind, str) and kind in self.custom_schedules:
                conn, sched = ConnectivityKind.CUSTOM, self.custom_schedules[kind]
            else:
                conn, sched = ConnectivityKind(kind), None
            out.append(
                ParameterPoint(
                    n_agents=n,
                    connectivity=conn,
                    coordination_bias=c,
                    content_sensitivity=b,
                    memory_window=m,
                    mutation_rate=self.mutation_rate,
                    quality_owner=self.quality_owner,
                    schedule=sched,
                )
            )
        return out


def _sweep_point(args) -> tuple[int, "object"]:
    """Worker body: simulate one point and format its output rows."""
    from . import output  # local import keeps worker pickling light

    (point_index, point, master_seed, replicates, horizon, want_runs) = args
    batch = run_replicates(
        point,
        replicates,
        master_seed,
        horizon=horizon,
        point_index=point_index,
        keep_productions=want_runs,
    )
    runs_text = output.runs_block(batch) if want_runs else ""
    summaries = output.summarize_batch(batch)
    return point_index, (runs_text, summaries)


def sweep(
    grid: SweepGrid,
    master_seed: int,
    sink,
    horizon: Horizon = FixedHorizon(),
    workers: int = 1,
    progress=None,
) -> None:
    """Run every grid point (skipping any the sink already has) into sink.

    The sink must provide start_index() -> int and
    write_point(point_index, runs_text, summaries). Output bytes depend only
    on grid, master_seed, and horizon: never on workers or resume splits.
    """
    grid.validate()
    points = grid.points()
    start = sink.start_index()
    todo = [
        (i, points[i], master_seed, grid.replicates, horizon, sink.wants_runs())
        for i in range(start, len(points))
    ]
    done = start

    def consume(point_index, payload):
        runs_text, summaries = payload
        sink.write_point(point_index, runs_text, summaries)

    if workers <= 1:
        for args in todo:
            consume(*_sweep_point(args))
            done += 1
            if progress:
                progress(done, len(points))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for point_index, payload in pool.map(_sweep_point, todo, chunksize=4):
                consume(point_index, payload)
                done += 1
                if progress:
                    progress(done, len(points))
    sink.finalize()
