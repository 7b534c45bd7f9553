"""Asynchronous majority-vote Monte Carlo on directed networks.

A realization starts with every non-fixed node WHITE and the seed nodes
holding their fixed colors. Each pass visits all non-fixed nodes once in a
fresh uniformly random order; a visited node tallies the vote weights of
its colored in-neighbors per color and adopts the strict winner (T = 0) or
draws red/blue with Boltzmann-like odds (T > 0, two colors only). Updates
are in place, so later visits in the same pass see earlier changes.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba as nb
import numpy as np

from ._rng import Stream, next_double, seed_stream, shuffle_into
from .graph import DirectedGraph, VoteMode
from .stats import NodeAggregate

__all__ = [
    "Color",
    "EnsembleResult",
    "RealizationResult",
    "ScoreSet",
    "SeedAssignment",
    "SimConfig",
    "compute_scores",
    "initial_state",
    "resolve_threads",
    "run_ensemble",
    "run_pass",
    "run_realization",
    "update_color_finite_T",
    "update_color_zero_T",
    "win_probability",
]


class Color(enum.IntEnum):
    WHITE = 0
    C1 = 1
    C2 = 2
    C3 = 3

    RED = 1
    BLUE = 2
    GREEN = 3


COLOR_NAMES = ("white", "red", "blue", "green")


@dataclass(frozen=True)
class SeedAssignment:
    """Fixed-color node sets; ``groups[k]`` holds color ``k + 1``."""

    groups: tuple[tuple[int, ...], ...]

    def __init__(self, *groups: Sequence[int]):
        object.__setattr__(self, "groups", tuple(tuple(int(i) for i in g) for g in groups))

    @property
    def colors(self) -> int:
        return len(self.groups)

    def validate(self, n: int) -> None:
        if not 2 <= len(self.groups) <= 3:
            raise ValueError(f"need 2 or 3 seed groups, got {len(self.groups)}")
        seen: dict[int, int] = {}
        for c, group in enumerate(self.groups, start=1):
            if not group:
                raise ValueError(f"seed group for color {COLOR_NAMES[c]} is empty")
            for i in group:
                if not 0 <= i < n:
                    raise ValueError(f"seed node {i} outside 0..{n - 1}")
                if i in seen and seen[i] != c:
                    raise ValueError(
                        f"node {i} is seeded as both {COLOR_NAMES[seen[i]]} and {COLOR_NAMES[c]}"
                    )
                seen[i] = c

    def swapped(self) -> "SeedAssignment":
        """Exchange the first two colors."""
        g = list(self.groups)
        g[0], g[1] = g[1], g[0]
        return SeedAssignment(*g)


@dataclass(frozen=True)
class SimConfig:
    mode: VoteMode = VoteMode.OPS
    colors: int = 2
    tau_max: int = 20
    n_realizations: int = 1
    temperature: float = 0.0
    master_seed: int = 0
    white_threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "mode", VoteMode.parse(self.mode))
        self.validate()

    def validate(self) -> None:
        if self.colors not in (2, 3):
            raise ValueError(f"colors must be 2 or 3, got {self.colors}")
        if self.tau_max < 1:
            raise ValueError("tau_max must be >= 1")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not self.temperature >= 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.temperature > 0 and self.colors == 3:
            raise ValueError("finite temperature is defined for two colors only")
        if not 0 < self.white_threshold <= 1:
            raise ValueError("white_threshold must lie in (0, 1]")

    @property
    def beta(self) -> float:
        """Inverse temperature; inf at T = 0 and 0 at T = inf."""
        if self.temperature == 0:
            return math.inf
        return 1.0 / self.temperature

    @property
    def finite_temperature(self) -> bool:
        return self.temperature > 0

    def replace(self, **changes) -> "SimConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class ScoreSet:
    """Per-color vote scores; ``values[k]`` belongs to color ``k + 1``."""

    values: tuple[float, ...]

    @property
    def plus(self) -> float:
        return self.values[0]

    @property
    def minus(self) -> float:
        return self.values[1]

    def __getitem__(self, color: int) -> float:
        return self.values[int(color) - 1]


@dataclass
class RealizationResult:
    state: np.ndarray  # final color per node (int8)
    switches: np.ndarray  # per-pass switch counts
    index: int
    trace: np.ndarray | None = None  # per-pass color tallies, (tau, colors + 1)
    colors: int = 2

    def color_counts(self) -> np.ndarray:
        return np.bincount(self.state, minlength=self.colors + 1)


@dataclass
class EnsembleResult:
    aggregate: NodeAggregate
    color_counts: np.ndarray  # (N_r, colors + 1) final tallies incl. fixed nodes
    switches: np.ndarray  # (N_r, tau_max)
    config: SimConfig
    seeds: SeedAssignment
    batch_counts: np.ndarray | None = None  # (n_batches, N, colors + 1)
    trace: np.ndarray | None = None  # (N_r, tau_max, colors + 1)
    states: np.ndarray | None = None  # (N_r, N) final colors, on request
    node_count: int = 0

    @property
    def n_realizations(self) -> int:
        return len(self.switches)


# ---------------------------------------------------------------------------
# kernels


@nb.njit(nogil=True, cache=True)
def _win_probability(zp, zm, beta):
    if beta == 0.0:
        return 0.5
    if zm == 0.0:
        return 1.0
    if zp == 0.0:
        return 0.0
    if math.isinf(beta):
        if zp > zm:
            return 1.0
        if zm > zp:
            return 0.0
        return 0.5
    return 1.0 / (1.0 + math.exp(beta * (math.log(zm) - math.log(zp))))


@nb.njit(nogil=True, cache=True)
def _decide_zero_t(cur, zp, zm, zg, n_colors):
    if n_colors == 2:
        if zp > zm:
            return np.int8(1)
        if zm > zp:
            return np.int8(2)
        return cur
    if zp > zm and zp > zg:
        return np.int8(1)
    if zm > zp and zm > zg:
        return np.int8(2)
    if zg > zp and zg > zm:
        return np.int8(3)
    return cur


@nb.njit(nogil=True, cache=True)
def _decide_finite_t(cur, zp, zm, beta, u):
    if zp == 0.0 and zm == 0.0:
        return cur
    if u < _win_probability(zp, zm, beta):
        return np.int8(1)
    return np.int8(2)


@nb.njit(nogil=True, cache=True)
def _scores(indptr, indices, weight, state, i):
    zp = 0.0
    zm = 0.0
    zg = 0.0
    for e in range(indptr[i], indptr[i + 1]):
        j = indices[e]
        c = state[j]
        if c == 1:
            zp += weight[j]
        elif c == 2:
            zm += weight[j]
        elif c == 3:
            zg += weight[j]
    return zp, zm, zg


@nb.njit(nogil=True, cache=True)
def _pass(indptr, indices, weight, state, order, n_colors, beta, finite_t, s, tally):
    switches = 0
    for k in range(len(order)):
        i = order[k]
        zp, zm, zg = _scores(indptr, indices, weight, state, i)
        cur = state[i]
        if finite_t:
            if zp == 0.0 and zm == 0.0:
                new = cur
            else:
                new = _decide_finite_t(cur, zp, zm, beta, next_double(s))
        else:
            new = _decide_zero_t(cur, zp, zm, zg, n_colors)
        if new != cur:
            tally[cur] -= 1
            tally[new] += 1
            state[i] = new
            switches += 1
    return switches


@nb.njit(nogil=True, cache=True)
def _run_block(indptr, indices, weight, init_state, movable, n_colors, tau, beta, finite_t,
               master_seed, r0, r1, node_counts, color_counts, switches, trace, states):
    n = len(init_state)
    s = np.empty(4, dtype=np.uint64)
    state = np.empty(n, dtype=np.int8)
    order = np.empty_like(movable)
    tally0 = np.zeros(4, dtype=np.int64)
    for i in range(n):
        tally0[init_state[i]] += 1
    tally = np.empty(4, dtype=np.int64)
    record_trace = trace.shape[0] > 0
    keep_states = states.shape[0] > 0
    for r in range(r0, r1):
        row = r - r0
        seed_stream(s, master_seed, r)
        state[:] = init_state
        tally[:] = tally0
        for t in range(tau):
            shuffle_into(order, movable, s)
            switches[row, t] = _pass(indptr, indices, weight, state, order, n_colors,
                                     beta, finite_t, s, tally)
            if record_trace:
                for c in range(n_colors + 1):
                    trace[row, t, c] = tally[c]
        for c in range(n_colors + 1):
            color_counts[row, c] = tally[c]
        for i in range(n):
            node_counts[i, state[i]] += 1
        if keep_states:
            states[row, :] = state


# ---------------------------------------------------------------------------
# public operations


def win_probability(scores: ScoreSet | tuple[float, float], beta: float) -> float:
    """Probability of turning red under the finite-temperature rule."""
    zp, zm = (scores.plus, scores.minus) if isinstance(scores, ScoreSet) else scores
    return float(_win_probability(float(zp), float(zm), float(beta)))


def compute_scores(graph: DirectedGraph, state: np.ndarray, i: int, mode: VoteMode,
                   colors: int = 2) -> ScoreSet:
    zp, zm, zg = _scores(graph.indptr, graph.indices, graph.vote_weights(mode),
                         np.asarray(state, dtype=np.int8), int(i))
    return ScoreSet((zp, zm, zg)[:colors])


def update_color_zero_T(current: int, scores: ScoreSet) -> Color:
    v = scores.values
    zg = v[2] if len(v) == 3 else 0.0
    return Color(int(_decide_zero_t(np.int8(current), v[0], v[1], zg, len(v))))


def update_color_finite_T(current: int, scores: ScoreSet, beta: float, u: float) -> Color:
    if len(scores.values) != 2:
        raise ValueError("finite-temperature update is defined for two colors only")
    return Color(int(_decide_finite_t(np.int8(current), scores.plus, scores.minus,
                                      float(beta), float(u))))


def initial_state(graph: DirectedGraph, seeds: SeedAssignment) -> np.ndarray:
    seeds.validate(graph.node_count)
    state = np.zeros(graph.node_count, dtype=np.int8)
    for c, group in enumerate(seeds.groups, start=1):
        state[list(group)] = c
    return state


def movable_nodes(graph: DirectedGraph, seeds: SeedAssignment) -> np.ndarray:
    fixed = np.zeros(graph.node_count, dtype=bool)
    for group in seeds.groups:
        fixed[list(group)] = True
    return np.flatnonzero(~fixed).astype(np.int32)


def _check(seeds: SeedAssignment, config: SimConfig) -> None:
    if seeds.colors != config.colors:
        raise ValueError(f"config has {config.colors} colors but {seeds.colors} seed groups")


def run_pass(graph: DirectedGraph, state: np.ndarray, seeds: SeedAssignment,
             config: SimConfig, rng: Stream, order: Sequence[int] | None = None) -> int:
    """One sweep over all non-fixed nodes; ``state`` is updated in place.

    The visiting order is a Fisher-Yates shuffle drawn from ``rng`` unless
    ``order`` is given, in which case ``rng`` only feeds finite-T draws.
    Returns the number of visits that changed a node's color.
    """
    _check(seeds, config)
    if state.dtype != np.int8:
        raise TypeError("state must be an int8 array")
    movable = movable_nodes(graph, seeds)
    if order is None:
        visit = np.empty_like(movable)
        shuffle_into(visit, movable, rng.state)
    else:
        visit = np.asarray(order, dtype=np.int32)
        if sorted(visit.tolist()) != movable.tolist():
            raise ValueError("order must be a permutation of the non-fixed nodes")
    tally = np.bincount(state, minlength=4).astype(np.int64)
    return int(_pass(graph.indptr, graph.indices, graph.vote_weights(config.mode), state, visit,
                     config.colors, config.beta, config.finite_temperature, rng.state, tally))


def run_realization(graph: DirectedGraph, seeds: SeedAssignment, config: SimConfig,
                    r: int, trace: bool = False) -> RealizationResult:
    _check(seeds, config)
    if not 0 <= r < config.n_realizations:
        raise ValueError(f"realization index {r} outside 0..{config.n_realizations - 1}")
    n = graph.node_count
    tau = config.tau_max
    node_counts = np.zeros((n, 4), dtype=np.int32)
    color_counts = np.zeros((1, 4), dtype=np.int64)
    switches = np.zeros((1, tau), dtype=np.int32)
    tr = np.zeros((1 if trace else 0, tau, 4), dtype=np.int32)
    states = np.zeros((1, n), dtype=np.int8)
    _run_block(graph.indptr, graph.indices, graph.vote_weights(config.mode),
               initial_state(graph, seeds), movable_nodes(graph, seeds), config.colors, tau,
               config.beta, config.finite_temperature, _seed64(config.master_seed), r, r + 1,
               node_counts, color_counts, switches, tr, states)
    k = config.colors + 1
    return RealizationResult(states[0], switches[0], r, tr[0, :, :k] if trace else None,
                             config.colors)


def _seed64(seed: int) -> np.uint64:
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("INOF_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def _blocks(n_realizations: int, n_batches: int, block_size: int):
    per_batch = n_realizations // n_batches
    for b in range(n_batches):
        start = b * per_batch
        stop = start + per_batch
        for r0 in range(start, stop, block_size):
            yield b, r0, min(r0 + block_size, stop)


def run_ensemble(graph: DirectedGraph, seeds: SeedAssignment, config: SimConfig, *,
                 threads: int | None = None, n_batches: int = 1, trace: bool = False,
                 keep_states: bool = False, block_size: int | None = None) -> EnsembleResult:
    """Run ``config.n_realizations`` independent realizations.

    Realization ``r`` draws from a stream keyed by ``(master_seed, r)``;
    per-node outcomes are merged by integer addition, so the result is the
    same for any thread count. With ``n_batches > 1`` the realizations are
    also split into equal consecutive batches whose per-node counts are
    kept for the subdivision error estimate.
    """
    _check(seeds, config)
    n_r = config.n_realizations
    if n_batches < 1 or n_r % n_batches:
        raise ValueError(
            f"N_r={n_r} is not divisible into {n_batches} batches; "
            f"choose N_r as a multiple of {n_batches}")
    threads = resolve_threads(threads)
    n = graph.node_count
    k = config.colors + 1
    tau = config.tau_max
    if block_size is None:
        # ~5e7 edge visits per block so threads balance on big graphs
        work = max(1, (graph.edge_count + n) * tau)
        block_size = int(min(256, max(1, 5e7 // work)))

    try:
        color_counts = np.zeros((n_r, 4), dtype=np.int64)
        switches = np.zeros((n_r, tau), dtype=np.int32)
        tr = np.zeros((n_r if trace else 0, tau, 4), dtype=np.int32)
        states = np.zeros((n_r if keep_states else 0, n), dtype=np.int8)
        batch_counts = np.zeros((n_batches, n, k), dtype=np.int64)
    except MemoryError as exc:
        raise RuntimeError("out of memory allocating ensemble outputs (realization 0)") from exc

    weight = graph.vote_weights(config.mode)
    init = initial_state(graph, seeds)
    movable = movable_nodes(graph, seeds)
    beta = config.beta
    finite_t = config.finite_temperature
    seed = _seed64(config.master_seed)

    def work_block(r0: int, r1: int) -> np.ndarray:
        try:
            node_counts = np.zeros((n, 4), dtype=np.int32)
            _run_block(graph.indptr, graph.indices, weight, init, movable, config.colors, tau,
                       beta, finite_t, seed, r0, r1, node_counts, color_counts[r0:r1],
                       switches[r0:r1], tr[r0:r1] if trace else tr,
                       states[r0:r1] if keep_states else states)
        except MemoryError as exc:
            raise RuntimeError(f"out of memory at realization {r0}") from exc
        return node_counts

    blocks = list(_blocks(n_r, n_batches, block_size))
    if threads == 1 or len(blocks) == 1:
        for b, r0, r1 in blocks:
            batch_counts[b] += work_block(r0, r1)[:, :k]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [(b, pool.submit(work_block, r0, r1)) for b, r0, r1 in blocks]
            for b, fut in futures:
                batch_counts[b] += fut.result()[:, :k]

    aggregate = NodeAggregate(batch_counts.sum(axis=0), n_r)
    return EnsembleResult(
        aggregate=aggregate,
        color_counts=color_counts[:, :k],
        switches=switches,
        config=config,
        seeds=seeds,
        batch_counts=batch_counts if n_batches > 1 else None,
        trace=tr[:, :, :k] if trace else None,
        states=states if keep_states else None,
        node_count=n,
    )
