"""Exact zero-temperature outcome distribution on tiny graphs.

Enumerates every visiting order of the F non-fixed nodes (each with weight
1/F!), applies the deterministic pass to every reachable joint state and
iterates the resulting kernel ``tau`` times from the all-white start.
Arithmetic is exact (``fractions.Fraction``) and independent of the Monte
Carlo kernels in :mod:`inof.dynamics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations

from .graph import DirectedGraph, VoteMode

__all__ = ["MAX_FREE_NODES", "Marginals", "StateDistribution", "exact_distribution",
           "exact_marginals", "reachable_kernel"]

MAX_FREE_NODES = 7
WHITE = 0


@dataclass
class StateDistribution:
    """Probability of each joint coloring of ``free_nodes`` (0 = white)."""

    free_nodes: tuple[int, ...]
    fixed: dict[int, int]
    colors: int
    probs: dict[tuple[int, ...], Fraction]
    node_count: int

    def total(self) -> Fraction:
        return sum(self.probs.values(), Fraction(0))

    def as_float(self) -> dict[tuple[int, ...], float]:
        return {k: float(v) for k, v in self.probs.items()}


@dataclass
class Marginals:
    prob: list[list[Fraction]]  # prob[i][c], c = 0 (white) .. colors
    mu: list[Fraction | None]  # 2 colors: exact polarization, None if always white

    def undefined(self) -> list[int]:
        return [i for i, m in enumerate(self.mu) if m is None]


def _weights(graph: DirectedGraph, mode: VoteMode) -> list[Fraction]:
    if VoteMode.parse(mode) is VoteMode.OPA:
        return [Fraction(1)] * graph.node_count
    return [Fraction(1, int(k)) if k > 0 else Fraction(0) for k in graph.out_degree]


def _apply_pass(full: list[int], order, in_nbrs, weights, colors: int) -> None:
    for i in order:
        z = [Fraction(0)] * (colors + 1)
        for j in in_nbrs[i]:
            c = full[j]
            if c != WHITE:
                z[c] += weights[j]
        scores = z[1:]
        best = max(scores)
        if scores.count(best) == 1:
            full[i] = scores.index(best) + 1


class _PassKernel:
    """Lazily built one-pass transition kernel over joint free-node states."""

    def __init__(self, graph: DirectedGraph, seeds, mode: VoteMode, colors: int):
        groups = getattr(seeds, "groups", seeds)
        if len(groups) != colors:
            raise ValueError(f"{len(groups)} seed groups for {colors} colors")
        self.fixed = {int(i): c for c, g in enumerate(groups, start=1) for i in g}
        self.free = tuple(i for i in range(graph.node_count) if i not in self.fixed)
        if len(self.free) > MAX_FREE_NODES:
            raise ValueError(
                f"{len(self.free)} non-fixed nodes; exact enumeration is limited to "
                f"F <= {MAX_FREE_NODES}")
        self.n = graph.node_count
        self.colors = colors
        self.weights = _weights(graph, mode)
        self.in_nbrs = [[int(j) for j in graph.in_neighbors(i)] for i in range(self.n)]
        self.orders = list(permutations(self.free))
        self.share = Fraction(1, math.factorial(len(self.free)))
        self.rows: dict[tuple, dict[tuple, Fraction]] = {}

    @property
    def start(self) -> tuple:
        return tuple([WHITE] * len(self.free))

    def row(self, state: tuple) -> dict[tuple, Fraction]:
        if state not in self.rows:
            base = [WHITE] * self.n
            for i, c in self.fixed.items():
                base[i] = c
            for i, c in zip(self.free, state):
                base[i] = c
            out: dict[tuple, Fraction] = {}
            for order in self.orders:
                full = list(base)
                _apply_pass(full, order, self.in_nbrs, self.weights, self.colors)
                nxt = tuple(full[i] for i in self.free)
                out[nxt] = out.get(nxt, Fraction(0)) + self.share
            self.rows[state] = out
        return self.rows[state]


def exact_distribution(graph: DirectedGraph, seeds, mode: VoteMode, colors: int = 2,
                       tau: int = 20, temperature: float = 0.0) -> StateDistribution:
    """Exact outcome distribution after ``tau`` passes at T = 0.

    ``seeds`` is a :class:`~inof.dynamics.SeedAssignment` or a sequence of
    node groups, one per color. Iteration stops early once the distribution
    is stationary.
    """
    if temperature != 0:
        raise ValueError("the exact oracle supports T = 0 only")
    kern = _PassKernel(graph, seeds, mode, colors)
    dist = {kern.start: Fraction(1)}
    for _ in range(tau):
        new: dict[tuple, Fraction] = {}
        for state, p in dist.items():
            for nxt, q in kern.row(state).items():
                new[nxt] = new.get(nxt, Fraction(0)) + p * q
        if new == dist:
            break
        dist = new
    return StateDistribution(kern.free, kern.fixed, colors, dist, graph.node_count)


def reachable_kernel(graph: DirectedGraph, seeds, mode: VoteMode, colors: int = 2,
                     tau: int = 20) -> dict[tuple, dict[tuple, Fraction]]:
    """Kernel rows for every state reachable within ``tau`` passes."""
    kern = _PassKernel(graph, seeds, mode, colors)
    frontier = [kern.start]
    for _ in range(tau):
        frontier = [nxt for st in frontier if st not in kern.rows for nxt in kern.row(st)]
        if not frontier:
            break
    return kern.rows


def exact_marginals(dist: StateDistribution) -> Marginals:
    """Per-node outcome probabilities; for two colors also the exact
    polarization (None when the node is white with probability 1)."""
    k = dist.colors + 1
    prob = [[Fraction(0)] * k for _ in range(dist.node_count)]
    for i, c in dist.fixed.items():
        prob[i][c] = Fraction(1)
    for state, p in dist.probs.items():
        for i, c in zip(dist.free_nodes, state):
            prob[i][c] += p
    mu: list[Fraction | None] = [None] * dist.node_count
    if dist.colors == 2:
        for i, (_, pr, pb) in enumerate(prob):
            if pr + pb > 0:
                mu[i] = (pr - pb) / (pr + pb)
    return Marginals(prob, mu)
