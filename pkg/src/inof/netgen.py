"""Deterministic synthetic networks for desk-scale experiments."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .graph import DirectedGraph, from_edges

__all__ = ["GenModel", "GenSpec", "generate"]

# node roles in the fixtures
STAR_RED, STAR_BLUE = 0, 1
GADGET_EDGES = ((0, 2), (1, 3), (2, 3), (3, 2))


class GenModel(enum.Enum):
    STAR = "star"
    GADGET = "gadget"
    ER_DIRECTED = "er"
    PA_DIRECTED = "pa"


@dataclass(frozen=True)
class GenSpec:
    model: GenModel
    n: int = 0
    p: float = 0.0
    m: int = 1
    leaves: int = 1
    seed: int = 0

    def validate(self) -> None:
        model = self.model
        if model is GenModel.STAR:
            if self.leaves < 1:
                raise ValueError("STAR needs at least one leaf")
        elif model is GenModel.ER_DIRECTED:
            if self.n < 2:
                raise ValueError("ER_DIRECTED needs n >= 2")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"edge probability p={self.p} outside [0, 1]")
        elif model is GenModel.PA_DIRECTED:
            if self.n < 2:
                raise ValueError("PA_DIRECTED needs n >= 2")
            if not 1 <= self.m < self.n:
                raise ValueError(f"PA_DIRECTED needs 1 <= m < n, got m={self.m}, n={self.n}")
        elif model is not GenModel.GADGET:
            raise ValueError(f"unknown model {model!r}")


def generate(spec: GenSpec) -> DirectedGraph:
    """Build the network described by ``spec``.

    STAR: node 0 points to leaves ``2..L+1``; node 1 is isolated (it is
    meant as the opposing seed). GADGET: the 4-node order-dependent
    fixture ``0->2, 1->3, 2->3, 3->2``. ER_DIRECTED: every ordered pair
    independently with probability ``p``. PA_DIRECTED: a directed
    ``(m+1)``-cycle, then each new node emits ``m`` edges to distinct
    existing nodes drawn with probability proportional to in-degree + 1.
    """
    spec.validate()
    model = spec.model
    if model is GenModel.STAR:
        n = spec.leaves + 2
        return from_edges([(STAR_RED, i) for i in range(2, n)], n)
    if model is GenModel.GADGET:
        return from_edges(GADGET_EDGES, 4)
    rng = np.random.default_rng(spec.seed)
    if model is GenModel.ER_DIRECTED:
        return from_edges(_er_edges(spec.n, spec.p, rng), spec.n)
    return from_edges(_pa_edges(spec.n, spec.m, rng), spec.n)


def _er_edges(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    parts = []
    for i in range(n):
        row = np.flatnonzero(rng.random(n) < p)
        row = row[row != i]
        parts.append(np.column_stack([np.full(len(row), i), row]))
    return np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)


def _pa_edges(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    core = m + 1
    edges = [(i, (i + 1) % core) for i in range(core)] if core > 1 else []
    # urn holds each node once (the +1) plus once per received in-link
    urn = np.empty(n + len(edges) + (n - core) * m, dtype=np.int64)
    size = 0
    for i in range(core):
        urn[size] = i
        size += 1
    for _, t in edges:
        urn[size] = t
        size += 1
    for v in range(core, n):
        chosen: list[int] = []
        while len(chosen) < m:
            t = int(urn[rng.integers(size)])
            if t not in chosen:
                chosen.append(t)
        for t in chosen:
            edges.append((v, t))
            urn[size] = t
            size += 1
        urn[size] = v
        size += 1
    return np.array(edges, dtype=np.int64).reshape(-1, 2)
