"""Directed networks stored as in-adjacency (CSR over targets).

Every Monte Carlo visit sweeps the in-neighbors of one node, so the primary
layout is ``indptr``/``indices`` grouped by target with sources sorted
ascending. Out-degrees are kept separately; vote weights are derived from
them on demand rather than stored per edge.
"""

from __future__ import annotations

import enum
import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DirectedGraph",
    "EdgeListError",
    "VoteMode",
    "build_graph",
    "from_edges",
    "load_edge_list",
    "load_labels",
    "read_graph",
    "vote_weight",
    "write_edge_list",
]


class EdgeListError(ValueError):
    """Malformed or empty edge-list input."""


class VoteMode(enum.Enum):
    OPA = "opa"  # unit weight per in-link
    OPS = "ops"  # weight 1/k_j, zero for dangling sources

    @classmethod
    def parse(cls, value: "str | VoteMode") -> "VoteMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown vote mode {value!r}; expected 'opa' or 'ops'") from None


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Immutable directed graph without self-loops or duplicate edges.

    ``indices[indptr[i]:indptr[i + 1]]`` are the sources ``j`` of edges
    ``j -> i``. ``tokens[i]`` is the external identifier of node ``i`` and
    ``labels`` optionally maps indices to human-readable names.
    """

    indptr: np.ndarray
    indices: np.ndarray
    out_degree: np.ndarray
    tokens: tuple[str, ...]
    labels: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.out_degree):
            arr.setflags(write=False)
        object.__setattr__(self, "_token_index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def node_count(self) -> int:
        return len(self.out_degree)

    @property
    def edge_count(self) -> int:
        return len(self.indices)

    def in_neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def in_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def dangling(self) -> np.ndarray:
        return np.flatnonzero(self.out_degree == 0)

    def edges(self) -> np.ndarray:
        """(N_l, 2) array of (source, target), grouped by target."""
        targets = np.repeat(np.arange(self.node_count, dtype=np.int64), self.in_degree())
        return np.column_stack([self.indices.astype(np.int64), targets])

    def vote_weights(self, mode: VoteMode) -> np.ndarray:
        """Per-source vote weight for every node (float64, length N)."""
        mode = VoteMode.parse(mode)
        if mode is VoteMode.OPA:
            return np.ones(self.node_count, dtype=np.float64)
        w = np.zeros(self.node_count, dtype=np.float64)
        nz = self.out_degree > 0
        w[nz] = 1.0 / self.out_degree[nz]
        return w

    def label(self, i: int) -> str:
        return self.labels.get(i, "")

    def index_of(self, token: str) -> int:
        """Resolve a node token, falling back to an exact label match."""
        token = str(token)
        idx = self._token_index.get(token)
        if idx is not None:
            return idx
        matches = [i for i, lab in self.labels.items() if lab == token]
        if len(matches) == 1:
            return matches[0]
        if len(matches) > 1:
            raise KeyError(f"label {token!r} is ambiguous ({len(matches)} nodes)")
        raise KeyError(f"unknown node {token!r}")

    def with_labels(self, labels: dict[int, str]) -> "DirectedGraph":
        return DirectedGraph(self.indptr, self.indices, self.out_degree, self.tokens, dict(labels))

    def same_structure(self, other: "DirectedGraph") -> bool:
        return (
            self.tokens == other.tokens
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.out_degree, other.out_degree)
        )


def vote_weight(graph: DirectedGraph, j: int, mode: VoteMode) -> float:
    if VoteMode.parse(mode) is VoteMode.OPA:
        return 1.0
    k = int(graph.out_degree[j])
    return 1.0 / k if k > 0 else 0.0


def load_edge_list(source) -> tuple[list[tuple[str, str]], dict[str, int]]:
    """Parse whitespace-separated ``SOURCE TARGET`` lines.

    ``source`` is a string of text or an open text stream. Lines starting
    with ``#`` are comments, except the directives ``# nodes: N`` (declares
    integer tokens ``0..N-1``) and ``# node: TOKEN`` (declares one node),
    which let isolated nodes survive a round trip.

    Returns the raw edge list and a token -> dense index map in first
    appearance order.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    edges: list[tuple[str, str]] = []
    index: dict[str, int] = {}

    def declare(tok: str) -> None:
        if tok not in index:
            index[tok] = len(index)

    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("nodes:"):
                try:
                    n = int(body[len("nodes:"):].strip())
                except ValueError:
                    raise EdgeListError(f"line {lineno}: bad node count directive {line!r}") from None
                for k in range(n):
                    declare(str(k))
            elif body.startswith("node:"):
                tok = body[len("node:"):].strip()
                if not tok or len(tok.split()) != 1:
                    raise EdgeListError(f"line {lineno}: bad node directive {line!r}")
                declare(tok)
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(f"line {lineno}: expected 2 tokens, got {len(parts)}")
        src, dst = parts
        declare(src)
        declare(dst)
        edges.append((src, dst))
    if not edges and not index:
        raise EdgeListError("empty edge list: no edges and no node declarations")
    return edges, index


def build_graph(edges: Iterable[tuple], index: dict[str, int] | Sequence[str] | int) -> DirectedGraph:
    """Build a :class:`DirectedGraph` from raw edges.

    ``edges`` hold tokens (looked up in ``index``) or, when ``index`` is an
    int node count, dense integer indices. Duplicates collapse to one edge
    and self-loops are dropped.
    """
    if isinstance(index, int):
        tokens = tuple(str(k) for k in range(index))
        lookup = None
    elif isinstance(index, dict):
        tokens = tuple(sorted(index, key=index.__getitem__))
        if [index[t] for t in tokens] != list(range(len(tokens))):
            raise ValueError("label map must be a dense 0-based index")
        lookup = index
    else:
        tokens = tuple(str(t) for t in index)
        lookup = {t: k for k, t in enumerate(tokens)}
    n = len(tokens)
    if n < 1:
        raise ValueError("graph needs at least one node")

    pairs = []
    for s, t in edges:
        if lookup is not None:
            s, t = lookup[str(s)], lookup[str(t)]
        pairs.append((int(s), int(t)))
    arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise ValueError("edge endpoint outside the node range")
    arr = arr[arr[:, 0] != arr[:, 1]]
    if len(arr):
        # sort by (target, source) then drop repeats
        order = np.lexsort((arr[:, 0], arr[:, 1]))
        arr = arr[order]
        keep = np.ones(len(arr), dtype=bool)
        keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
        arr = arr[keep]
    src, dst = arr[:, 0], arr[:, 1]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=indptr[1:])
    out_degree = np.bincount(src, minlength=n).astype(np.int64)
    return DirectedGraph(indptr, src.astype(np.int32), out_degree, tokens)


def from_edges(edges: Iterable[tuple[int, int]], n: int) -> DirectedGraph:
    """Shortcut for integer-indexed graphs with tokens ``"0".."n-1"``."""
    return build_graph(edges, n)


def load_labels(source, graph: DirectedGraph | None = None) -> dict:
    """Read ``index<TAB>label`` lines. Keys are node tokens, or dense
    indices when ``graph`` is given."""
    stream = io.StringIO(source) if isinstance(source, str) else source
    out = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        if "\t" not in line:
            raise EdgeListError(f"label file line {lineno}: expected index<TAB>label")
        tok, lab = line.split("\t", 1)
        tok = tok.strip()
        if graph is not None:
            if tok not in graph._token_index:
                raise EdgeListError(f"label file line {lineno}: unknown node {tok!r}")
            out[graph._token_index[tok]] = lab
        else:
            out[tok] = lab
    return out


def read_graph(path: str | os.PathLike, labels_path: str | os.PathLike | None = None) -> DirectedGraph:
    with open(path, encoding="utf-8") as fh:
        edges, index = load_edge_list(fh)
    g = build_graph(edges, index)
    if labels_path is not None:
        with open(labels_path, encoding="utf-8") as fh:
            g = g.with_labels(load_labels(fh, g))
    return g


def write_edge_list(graph: DirectedGraph, stream) -> None:
    """Serialize so that :func:`load_edge_list` + :func:`build_graph` give
    back an identical graph. Edges are written sorted by (source, target)."""
    n = graph.node_count
    if graph.tokens == tuple(str(k) for k in range(n)):
        stream.write(f"# nodes: {n}\n")
    else:
        for tok in graph.tokens:
            stream.write(f"# node: {tok}\n")
    stream.write(f"# edges: {graph.edge_count}\n")
    e = graph.edges()
    if len(e):
        e = e[np.lexsort((e[:, 1], e[:, 0]))]
    tok = graph.tokens
    stream.writelines(f"{tok[s]} {tok[t]}\n" for s, t in e)
