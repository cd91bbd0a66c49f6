"""All-pairs shortest paths and the multi-base vertex split."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .core import Instance, InstanceError


class UnreachableError(InstanceError):
    pass


@dataclass(frozen=True)
class ClosedGraph:
    """Shortest distances and next hops between POIs.

    Matrices are indexed by ``id - 1``; ``next_hop[i, j]`` holds the 0-based
    index of the vertex after ``i`` on a shortest ``i -> j`` path, or -1.
    """

    n: int
    dist: np.ndarray
    next_hop: np.ndarray

    def d(self, i: int, j: int) -> float:
        return float(self.dist[i - 1, j - 1])

    def reachable(self, i: int, j: int) -> bool:
        return bool(np.isfinite(self.dist[i - 1, j - 1]))


def floyd_warshall(weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Closure of a dense weight matrix (inf = no edge). Returns (dist, next_hop)."""
    n = weights.shape[0]
    dist = np.array(weights, dtype=float, copy=True)
    np.fill_diagonal(dist, 0.0)
    nxt = np.where(np.isfinite(dist), np.arange(n)[None, :], -1)
    np.fill_diagonal(nxt, np.arange(n))
    for k in range(n):
        via = dist[:, k : k + 1] + dist[k : k + 1, :]
        better = via < dist
        if better.any():
            dist = np.where(better, via, dist)
            nxt = np.where(better, nxt[:, k : k + 1], nxt)
    return dist, nxt


def weight_matrix(instance: Instance) -> np.ndarray:
    w = np.full((instance.n, instance.n), math.inf)
    for i, j, d in instance.edges:
        w[i - 1, j - 1] = d
    return w


def transitive_closure(instance: Instance) -> ClosedGraph:
    dist, nxt = floyd_warshall(weight_matrix(instance))
    return ClosedGraph(instance.n, dist, nxt)


def reconstruct_path(closed: ClosedGraph, i: int, j: int) -> List[int]:
    """Vertex ids of a shortest ``i -> j`` path, endpoints included."""
    if not closed.reachable(i, j):
        raise UnreachableError(f"POI {j} is unreachable from POI {i}")
    path = [i]
    a, b = i - 1, j - 1
    while a != b:
        a = int(closed.next_hop[a, b])
        path.append(a + 1)
        if len(path) > closed.n + 1:
            raise RuntimeError("next-hop table contains a cycle")
    return path


@dataclass(frozen=True)
class Gadget:
    """Zero-length edges added around one base (vertex labels as in ``SplitGraph``)."""

    base: int
    o_out: Tuple[str, str]
    in_o: Tuple[str, str]
    out_in: Tuple[str, str]
    in_out: Tuple[str, str]

    def edges(self) -> List[Tuple[str, str]]:
        return [self.o_out, self.in_o, self.out_in, self.in_out]


@dataclass(frozen=True)
class SplitGraph:
    """Closure graph with every base split into ``in``/``out`` copies.

    Vertex labels are strings: ``"v7"`` for a non-base POI, ``"v3:in"`` and
    ``"v3:out"`` for a base and ``"o"`` for the virtual origin.
    """

    closed: ClosedGraph
    bases: Tuple[int, ...]
    gadgets: Tuple[Gadget, ...]
    origin: str = "o"
    labels: Tuple[str, ...] = field(default=())

    @property
    def gadget_edge_count(self) -> int:
        return 4 * len(self.gadgets)

    def tail(self, i: int) -> str:
        return f"v{i}:out" if i in self.bases else f"v{i}"

    def head(self, j: int) -> str:
        return f"v{j}:in" if j in self.bases else f"v{j}"

    def edge_list(self) -> List[Tuple[str, str, float]]:
        """Every edge of the split graph: re-rooted closure edges plus gadgets."""
        out = []
        n = self.closed.n
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i != j and self.closed.reachable(i, j):
                    out.append((self.tail(i), self.head(j), self.closed.d(i, j)))
        for g in self.gadgets:
            out.extend((a, b, 0.0) for a, b in g.edges())
        return out


def split_bases(closed: ClosedGraph, bases: Sequence[int]) -> SplitGraph:
    bases = tuple(sorted(set(int(b) for b in bases)))
    if not bases:
        raise InstanceError("at least one base is required")
    for b in bases:
        if not 1 <= b <= closed.n:
            raise InstanceError(f"base {b} outside vertex range 1..{closed.n}")
    gadgets = tuple(
        Gadget(
            base=b,
            o_out=("o", f"v{b}:out"),
            in_o=(f"v{b}:in", "o"),
            out_in=(f"v{b}:out", f"v{b}:in"),
            in_out=(f"v{b}:in", f"v{b}:out"),
        )
        for b in bases
    )
    labels = []
    for i in range(1, closed.n + 1):
        labels.extend([f"v{i}:in", f"v{i}:out"] if i in bases else [f"v{i}"])
    labels.append("o")
    return SplitGraph(closed, bases, gadgets, "o", tuple(labels))


def contract(split: SplitGraph) -> np.ndarray:
    """Shortest distances between POIs in the split graph, origin excluded.

    A path from ``i`` to base ``b`` ends at ``b:in``; one leaving ``b``
    starts at ``b:out``.
    """
    labels = [l for l in split.labels if l != split.origin]
    index = {l: k for k, l in enumerate(labels)}
    w = np.full((len(labels), len(labels)), math.inf)
    for a, b, d in split.edge_list():
        if a == split.origin or b == split.origin:
            continue
        w[index[a], index[b]] = min(w[index[a], index[b]], d)
    dist, _ = floyd_warshall(w)
    n = split.closed.n
    out = np.full((n, n), math.inf)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            out[i - 1, j - 1] = 0.0 if i == j else dist[index[split.tail(i)], index[split.head(j)]]
    return out
