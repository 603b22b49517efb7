"""Static directed communication topologies.

Edges follow the receiver-first convention: ``(l, i)`` in ``edges`` means
node ``i`` can transmit to node ``l``.  Nodes are ``0 .. n-1``.
"""

from __future__ import annotations

from collections import deque
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "Digraph",
    "GraphError",
    "GraphGenerationError",
    "generate_random",
    "is_strongly_connected",
    "diameter",
    "ring",
    "complete",
    "read_edge_list",
]

DEFAULT_RETRY_BUDGET = 10_000


class GraphError(ValueError):
    pass


class GraphGenerationError(GraphError):
    pass


def _bfs_lengths(adj: tuple[tuple[int, ...], ...], source: int) -> list[int]:
    dist = [-1] * len(adj)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


class Digraph:
    """Immutable digraph with cached adjacency lists and diameter.

    Parameters
    ----------
    n : int
        Number of nodes, at least 2.
    edges : iterable of (receiver, sender) pairs
        Self-loops are rejected.
    """

    __slots__ = ("n", "edges", "in_neighbors", "out_neighbors", "_diameter")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]):
        if n < 2:
            raise GraphError(f"a digraph needs at least 2 nodes, got n={n}")
        edge_set = frozenset((int(l), int(i)) for l, i in edges)
        for l, i in edge_set:
            if not (0 <= l < n and 0 <= i < n):
                raise GraphError(f"edge ({l}, {i}) references a node outside 0..{n - 1}")
            if l == i:
                raise GraphError(f"self-loop at node {i} is not allowed")
        ins: list[list[int]] = [[] for _ in range(n)]
        outs: list[list[int]] = [[] for _ in range(n)]
        for l, i in edge_set:
            outs[i].append(l)
            ins[l].append(i)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", edge_set)
        object.__setattr__(self, "in_neighbors", tuple(tuple(sorted(a)) for a in ins))
        object.__setattr__(self, "out_neighbors", tuple(tuple(sorted(a)) for a in outs))
        object.__setattr__(self, "_diameter", self._compute_diameter())

    def __setattr__(self, name, value):
        raise AttributeError("Digraph is immutable")

    @classmethod
    def from_links(cls, n: int, links: Iterable[tuple[int, int]]) -> "Digraph":
        """Build from ``(sender, receiver)`` pairs."""
        return cls(n, ((j, i) for i, j in links))

    def links(self) -> list[tuple[int, int]]:
        """Sorted ``(sender, receiver)`` pairs."""
        return sorted((i, l) for l, i in self.edges)

    def out_degree(self, i: int) -> int:
        return len(self.out_neighbors[i])

    @property
    def strongly_connected(self) -> bool:
        return self._diameter is not None

    @property
    def diameter(self) -> int:
        if self._diameter is None:
            raise GraphError("diameter is undefined: digraph is not strongly connected")
        return self._diameter

    def _compute_diameter(self) -> int | None:
        longest = 0
        for s in range(self.n):
            dist = _bfs_lengths(self.out_neighbors, s)
            if min(dist) < 0:
                return None
            longest = max(longest, max(dist))
        return longest

    def to_dot(self, name: str = "G") -> str:
        lines = [f"digraph {name} {{"]
        lines += [f"  {i};" for i in range(self.n)]
        lines += [f"  {i} -> {l};" for i, l in self.links()]
        lines.append("}")
        return "\n".join(lines) + "\n"

    def write_edge_list(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{i} {l}\n" for i, l in self.links()))

    def __eq__(self, other) -> bool:
        return isinstance(other, Digraph) and self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Digraph(n={self.n}, m={len(self.edges)}, diameter={self._diameter})"


def is_strongly_connected(g: Digraph) -> bool:
    forward = _bfs_lengths(g.out_neighbors, 0)
    backward = _bfs_lengths(g.in_neighbors, 0)
    return min(forward) >= 0 and min(backward) >= 0


def diameter(g: Digraph) -> int:
    """Longest shortest directed path; raises :class:`GraphError` if undefined."""
    return g.diameter


def ring(n: int) -> Digraph:
    """Directed cycle ``0 -> 1 -> ... -> n-1 -> 0``."""
    return Digraph.from_links(n, ((i, (i + 1) % n) for i in range(n)))


def complete(n: int) -> Digraph:
    return Digraph(n, ((l, i) for l in range(n) for i in range(n) if l != i))


def generate_random(
    n: int,
    edge_prob: float,
    seed: int | np.random.SeedSequence | None = None,
    retry_budget: int = DEFAULT_RETRY_BUDGET,
) -> Digraph:
    """Random strongly connected digraph.

    Every ordered pair ``(i, l)`` with ``i != l`` becomes a link independently
    with probability ``edge_prob``.  Draws that are not strongly connected are
    discarded and the same generator keeps drawing, so the result is a pure
    function of ``(n, edge_prob, seed)``.
    """
    if n < 2:
        raise GraphError(f"n must be >= 2, got {n}")
    if not 0 < edge_prob <= 1:
        raise GraphError(f"edge_prob must lie in (0, 1], got {edge_prob}")
    rng = np.random.default_rng(seed)
    off_diagonal = ~np.eye(n, dtype=bool)
    for _ in range(retry_budget):
        mask = (rng.random((n, n)) < edge_prob) & off_diagonal
        # mask[l, i]: i transmits to l
        g = Digraph(n, zip(*map(np.ndarray.tolist, np.nonzero(mask))))
        if g.strongly_connected:
            return g
    raise GraphGenerationError(
        f"no strongly connected digraph found in {retry_budget} draws "
        f"(n={n}, edge_prob={edge_prob}); edge_prob is likely too small for n"
    )


def read_edge_list(path: str | Path, n: int | None = None) -> Digraph:
    """Read ``i j`` lines (node ``i`` transmits to node ``j``); ``#`` starts a comment."""
    links = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        try:
            links.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise GraphError(f"{path}:{lineno}: node ids must be integers, got {raw!r}") from None
    if n is None:
        n = 1 + max((max(p) for p in links), default=-1)
    return Digraph.from_links(n, links)
