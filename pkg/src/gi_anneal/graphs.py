"""Simple undirected graphs, random generators, and an exact isomorphism oracle."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .seeding import derive_rng

Edge = tuple[int, int]
# mapping[u] = i sends vertex u of the second graph to vertex i of the first
VertexMapping = tuple[int, ...]
DegreeClasses = dict[int, frozenset[int]]

NONISO_MAX_TRIES = 1000


class GraphFormatError(ValueError):
    """Malformed graph text."""


class HeaderError(GraphFormatError):
    pass


class EndpointRangeError(GraphFormatError):
    pass


class DuplicateEdgeError(GraphFormatError):
    pass


class SelfLoopError(GraphFormatError):
    pass


class GenerationError(RuntimeError):
    """Rejection sampling exhausted its retry budget."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise SelfLoopError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise EndpointRangeError(f"edge ({u}, {v}) outside [0, {self.n})")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        return cls(n, frozenset((int(u), int(v)) for u, v in edges))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, frozenset(combinations(range(n), 2)))

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls(n, frozenset((i, (i + 1) % n) for i in range(n)) if n >= 3 else frozenset())

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.edges:
            a[u, v] = a[v, u] = True
        a.setflags(write=False)
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        d = self.adjacency.sum(axis=1).astype(np.int64)
        d.setflags(write=False)
        return d

    @cached_property
    def neighbors(self) -> tuple[frozenset[int], ...]:
        nb: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            nb[u].add(v)
            nb[v].add(u)
        return tuple(frozenset(s) for s in nb)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adjacency[u, v])

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel vertex ``i`` of ``g`` as ``perm[i]``."""
    if sorted(perm) != list(range(g.n)):
        raise ValueError("perm is not a permutation of the vertex set")
    return Graph(g.n, frozenset((perm[u], perm[v]) for u, v in g.edges))


def gen_er(n: int, p: float, seed: int) -> Graph:
    """Erdős-Rényi G(n, p): every vertex pair is an edge independently with probability p."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = derive_rng(seed, "er", n)
    pairs = list(combinations(range(n), 2))
    keep = rng.random(len(pairs)) < p
    return Graph(n, frozenset(e for e, k in zip(pairs, keep) if k))


def gen_iso_pair(n: int, p: float, seed: int) -> tuple[Graph, Graph, VertexMapping]:
    """Return ``(g1, g2, mapping)`` with ``g2`` a uniformly random relabeling of ``g1``.

    ``mapping[u]`` is the vertex of ``g1`` that vertex ``u`` of ``g2`` came from.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    g1 = gen_er(n, p, seed)
    perm = derive_rng(seed, "perm", n).permutation(n)
    g2 = permute(g1, [int(x) for x in perm])
    inverse = [0] * n
    for i, u in enumerate(perm):
        inverse[int(u)] = i
    return g1, g2, tuple(inverse)


def gen_noniso_pair(n: int, p: float, seed: int, max_tries: int = NONISO_MAX_TRIES) -> tuple[Graph, Graph]:
    """Draw independent G(n, p) pairs until the oracle says they are not isomorphic."""
    if n < 2:
        raise ValueError("n < 2 admits only isomorphic pairs")
    for attempt in range(max_tries):
        g1 = gen_er(n, p, _child_seed(seed, attempt, 0))
        g2 = gen_er(n, p, _child_seed(seed, attempt, 1))
        if is_isomorphic(g1, g2) is None:
            return g1, g2
    raise GenerationError(f"no non-isomorphic G({n}, {p}) pair in {max_tries} draws")


def _child_seed(seed: int, attempt: int, which: int) -> int:
    rng = derive_rng(seed, "noniso", attempt, which)
    return int(rng.integers(0, 2**62))


def degree_classes(g: Graph) -> DegreeClasses:
    """Group positive-degree vertices by degree."""
    out: dict[int, set[int]] = {}
    for v, d in enumerate(g.degrees):
        if d > 0:
            out.setdefault(int(d), set()).add(v)
    return {d: frozenset(vs) for d, vs in sorted(out.items())}


def _refine_colors(g1: Graph, g2: Graph) -> tuple[list[int], list[int]] | None:
    """Joint colour refinement; ``None`` when colour histograms already differ."""
    c1 = [int(d) for d in g1.degrees]
    c2 = [int(d) for d in g2.degrees]
    n_classes = -1
    while True:
        if Counter(c1) != Counter(c2):
            return None
        k = len(set(c1))
        if k == n_classes:
            return c1, c2
        n_classes = k
        sig1 = [(c1[v], tuple(sorted(c1[w] for w in g1.neighbors[v]))) for v in range(g1.n)]
        sig2 = [(c2[v], tuple(sorted(c2[w] for w in g2.neighbors[v]))) for v in range(g2.n)]
        palette = {s: i for i, s in enumerate(sorted(set(sig1) | set(sig2)))}
        c1 = [palette[s] for s in sig1]
        c2 = [palette[s] for s in sig2]


def is_isomorphic(g1: Graph, g2: Graph) -> VertexMapping | None:
    """Exact isomorphism test by backtracking over colour-refined candidates.

    Returns a mapping (vertex of ``g2`` -> vertex of ``g1``) when the graphs are
    isomorphic, otherwise ``None``.
    """
    if g1.n != g2.n or g1.m != g2.m:
        return None
    n = g1.n
    if n == 0:
        return ()
    colors = _refine_colors(g1, g2)
    if colors is None:
        return None
    c1, c2 = colors
    a1, a2 = g1.adjacency, g2.adjacency
    by_color: dict[int, list[int]] = {}
    for i in range(n):
        by_color.setdefault(c1[i], []).append(i)
    class_size = Counter(c2)

    # most constrained first, then grow along already-placed neighbours
    order: list[int] = []
    placed = [False] * n
    links = [0] * n
    for _ in range(n):
        best = min(
            (u for u in range(n) if not placed[u]),
            key=lambda u: (-links[u], class_size[c2[u]], -int(g2.degrees[u]), u),
        )
        order.append(best)
        placed[best] = True
        for w in g2.neighbors[best]:
            links[w] += 1

    mapping = [-1] * n
    used = [False] * n

    def extend(depth: int) -> bool:
        if depth == n:
            return True
        u = order[depth]
        prior = order[:depth]
        for i in by_color[c2[u]]:
            if used[i]:
                continue
            if all(a2[u, v] == a1[i, mapping[v]] for v in prior):
                mapping[u] = i
                used[i] = True
                if extend(depth + 1):
                    return True
                used[i] = False
                mapping[u] = -1
        return False

    if extend(0):
        return tuple(mapping)
    return None


def is_valid_isomorphism(g1: Graph, g2: Graph, mapping: Sequence[int]) -> bool:
    """Check a full mapping (``g2`` vertex -> ``g1`` vertex) against both adjacency matrices."""
    if g1.n != g2.n or len(mapping) != g2.n or sorted(mapping) != list(range(g1.n)):
        return False
    idx = np.asarray(mapping, dtype=np.int64)
    return bool(np.array_equal(g1.adjacency[np.ix_(idx, idx)], g2.adjacency))


def write_graph(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines += [f"{u} {v}" for u, v in g.sorted_edges()]
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> Graph:
    """Parse ``"n m"`` followed by ``m`` lines ``"u v"``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise HeaderError("empty graph text")
    head = lines[0].split()
    if len(head) != 2 or not all(_is_int(t) for t in head):
        raise HeaderError(f"bad header {lines[0]!r}; expected 'n m'")
    n, m = int(head[0]), int(head[1])
    if n < 0 or m < 0:
        raise HeaderError("negative vertex or edge count")
    body = lines[1:]
    if len(body) != m:
        raise HeaderError(f"header declares {m} edges but {len(body)} edge lines follow")
    seen: set[Edge] = set()
    for ln in body:
        toks = ln.split()
        if len(toks) != 2 or not all(_is_int(t) for t in toks):
            raise GraphFormatError(f"bad edge line {ln!r}")
        u, v = int(toks[0]), int(toks[1])
        if not (0 <= u < n and 0 <= v < n):
            raise EndpointRangeError(f"edge ({u}, {v}) outside [0, {n})")
        if u == v:
            raise SelfLoopError(f"self-loop at vertex {u}")
        e = (min(u, v), max(u, v))
        if e in seen:
            raise DuplicateEdgeError(f"duplicate edge {e}")
        seen.add(e)
    return Graph(n, frozenset(seen))


def write_pair(g1: Graph, g2: Graph) -> str:
    return write_graph(g1) + "\n" + write_graph(g2)


def parse_pair(text: str) -> tuple[Graph, Graph]:
    """Parse two graphs separated by one blank line."""
    blocks = [b for b in text.replace("\r\n", "\n").strip("\n").split("\n\n") if b.strip()]
    if len(blocks) != 2:
        raise GraphFormatError(f"expected 2 graphs separated by a blank line, found {len(blocks)}")
    return parse_graph(blocks[0]), parse_graph(blocks[1])


def _is_int(tok: str) -> bool:
    try:
        int(tok)
    except ValueError:
        return False
    return True
