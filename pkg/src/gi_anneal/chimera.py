"""Chimera hardware graphs, heuristic minor embedding, and embedded-problem parameters.

Qubit numbering follows the usual linear Chimera convention::

    q = ((row * n + col) * 2 + shore) * l + k

Shore 0 qubits couple vertically to the same ``k`` in the cell below; shore 1
qubits couple horizontally to the same ``k`` in the cell to the right; the two
shores of a cell form a complete bipartite ``K_{l,l}``.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numba
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .hamiltonian import IsingProblem, components
from .seeding import derive_rng

log = logging.getLogger(__name__)

# Seed for the default 8-dead-qubit mask on Chimera(8, 8, 4); chosen so the
# working graph has 504 qubits and 1427 couplers.
DEFAULT_MASK_SEED = 7
DEFAULT_TRIES = 10
DEFAULT_SCALE = 0.2
# full programmable ranges: |h| <= 2, |J| <= 1
H_RANGE = 2.0
J_RANGE = 1.0


class EmbeddingError(ValueError):
    """The problem graph is not acceptable to the embedder."""


@dataclass(frozen=True, eq=False)
class HardwareGraph:
    m: int
    n: int
    l: int
    dead: frozenset[int] = frozenset()

    @property
    def n_total(self) -> int:
        return self.m * self.n * 2 * self.l

    def linear(self, row: int, col: int, shore: int, k: int) -> int:
        return ((row * self.n + col) * 2 + shore) * self.l + k

    def coord(self, q: int) -> tuple[int, int, int, int]:
        k = q % self.l
        rest = q // self.l
        shore = rest % 2
        cell = rest // 2
        return cell // self.n, cell % self.n, shore, k

    @cached_property
    def full_couplers(self) -> tuple[tuple[int, int], ...]:
        out = []
        for r in range(self.m):
            for c in range(self.n):
                for k in range(self.l):
                    for k2 in range(self.l):
                        out.append((self.linear(r, c, 0, k), self.linear(r, c, 1, k2)))
                    if r + 1 < self.m:
                        out.append((self.linear(r, c, 0, k), self.linear(r + 1, c, 0, k)))
                    if c + 1 < self.n:
                        out.append((self.linear(r, c, 1, k), self.linear(r, c + 1, 1, k)))
        return tuple(sorted((min(a, b), max(a, b)) for a, b in out))

    @cached_property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n_total) if q not in self.dead)

    @cached_property
    def couplers(self) -> tuple[tuple[int, int], ...]:
        return tuple((a, b) for a, b in self.full_couplers if a not in self.dead and b not in self.dead)

    @cached_property
    def neighbors(self) -> dict[int, frozenset[int]]:
        nb: dict[int, set[int]] = {q: set() for q in self.qubits}
        for a, b in self.couplers:
            nb[a].add(b)
            nb[b].add(a)
        return {q: frozenset(s) for q, s in nb.items()}

    @cached_property
    def coupler_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.couplers)

    def has_coupler(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.coupler_set

    @cached_property
    def _dense(self) -> tuple[np.ndarray, dict[int, int], np.ndarray, np.ndarray]:
        ids = np.array(self.qubits, dtype=np.int64)
        pos = {q: i for i, q in enumerate(self.qubits)}
        indptr = [0]
        indices: list[int] = []
        for q in self.qubits:
            indices.extend(sorted(pos[w] for w in self.neighbors[q]))
            indptr.append(len(indices))
        return ids, pos, np.array(indptr, dtype=np.int32), np.array(indices, dtype=np.int32)


def chimera(m: int, n: int, l: int = 4, dead: Iterable[int] = ()) -> HardwareGraph:
    """Chimera(m, n, l) with the given qubits removed."""
    if m < 1 or n < 1 or l < 1:
        raise ValueError("chimera dimensions must be positive")
    dead = frozenset(int(q) for q in dead)
    total = m * n * 2 * l
    bad = sorted(q for q in dead if not 0 <= q < total)
    if bad:
        raise ValueError(f"dead qubit ids out of range [0, {total}): {bad}")
    return HardwareGraph(m, n, l, dead)


def random_mask(m: int, n: int, l: int, n_dead: int, seed: int) -> frozenset[int]:
    rng = derive_rng(seed, "mask", m, n, l)
    return frozenset(int(q) for q in rng.choice(m * n * 2 * l, size=n_dead, replace=False))


def default_hardware() -> HardwareGraph:
    """Chimera(8, 8, 4) with 8 seeded dead qubits: 504 qubits, 1427 couplers."""
    return chimera(8, 8, 4, random_mask(8, 8, 4, 8, DEFAULT_MASK_SEED))


def parse_mask(text: str) -> frozenset[int]:
    """Dead-qubit ids, whitespace or comma separated; ``#`` starts a comment."""
    ids = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].replace(",", " ")
        ids.extend(int(tok) for tok in line.split())
    return frozenset(ids)


def write_mask(dead: Iterable[int]) -> str:
    return "\n".join(str(q) for q in sorted(dead)) + "\n"


@dataclass(frozen=True, eq=False)
class Embedding:
    """``chains[v]`` holds the physical qubits for logical variable ``v``.

    ``couplers[(a, b)]`` (``a < b``) is the single physical coupler ``(qa, qb)``,
    ``qa`` in chain ``a`` and ``qb`` in chain ``b``, that carries logical ``J[a, b]``.
    """

    chains: tuple[tuple[int, ...], ...]
    couplers: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return sum(len(c) for c in self.chains)

    @property
    def max_chain(self) -> int:
        return max((len(c) for c in self.chains), default=0)

    def to_text(self) -> str:
        return "".join(f"{v}: {' '.join(map(str, c))}\n" for v, c in enumerate(self.chains))


def parse_embedding(text: str) -> tuple[tuple[int, ...], ...]:
    chains = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        var, _, rest = line.partition(":")
        chains[int(var)] = tuple(int(q) for q in rest.split())
    return tuple(chains[v] for v in range(len(chains)))


def designate_couplers(
    chains: Sequence[Sequence[int]], edges: Iterable[tuple[int, int]], hw: HardwareGraph
) -> dict[tuple[int, int], tuple[int, int]]:
    """Pick the lowest ``(qa, qb)`` hardware coupler between each pair of linked chains."""
    out = {}
    for a, b in edges:
        a, b = min(a, b), max(a, b)
        cb = set(chains[b])
        best = None
        for qa in sorted(chains[a]):
            for qb in sorted(hw.neighbors.get(qa, ())):
                if qb in cb:
                    best = (qa, qb)
                    break
            if best:
                break
        if best is not None:
            out[(a, b)] = best
    return out


def validate_embedding(e: Embedding, edges: Iterable[tuple[int, int]], hw: HardwareGraph) -> list[str]:
    """Return human-readable violations; an empty list means the embedding is valid."""
    problems: list[str] = []
    owner: dict[int, int] = {}
    for v, chain in enumerate(e.chains):
        if not chain:
            problems.append(f"empty chain: variable {v}")
            continue
        for q in chain:
            if q not in hw.neighbors:
                problems.append(f"non-working qubit: variable {v} uses qubit {q}")
            if q in owner:
                problems.append(f"disjointness: qubit {q} shared by variables {owner[q]} and {v}")
            owner[q] = v
        cs = set(chain)
        seen = {chain[0]}
        todo = [chain[0]]
        while todo:
            q = todo.pop()
            for w in hw.neighbors.get(q, ()):
                if w in cs and w not in seen:
                    seen.add(w)
                    todo.append(w)
        if seen != cs:
            problems.append(f"connectivity: chain of variable {v} is not connected")
    for a, b in edges:
        if a >= len(e.chains) or b >= len(e.chains):
            problems.append(f"coverage: coupling ({a}, {b}) refers to a missing chain")
            continue
        cb = set(e.chains[b])
        if not any(w in cb for q in e.chains[a] for w in hw.neighbors.get(q, ())):
            problems.append(f"coverage: no coupler between chains of ({a}, {b})")
            continue
        key = (min(a, b), max(a, b))
        c = e.couplers.get(key)
        if c is not None:
            qa, qb = c
            if not (qa in e.chains[key[0]] and qb in e.chains[key[1]] and hw.has_coupler(qa, qb)):
                problems.append(f"coverage: designated coupler {c} does not join chains {key}")
    return problems


@numba.njit(cache=True)
def _still_connected(owner, indptr, indices, q, u, size_u, stack, mark, stamp):
    # would chain u stay connected without qubit q?
    start = -1
    for p in range(indptr[q], indptr[q + 1]):
        if owner[indices[p]] == u:
            start = indices[p]
            break
    if start < 0:
        return False
    top = 1
    stack[0] = start
    mark[start] = stamp
    mark[q] = stamp
    seen = 1
    while top > 0:
        top -= 1
        x = stack[top]
        for p in range(indptr[x], indptr[x + 1]):
            y = indices[p]
            if owner[y] == u and mark[y] != stamp:
                mark[y] = stamp
                seen += 1
                stack[top] = y
                top += 1
    return seen == size_u - 1


@numba.njit(cache=True)
def _shift(owner, C, R, indptr, indices, q, u, v, sign):
    # apply (sign=1) or undo (sign=-1) the coupler-count change of moving q from chain u to chain v;
    # returns the change in missing required adjacencies
    dm = 0
    for p in range(indptr[q], indptr[q + 1]):
        o = owner[indices[p]]
        if o < 0:
            continue
        if u >= 0 and o != u:
            C[u, o] -= sign
            C[o, u] -= sign
            if R[u, o]:
                if sign == 1 and C[u, o] == 0:
                    dm += 1
                elif sign == -1 and C[u, o] == 1:
                    dm -= 1
        if v >= 0 and o != v:
            C[v, o] += sign
            C[o, v] += sign
            if R[v, o]:
                if sign == 1 and C[v, o] == 1:
                    dm -= 1
                elif sign == -1 and C[v, o] == 0:
                    dm += 1
    return dm


@numba.njit(cache=True)
def _anneal_chains(owner, R, indptr, indices, seed, n_steps, t0, t1, lam, p_shrink, polish):
    """Anneal over qubit ownership, keeping chains disjoint and connected.

    Moves hand a qubit next to chain v over to v (taking it from its owner if
    that owner stays connected) or release a qubit. Cost is the number of
    missing required adjacencies plus ``lam`` per used qubit. Returns the
    number still missing; ``owner`` is updated in place. With ``polish`` no
    adjacency is ever given up and the run continues to shed qubits.
    """
    np.random.seed(seed)
    nq = owner.shape[0]
    n = R.shape[0]
    size = np.zeros(n, dtype=np.int64)
    for q in range(nq):
        if owner[q] >= 0:
            size[owner[q]] += 1
    C = np.zeros((n, n), dtype=np.int64)
    for q in range(nq):
        a = owner[q]
        if a < 0:
            continue
        for p in range(indptr[q], indptr[q + 1]):
            b = owner[indices[p]]
            if b >= 0 and b != a:
                C[a, b] += 1
    missing = 0
    for a in range(n):
        for b in range(a + 1, n):
            if R[a, b] and C[a, b] == 0:
                missing += 1
    if missing == 0 and not polish:
        return 0
    stack = np.empty(nq, dtype=np.int64)
    mark = np.zeros(nq, dtype=np.int64)
    stamp = 0
    factor = (t1 / t0) ** (1.0 / max(n_steps, 1))
    t = t0 / factor
    for _ in range(n_steps):
        t *= factor
        q0 = np.random.randint(nq)
        if owner[q0] < 0:
            continue
        if np.random.random() < p_shrink:
            q = q0
            u = owner[q]
            v = -1
        else:
            deg = indptr[q0 + 1] - indptr[q0]
            if deg == 0:
                continue
            q = indices[indptr[q0] + np.random.randint(deg)]
            v = owner[q0]
            u = owner[q]
            if u == v:
                continue
        if u >= 0:
            if size[u] == 1:
                continue
            stamp += 1
            if not _still_connected(owner, indptr, indices, q, u, size[u], stack, mark, stamp):
                continue
        dm = _shift(owner, C, R, indptr, indices, q, u, v, 1)
        dq = (1 if v >= 0 else 0) - (1 if u >= 0 else 0)
        d = dm + lam * dq
        if polish and dm > 0:
            _shift(owner, C, R, indptr, indices, q, u, v, -1)
            continue
        if d <= 0 or np.random.random() < np.exp(-d / t):
            owner[q] = v
            if u >= 0:
                size[u] -= 1
            if v >= 0:
                size[v] += 1
            missing += dm
            if missing == 0 and not polish:
                return 0
        else:
            _shift(owner, C, R, indptr, indices, q, u, v, -1)
    return missing


@dataclass(frozen=True)
class AnnealSettings:
    """Knobs of the chain-repair anneal; steps scale with the number of variables."""

    steps_per_var: int = 100_000
    t_start: float = 1.0
    t_end: float = 0.05
    qubit_cost: float = 0.05
    p_shrink: float = 0.3
    polish_steps_per_var: int = 200_000
    polish_temperature: float = 1.0
    polish_p_shrink: float = 0.5


class _Embedder:
    """One randomized try: greedy shortest-path placement, then annealed repair.

    Placement follows the Cai-Macready recipe (root minimizing the summed
    path length to already placed neighbours, chain = root plus those paths)
    but routes only through free qubits, so chains never overlap. Whatever
    adjacencies the greedy pass misses are then repaired by annealing.
    """

    def __init__(self, n_vars: int, edges: Sequence[tuple[int, int]], hw: HardwareGraph, rng: np.random.Generator,
                 settings: AnnealSettings = AnnealSettings()):
        self.n_vars = n_vars
        self.edges = edges
        self.adj: list[list[int]] = [[] for _ in range(n_vars)]
        self.R = np.zeros((n_vars, n_vars), dtype=np.uint8)
        for a, b in edges:
            self.adj[a].append(b)
            self.adj[b].append(a)
            self.R[a, b] = self.R[b, a] = 1
        self.ids, self.pos, self.indptr, self.indices = hw._dense
        self.nq = len(self.ids)
        self.rows = np.repeat(np.arange(self.nq), np.diff(self.indptr))
        self.rng = rng
        self.settings = settings

    def _bfs_order(self) -> list[int]:
        start = int(self.rng.integers(self.n_vars))
        order, seen = [], {start}
        todo = deque([start])
        while todo:
            v = todo.popleft()
            order.append(v)
            nbrs = list(self.adj[v])
            self.rng.shuffle(nbrs)
            for u in nbrs:
                if u not in seen:
                    seen.add(u)
                    todo.append(u)
        return order + [v for v in range(self.n_vars) if v not in seen]

    def _greedy(self) -> np.ndarray | None:
        nq = self.nq
        owner = -np.ones(nq, dtype=np.int64)
        unreachable = 4.0 * nq
        for v in self._bfs_order():
            free = owner < 0
            if not free.any():
                return None
            placed = [u for u in self.adj[v] if (owner == u).any()]
            if not placed:
                owner[int(self.rng.choice(np.flatnonzero(free)))] = v
                continue
            into_free = free[self.indices]
            cost = np.zeros(nq)
            routes = []
            for u in placed:
                chain = np.flatnonzero(owner == u)
                # steps into free qubits only, leaving from free qubits or from chain u
                ok = into_free & (free[self.rows] | (owner[self.rows] == u))
                ptr = np.concatenate([[0], np.cumsum(np.bincount(self.rows[ok], minlength=nq))])
                g = csr_matrix((np.ones(int(ok.sum())), self.indices[ok], ptr), shape=(nq, nq))
                dist, pred, _ = dijkstra(g, directed=True, indices=chain, return_predecessors=True, min_only=True)
                dist = np.where(np.isinf(dist), unreachable, dist)
                cost += dist
                routes.append((set(chain.tolist()), pred, dist))
            cost[~free] = np.inf
            root = int(self.rng.choice(np.flatnonzero(cost == cost.min())))
            members = {root}
            for chain, pred, dist in routes:
                if dist[root] >= unreachable:
                    continue
                q = root
                while q >= 0 and q not in chain:
                    members.add(q)
                    q = int(pred[q])
            owner[sorted(members)] = v
        return owner

    def run(self) -> list[np.ndarray] | None:
        owner = self._greedy()
        if owner is None:
            return None
        s = self.settings
        missing = _anneal_chains(owner, self.R, self.indptr, self.indices, int(self.rng.integers(2**31)),
                                 s.steps_per_var * self.n_vars, s.t_start, s.t_end, s.qubit_cost, s.p_shrink, False)
        if missing:
            log.debug("try left %d adjacencies unrealized", missing)
            return None
        if s.polish_steps_per_var:
            _anneal_chains(owner, self.R, self.indptr, self.indices, int(self.rng.integers(2**31)),
                           s.polish_steps_per_var * self.n_vars, s.polish_temperature, 0.01, 1.0, s.polish_p_shrink, True)
        return [np.sort(self.ids[owner == v]) for v in range(self.n_vars)]


def _clique_layouts(hw: HardwareGraph, k: int):
    """Native ``K_{l*k}`` layouts in every k x k sub-grid under the 8 grid symmetries.

    Chain ``(c, t)`` runs down column ``c`` (rows 0..c, shore 0) and along row
    ``c`` (columns c..k-1, shore 1), all at in-cell index ``t``; any two such
    chains meet in one cell on opposite shores.
    """
    for transpose in (False, True):
        for flip_r in (False, True):
            for flip_c in (False, True):
                rows, cols = (hw.n, hw.m) if transpose else (hw.m, hw.n)
                for r0 in range(rows - k + 1):
                    for c0 in range(cols - k + 1):
                        def q(r, c, shore, t):
                            r = k - 1 - r if flip_r else r
                            c = k - 1 - c if flip_c else c
                            r, c = r + r0, c + c0
                            if transpose:
                                return hw.linear(c, r, 1 - shore, t)
                            return hw.linear(r, c, shore, t)

                        chains = []
                        for c in range(k):
                            for t in range(hw.l):
                                vert = [q(r, c, 0, t) for r in range(c + 1)]
                                horiz = [q(c, r, 1, t) for r in range(c, k)]
                                chains.append(tuple(sorted(vert + horiz)))
                        yield chains


def clique_embedding(n_vars: int, edges: Iterable[tuple[int, int]], hw: HardwareGraph) -> Embedding | None:
    """Deterministic fallback: place variables on intact chains of a native clique layout."""
    edges = sorted({(min(a, b), max(a, b)) for a, b in edges if a != b})
    for k in range(1, min(hw.m, hw.n) + 1):
        if hw.l * k < n_vars:
            continue
        best = None
        for chains in _clique_layouts(hw, k):
            intact = [c for c in chains if not hw.dead.intersection(c)]
            if len(intact) >= n_vars and (best is None or len(intact) > len(best)):
                best = intact
        if best is not None:
            chosen = _prune([list(c) for c in best[:n_vars]], edges, hw)
            chains_t = tuple(tuple(sorted(c)) for c in chosen)
            return Embedding(chains_t, designate_couplers(chains_t, edges, hw))
    return None


def _prune(chains: list[list[int]], edges: Sequence[tuple[int, int]], hw: HardwareGraph) -> list[list[int]]:
    """Drop leaf qubits that are not needed for connectivity or any required adjacency."""
    nbrs: list[set[int]] = [set() for _ in chains]
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    owner = {q: v for v, c in enumerate(chains) for q in c}
    changed = True
    while changed:
        changed = False
        for v, chain in enumerate(chains):
            if len(chain) <= 1:
                continue
            cs = set(chain)
            for q in sorted(chain, reverse=True):
                inner = [w for w in hw.neighbors[q] if w in cs]
                if len(inner) != 1:
                    continue
                rest = cs - {q}
                ok = True
                for u in nbrs[v]:
                    if not any(owner.get(w) == u for x in rest for w in hw.neighbors[x]):
                        ok = False
                        break
                if ok:
                    cs = rest
                    del owner[q]
                    changed = True
            chains[v] = sorted(cs)
    return chains


def find_embedding(
    edges: Iterable[tuple[int, int]],
    hw: HardwareGraph,
    tries: int = DEFAULT_TRIES,
    seed: int = 0,
    n_vars: int | None = None,
    settings: AnnealSettings = AnnealSettings(),
    clique_fallback: bool = True,
) -> Embedding | None:
    """Heuristically minor-embed a connected problem graph; ``None`` after ``tries`` failed restarts.

    Each try is independent with its own derived seed. When every try fails,
    a deterministic native-clique layout is attempted as a last resort.
    """
    edges = sorted({(min(a, b), max(a, b)) for a, b in edges if a != b})
    if n_vars is None:
        n_vars = 1 + max((b for _, b in edges), default=-1)
    if n_vars < 2:
        raise EmbeddingError("problem must have at least two variables")
    labels = components(n_vars, edges)
    if labels.max() > 0:
        raise EmbeddingError("problem graph has more than one connected component")
    for t in range(tries):
        chains = _Embedder(n_vars, edges, hw, derive_rng(seed, "embed", t), settings).run()
        if chains is None:
            log.debug("embedding try %d failed", t)
            continue
        pruned = _prune([c.tolist() for c in chains], edges, hw)
        chains_t = tuple(tuple(int(q) for q in c) for c in pruned)
        e = Embedding(chains_t, designate_couplers(chains_t, edges, hw))
        if not validate_embedding(e, edges, hw):
            return e
    if clique_fallback:
        e = clique_embedding(n_vars, edges, hw)
        if e is not None and not validate_embedding(e, edges, hw):
            return e
    return None


def find_embedding_for(m: IsingProblem, hw: HardwareGraph, tries: int = DEFAULT_TRIES, seed: int = 0,
                       **kw) -> Embedding | None:
    return find_embedding(m.edges, hw, tries=tries, seed=seed, n_vars=m.n, **kw)


@dataclass(frozen=True, eq=False)
class EmbeddedIsing:
    """Physical Ising model over the qubits used by an embedding.

    Arrays are aligned with ``qubits``; ``pairs`` index into that tuple.
    ``h`` and ``J`` are the values as programmed, i.e. after ``gauge``.
    """

    qubits: tuple[int, ...]
    h: np.ndarray
    pairs: np.ndarray
    J: np.ndarray
    chain_mask: np.ndarray
    gauge: np.ndarray
    scale: float
    embedding: Embedding

    @property
    def n(self) -> int:
        return len(self.qubits)

    def energies(self, spins: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(np.asarray(spins, dtype=np.float64))
        e = s @ self.h
        if len(self.J):
            e = e + (s[:, self.pairs[:, 0]] * s[:, self.pairs[:, 1]]) @ self.J
        return e

    def chain_energy(self, spins: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(np.asarray(spins, dtype=np.float64))
        p = self.pairs[self.chain_mask]
        return (s[:, p[:, 0]] * s[:, p[:, 1]]) @ self.J[self.chain_mask]

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency (indptr, indices, data) for the sampler kernels."""
        n = self.n
        r = np.concatenate([self.pairs[:, 0], self.pairs[:, 1]])
        c = np.concatenate([self.pairs[:, 1], self.pairs[:, 0]])
        d = np.concatenate([self.J, self.J])
        mat = csr_matrix((d, (r, c)), shape=(n, n))
        mat.sort_indices()
        return mat.indptr.astype(np.int64), mat.indices.astype(np.int64), mat.data.astype(np.float64)

    def ungauged(self) -> "EmbeddedIsing":
        return apply_gauge(self, gauge=self.gauge)


def embed_ising(
    m: IsingProblem,
    e: Embedding,
    hw: HardwareGraph,
    scale_fraction: float = DEFAULT_SCALE,
    chain_strength: float = -1.0,
) -> EmbeddedIsing:
    """Spread fields over chains, place couplings on designated couplers, scale, then add chain couplers.

    A common factor brings ``max |h'|`` to ``scale_fraction * 2`` or
    ``max |J'|`` to ``scale_fraction * 1``, whichever binds first. Chain
    couplers are set to ``chain_strength`` afterwards and are not scaled.
    """
    problems = validate_embedding(e, m.edges, hw)
    if problems or len(e.chains) != m.n:
        raise EmbeddingError("invalid embedding: " + "; ".join(problems or ["chain count mismatch"]))
    qubits = tuple(sorted(q for c in e.chains for q in c))
    pos = {q: i for i, q in enumerate(qubits)}
    h = np.zeros(len(qubits))
    for v, chain in enumerate(e.chains):
        share = float(m.h[v]) / len(chain)
        for q in chain:
            h[pos[q]] = share
    logical_pairs, logical_J = [], []
    for (a, b), w in sorted(m.J.items()):
        if w == 0:
            continue
        qa, qb = e.couplers[(a, b)]
        logical_pairs.append((pos[qa], pos[qb]))
        logical_J.append(float(w))
    logical_J_arr = np.array(logical_J, dtype=float)
    hmax = float(np.abs(h).max()) if len(h) else 0.0
    jmax = float(np.abs(logical_J_arr).max()) if len(logical_J_arr) else 0.0
    limits = []
    if hmax > 0:
        limits.append(scale_fraction * H_RANGE / hmax)
    if jmax > 0:
        limits.append(scale_fraction * J_RANGE / jmax)
    scale = min(limits) if limits else 1.0
    h = h * scale
    logical_J_arr = logical_J_arr * scale
    chain_pairs = []
    for chain in e.chains:
        cs = sorted(chain)
        for i, qa in enumerate(cs):
            for qb in cs[i + 1:]:
                if hw.has_coupler(qa, qb):
                    chain_pairs.append((pos[qa], pos[qb]))
    pairs = np.array(logical_pairs + chain_pairs, dtype=np.int64).reshape(-1, 2)
    J = np.concatenate([logical_J_arr, np.full(len(chain_pairs), float(chain_strength))])
    mask = np.zeros(len(J), dtype=bool)
    mask[len(logical_pairs):] = True
    return EmbeddedIsing(qubits, h, pairs, J, mask, np.ones(len(qubits), dtype=np.int8), scale, e)


def apply_gauge(em: EmbeddedIsing, seed: int | None = None, gauge: Sequence[int] | None = None) -> EmbeddedIsing:
    """Spin-gauge transform ``h -> a h``, ``J_ij -> a_i a_j J_ij``; the recorded gauge composes."""
    if gauge is None:
        if seed is None:
            raise ValueError("apply_gauge needs a seed or an explicit gauge")
        a = derive_rng(seed, "gauge").choice(np.array([-1, 1], dtype=np.int8), size=em.n)
    else:
        a = np.asarray(gauge, dtype=np.int8)
        if a.shape != (em.n,) or not np.all(np.abs(a) == 1):
            raise ValueError("gauge must be a +-1 vector over the embedded qubits")
    af = a.astype(float)
    h = em.h * af
    J = em.J * af[em.pairs[:, 0]] * af[em.pairs[:, 1]] if len(em.J) else em.J.copy()
    return replace(em, h=h, J=J, gauge=(em.gauge * a).astype(np.int8))
