"""Post-processing: chain decoding, logical energies, success statistics, and the multi-job solve loop."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, log, prod
from typing import Sequence

import numpy as np

from .chimera import (
    DEFAULT_SCALE,
    DEFAULT_TRIES,
    Embedding,
    EmbeddingError,
    HardwareGraph,
    apply_gauge,
    default_hardware,
    embed_ising,
    find_embedding_for,
)
from .graphs import Graph, is_valid_isomorphism
from .hamiltonian import H2, IsingProblem, QuboProblem, compile_pair, qubo_energy, spins_to_bits
from .samplers import JobParams, SampleSet, run_job
from .seeding import derive_seed

log_ = logging.getLogger(__name__)

DEFAULT_KMAX = 9
DEFAULT_TARGET = 0.99
ANNEAL_TIME_US = 20.0


class DecodeStrategy(str, enum.Enum):
    DISCARD = "discard"
    MAJORITY_VOTE = "majority_vote"


class Classification(str, enum.Enum):
    ISOMORPHIC = "Isomorphic"
    NOT_ESTABLISHED = "NotEstablished"
    TRIVIALLY_NON_ISOMORPHIC = "TriviallyNonIsomorphic"


def unembed(sample: Sequence[int], e: Embedding, strategy: DecodeStrategy,
            qubits: Sequence[int] | None = None) -> np.ndarray | None:
    """Collapse each chain to one logical spin; ``None`` when discarding a broken sample.

    ``sample`` is indexed by physical qubit id, or aligned with ``qubits`` when given.
    """
    out = unembed_many(np.atleast_2d(np.asarray(sample)), e, strategy, qubits)
    return out[0] if len(out) else None


def _chain_sums(samples: np.ndarray, e: Embedding, qubits: Sequence[int] | None) -> tuple[np.ndarray, np.ndarray]:
    if qubits is not None:
        pos = {q: i for i, q in enumerate(qubits)}
        cols = [[pos[q] for q in c] for c in e.chains]
    else:
        cols = [list(c) for c in e.chains]
    s = samples.astype(np.int64)
    sums = np.stack([s[:, c].sum(axis=1) for c in cols], axis=1)
    sizes = np.array([len(c) for c in cols], dtype=np.int64)
    return sums, sizes


def unembed_many(samples: np.ndarray, e: Embedding, strategy: DecodeStrategy,
                 qubits: Sequence[int] | None = None, keep_rows: bool = False):
    """Vectorized ``unembed`` over rows.

    Returns the decoded spin rows; with ``keep_rows`` also the indices of the
    input rows that survived (all rows under majority vote).
    """
    strategy = DecodeStrategy(strategy)
    samples = np.atleast_2d(np.asarray(samples))
    if samples.shape[0] == 0:
        empty = np.zeros((0, len(e.chains)), dtype=np.int8)
        return (empty, np.zeros(0, dtype=np.int64)) if keep_rows else empty
    sums, sizes = _chain_sums(samples, e, qubits)
    if strategy is DecodeStrategy.DISCARD:
        intact = np.all(np.abs(sums) == sizes[None, :], axis=1)
        rows = np.flatnonzero(intact)
        decoded = np.sign(sums[rows]).astype(np.int8)
    else:
        rows = np.arange(samples.shape[0])
        decoded = np.where(sums >= 0, 1, -1).astype(np.int8)
    return (decoded, rows) if keep_rows else decoded


def broken_rows(samples: np.ndarray, e: Embedding, qubits: Sequence[int] | None = None) -> np.ndarray:
    sums, sizes = _chain_sums(np.atleast_2d(samples), e, qubits)
    return ~np.all(np.abs(sums) == sizes[None, :], axis=1)


@dataclass(frozen=True)
class DecodedSample:
    spins: np.ndarray
    energy: Fraction
    count: int
    broken: bool


def logical_energies(samples: SampleSet, e: Embedding, m: IsingProblem,
                     strategy: DecodeStrategy) -> list[DecodedSample]:
    """Decode every distinct sample row and attach its exact logical energy (offset included)."""
    decoded, rows = unembed_many(samples.states, e, strategy, samples.variables, keep_rows=True)
    if len(rows) == 0:
        return []
    broken = broken_rows(samples.states[rows], e, samples.variables)
    energies = m.energies(decoded)
    return [DecodedSample(d, en, int(samples.counts[r]), bool(b))
            for d, en, r, b in zip(decoded, energies, rows, broken)]


def p_zero(decoded: Sequence[DecodedSample], reads: int) -> float:
    """Fraction of all reads, discarded ones included, that decode to zero energy."""
    if reads < 1:
        raise ValueError("reads must be at least 1")
    return sum(d.count for d in decoded if d.energy == 0) / reads


def pooled_p_zero(ps: Sequence[float]) -> float:
    """``1 - prod(1 - p_k) ** (1 / K)``: one minus the geometric mean of the failure probabilities."""
    ps = list(ps)
    if not ps:
        raise ValueError("need at least one job probability")
    if any(not 0.0 <= p <= 1.0 for p in ps):
        raise ValueError("probabilities must lie in [0, 1]")
    if len(ps) == 1:
        return ps[0]
    return 1.0 - prod(1.0 - p for p in ps) ** (1.0 / len(ps))


def repetitions(p: float, target: float = DEFAULT_TARGET) -> int | None:
    """Anneals needed to reach ``target`` cumulative success; ``None`` when ``p == 0`` (cannot estimate)."""
    if not 0.0 <= p <= 1.0 or not 0.0 < target < 1.0:
        raise ValueError("need 0 <= p <= 1 and 0 < target < 1")
    if p == 0.0:
        return None
    if p >= target:
        return 1
    return max(1, ceil(log(1.0 - target) / log(1.0 - p)))


@dataclass(frozen=True)
class JobStats:
    k: int
    reads: int
    zero_reads: int
    broken_reads: int
    embedded: bool = True
    qubits: int = 0

    @property
    def p0(self) -> float:
        return self.zero_reads / self.reads if self.reads else 0.0


@dataclass(frozen=True)
class SolveConfig:
    hamiltonian: str = H2
    strategy: DecodeStrategy = DecodeStrategy.MAJORITY_VOTE
    k_max: int = DEFAULT_KMAX
    tries: int = DEFAULT_TRIES
    scale: float = DEFAULT_SCALE
    chain_strength: float = -1.0
    job: JobParams = field(default_factory=JobParams)
    seed: int = 0
    short_circuit: bool = True
    target: float = DEFAULT_TARGET
    anneal_time_us: float = ANNEAL_TIME_US

    def __post_init__(self):
        object.__setattr__(self, "strategy", DecodeStrategy(self.strategy))
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")


@dataclass(frozen=True)
class SolveVerdict:
    classification: Classification
    witness: tuple[int, ...] | None
    jobs: tuple[JobStats, ...]
    pooled_p0: float | None
    repetitions: int | None
    expected_anneal_time_us: float | None
    unembeddable: bool = False
    problem_id: str = ""

    @property
    def k(self) -> int:
        return len(self.jobs)

    @property
    def embedded(self) -> bool:
        return any(j.embedded for j in self.jobs)

    def to_record(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "classification": self.classification.value,
            "K": self.k,
            "p0_per_job": [j.p0 for j in self.jobs],
            "pooled_p0": self.pooled_p0,
            "R": self.repetitions,
            "expected_anneal_time_us": self.expected_anneal_time_us,
            "unembeddable": self.unembeddable,
            "witness": list(self.witness) if self.witness is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def witness_from_bits(q: QuboProblem, bits: Sequence[int], g1: Graph, g2: Graph) -> tuple[int, ...] | None:
    """Read a full vertex mapping (``g2`` -> ``g1``) off a zero-energy assignment.

    Vertices without variables (isolated ones under the compact model) are
    paired up in index order. Returns ``None`` unless the mapping checks out
    against both adjacency matrices.
    """
    if qubo_energy(q, bits) != 0:
        return None
    mapping = [-1] * g2.n
    taken = set()
    for (u, i), b in zip(q.variables, bits):
        if b:
            if mapping[u] != -1 or i in taken:
                return None
            mapping[u] = i
            taken.add(i)
    free1 = [i for i in range(g1.n) if i not in taken]
    free2 = [u for u in range(g2.n) if mapping[u] == -1]
    if len(free1) != len(free2):
        return None
    for u, i in zip(free2, free1):
        mapping[u] = i
    out = tuple(mapping)
    return out if is_valid_isomorphism(g1, g2, out) else None


def _trivially_non_isomorphic(q: QuboProblem) -> bool:
    # some modeled vertex has no candidate partner, so zero energy is out of reach
    return q.uncovered_constraints > 0


def _finish(cls, witness, jobs, cfg, unembeddable=False, problem_id="") -> SolveVerdict:
    measured = [j.p0 for j in jobs if j.embedded]
    pooled = pooled_p_zero(measured) if measured else None
    reps = repetitions(pooled, cfg.target) if pooled is not None else None
    t = reps * cfg.anneal_time_us if reps is not None else None
    return SolveVerdict(cls, witness, tuple(jobs), pooled, reps, t, unembeddable, problem_id)


def _job_samples(m: IsingProblem, cfg: SolveConfig, hw: HardwareGraph, k: int):
    """Embedding and un-gauged samples for job ``k``; ``(None, None)`` when no embedding is found."""
    try:
        e = find_embedding_for(m, hw, tries=cfg.tries, seed=derive_seed(cfg.seed, "embed", k))
    except EmbeddingError:
        return None, None
    if e is None:
        return None, None
    em = embed_ising(m, e, hw, cfg.scale, cfg.chain_strength)
    em = apply_gauge(em, seed=derive_seed(cfg.seed, "gauge", k))
    params = JobParams(**{**cfg.job.__dict__, "seed": derive_seed(cfg.seed, "job", k)})
    return e, run_job(em, params, k)


def solve_gi_strategies(g1: Graph, g2: Graph, cfg: SolveConfig, strategies: Sequence[DecodeStrategy],
                        hw: HardwareGraph | None = None, problem_id: str = "") -> dict[DecodeStrategy, SolveVerdict]:
    """Decode one shared stream of jobs under several strategies.

    Jobs depend only on the seed and job index, so each verdict equals what
    ``solve_gi`` returns for that strategy alone; sharing just avoids redoing
    the embedding and sampling.
    """
    if g1.n != g2.n:
        raise ValueError(f"graphs have {g1.n} and {g2.n} vertices")
    strategies = [DecodeStrategy(s) for s in strategies]
    hw = hw or default_hardware()
    c = compile_pair(g1, g2, cfg.hamiltonian, connect=True)
    q = c.qubo
    if q.n == 0 and q.uncovered_constraints == 0:
        # nothing to model: both graphs are edgeless
        v = _finish(Classification.ISOMORPHIC, tuple(range(g1.n)), [], cfg, problem_id=problem_id)
        return {s: v for s in strategies}
    if cfg.short_circuit and _trivially_non_isomorphic(q):
        v = _finish(Classification.TRIVIALLY_NON_ISOMORPHIC, None, [], cfg, problem_id=problem_id)
        return {s: v for s in strategies}
    m = c.prepared
    jobs: dict[DecodeStrategy, list[JobStats]] = {s: [] for s in strategies}
    done: dict[DecodeStrategy, SolveVerdict] = {}
    for k in range(cfg.k_max):
        pending = [s for s in strategies if s not in done]
        if not pending:
            break
        e, samples = _job_samples(m, cfg, hw, k)
        if e is None:
            for s in pending:
                jobs[s].append(JobStats(k, 0, 0, 0, embedded=False))
            continue
        broken = int(samples.counts[broken_rows(samples.states, e, samples.variables)].sum())
        for s in pending:
            decoded = logical_energies(samples, e, m, s)
            zero = [d for d in decoded if d.energy == 0]
            jobs[s].append(JobStats(k, samples.reads, sum(d.count for d in zero), broken, True, e.n_qubits))
            for d in zero:
                w = witness_from_bits(q, spins_to_bits(d.spins[: q.n]), g1, g2)
                if w is not None:
                    done[s] = _finish(Classification.ISOMORPHIC, w, jobs[s], cfg, problem_id=problem_id)
                    break
                log_.warning("zero-energy read did not yield a valid witness")
    for s in strategies:
        if s not in done:
            unembeddable = not any(j.embedded for j in jobs[s])
            done[s] = _finish(Classification.NOT_ESTABLISHED, None, jobs[s], cfg, unembeddable, problem_id)
    return {s: done[s] for s in strategies}


def solve_gi(g1: Graph, g2: Graph, cfg: SolveConfig = SolveConfig(), hw: HardwareGraph | None = None,
             problem_id: str = "") -> SolveVerdict:
    """Run the compile / embed / sample / decode loop for up to ``cfg.k_max`` jobs.

    Each job draws a fresh embedding and gauge. The loop stops at the first
    read whose decoded assignment has QUBO energy exactly zero.
    """
    return solve_gi_strategies(g1, g2, cfg, [cfg.strategy], hw, problem_id)[cfg.strategy]
