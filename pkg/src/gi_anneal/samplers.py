"""Classical stand-ins for the annealer: exact enumeration and simulated annealing."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import exp
from typing import Union

import numba
import numpy as np

from .chimera import EmbeddedIsing, apply_gauge
from .hamiltonian import IsingProblem, QuboProblem, qubo_to_ising
from .seeding import seed_sequence

DEFAULT_LIMIT = 26
DEFAULT_READS = 40000
DEFAULT_SWEEPS = 100
DEFAULT_BETA_RANGE = (0.1, 5.0)


class ModelTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class JobParams:
    reads: int = DEFAULT_READS
    sweeps: int = DEFAULT_SWEEPS
    beta_range: tuple[float, float] = DEFAULT_BETA_RANGE
    seed: int = 0
    # hardware settings with no classical analogue; carried as metadata only
    anneal_time_us: float = 20.0
    thermalization_ms: float = 10.0
    readout_thermalization_ms: float = 0.0

    def __post_init__(self):
        if self.reads < 1 or self.sweeps < 1:
            raise ValueError("reads and sweeps must be at least 1")
        lo, hi = self.beta_range
        if not 0 < lo <= hi:
            raise ValueError("beta_range must satisfy 0 < start <= end")

    def betas(self) -> np.ndarray:
        lo, hi = self.beta_range
        return np.geomspace(lo, hi, self.sweeps)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Distinct spin rows with multiplicities.

    ``states`` rows are unique and lexicographically sorted, so two runs that
    drew the same multiset of reads compare equal regardless of read order.
    """

    variables: tuple
    states: np.ndarray
    counts: np.ndarray
    energies: list
    reads: int
    backend: str
    job: int = 0
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.counts)

    def lowest(self):
        return min(self.energies) if self.energies else None

    def to_text(self) -> str:
        lines = [f"{len(self.variables)} {self.reads}"]
        for s, c, e in zip(self.states, self.counts, self.energies):
            spins = "".join("+" if x > 0 else "-" for x in s)
            lines.append(f"{e!r} {int(c)} {spins}" if isinstance(e, float) else f"{e} {int(c)} {spins}")
        return "\n".join(lines) + "\n"


def aggregate(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(states) == 0:
        return states.reshape(0, states.shape[1] if states.ndim == 2 else 0), np.zeros(0, dtype=np.int64)
    uniq, counts = np.unique(states, axis=0, return_counts=True)
    return uniq.astype(np.int8), counts.astype(np.int64)


@numba.njit(cache=True)
def _gray_scan(h, Jd, offset, stop_at, use_stop, target, collect, max_out):
    """Enumerate all spin states in Gray-code order.

    Returns (min energy, gray codes of states whose energy equals ``target``
    when ``collect`` is set, number of such states).
    """
    n = h.shape[0]
    s = -np.ones(n, dtype=np.int64)
    f = h.copy()
    for k in range(n):
        for j in range(n):
            f[k] += Jd[k, j] * s[j]
    e = offset
    for k in range(n):
        e += h[k] * s[k]
        for j in range(k + 1, n):
            e += Jd[k, j] * s[k] * s[j]
    best = e
    out = np.empty(max_out, dtype=np.int64)
    found = 0
    if collect and e == target:
        out[0] = 0
        found = 1
    if use_stop and e <= stop_at:
        return best, out[:found], found
    total = np.int64(1) << n
    for t in range(1, total):
        k = 0
        while (t >> k) & 1 == 0:
            k += 1
        e -= 2 * s[k] * f[k]
        s[k] = -s[k]
        for j in range(n):
            if Jd[j, k] != 0:
                f[j] += 2 * Jd[j, k] * s[k]
        if e < best:
            best = e
        if collect and e == target:
            if found < max_out:
                out[found] = t ^ (t >> 1)
            found += 1
        if use_stop and e <= stop_at:
            break
    return best, out[:min(found, max_out)], found


@dataclass(frozen=True)
class GroundStates:
    energy: Fraction
    states: np.ndarray
    n_ground: int

    @property
    def complete(self) -> bool:
        return len(self.states) == self.n_ground


def brute_force(m: IsingProblem, limit: int = DEFAULT_LIMIT, max_states: int = 1 << 16) -> GroundStates:
    """Exact minimum over all 2^n spin states, plus the ground states (at most ``max_states``)."""
    if m.n > limit:
        raise ModelTooLarge(f"{m.n} variables exceeds brute-force limit {limit}")
    sc = m.scaled
    h = sc.h.astype(np.int64)
    Jd = sc.dense_J()
    best, _, _ = _gray_scan(h, Jd, np.int64(sc.offset), np.int64(0), False, np.int64(0), False, 1)
    _, codes, total = _gray_scan(h, Jd, np.int64(sc.offset), np.int64(0), False, np.int64(best), True, max_states)
    bits = (codes[:, None] >> np.arange(m.n)[None, :]) & 1
    states = (2 * bits - 1).astype(np.int8)
    order = np.lexsort(states.T[::-1]) if len(states) else np.zeros(0, dtype=np.int64)
    return GroundStates(Fraction(int(best), sc.denominator), states[order], int(total))


def qubo_minimum(q: QuboProblem, limit: int = DEFAULT_LIMIT, lower_bound: int | None = None) -> int:
    """Exact QUBO minimum by enumeration.

    With ``lower_bound`` the scan stops as soon as a state reaches it; only
    pass a value that is a proven lower bound (0 for the penalty models here).
    """
    if q.n > limit:
        raise ModelTooLarge(f"{q.n} variables exceeds brute-force limit {limit}")
    sc = qubo_to_ising(q).scaled
    use_stop = lower_bound is not None
    stop = np.int64(lower_bound * sc.denominator if use_stop else 0)
    best, _, _ = _gray_scan(sc.h, sc.dense_J(), np.int64(sc.offset), stop, use_stop, np.int64(0), False, 1)
    value = Fraction(int(best), sc.denominator)
    assert value.denominator == 1
    return int(value)


@numba.njit(cache=True)
def _anneal(h, indptr, indices, data, betas, seeds, out):
    n = h.shape[0]
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        s = out[r]
        for i in range(n):
            s[i] = 1 if np.random.random() < 0.5 else -1
        for b in range(betas.shape[0]):
            beta = betas[b]
            for i in range(n):
                f = h[i]
                for p in range(indptr[i], indptr[i + 1]):
                    f += data[p] * s[indices[p]]
                de = -2.0 * s[i] * f
                if de <= 0.0 or np.random.random() < exp(-beta * de):
                    s[i] = -s[i]


def _read_seeds(seed: int, reads: int) -> np.ndarray:
    # one 31-bit seed per read, independent of how reads are batched
    return (seed_sequence(seed, "reads").generate_state(reads, dtype=np.uint32) >> 1).astype(np.int64)


def _logical_arrays(m: IsingProblem):
    h = np.array([float(x) for x in m.h])
    n = m.n
    rows, cols, data = [], [], []
    for (a, b), w in m.J.items():
        rows += [a, b]
        cols += [b, a]
        data += [float(w), float(w)]
    order = np.lexsort((cols, rows)) if rows else np.zeros(0, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)[order]
    cols = np.asarray(cols, dtype=np.int64)[order]
    data = np.asarray(data, dtype=np.float64)[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return h, np.cumsum(indptr), cols, data


def simulated_anneal(model: Union[EmbeddedIsing, IsingProblem], p: JobParams, job: int = 0) -> SampleSet:
    """Independent single-spin Metropolis anneals, one per read, on a geometric beta schedule."""
    if isinstance(model, EmbeddedIsing):
        h = model.h.astype(np.float64)
        indptr, indices, data = model.csr()
        variables = model.qubits
    else:
        h, indptr, indices, data = _logical_arrays(model)
        variables = model.variables
    n = len(h)
    out = np.zeros((p.reads, n), dtype=np.int8)
    if n:
        _anneal(h, indptr, indices, data, p.betas(), _read_seeds(p.seed, p.reads), out)
    states, counts = aggregate(out)
    if isinstance(model, EmbeddedIsing):
        energies = [float(e) for e in model.energies(states)] if len(states) else []
    else:
        energies = model.energies(states) if len(states) else []
    return SampleSet(tuple(variables), states, counts, energies, p.reads, "sa", job,
                     {"sweeps": p.sweeps, "beta_range": list(p.beta_range), "seed": p.seed})


def run_job(em: EmbeddedIsing, p: JobParams, job: int = 0) -> SampleSet:
    """Sample the gauged model, then map reads back to the ungauged frame."""
    raw = simulated_anneal(em, p, job)
    a = em.gauge.astype(np.int8)
    states, counts = aggregate(np.repeat(raw.states * a[None, :], raw.counts, axis=0))
    base = em.ungauged()
    energies = [float(e) for e in base.energies(states)] if len(states) else []
    meta = dict(raw.metadata)
    meta.update(anneal_time_us=p.anneal_time_us, thermalization_ms=p.thermalization_ms,
                readout_thermalization_ms=p.readout_thermalization_ms)
    return SampleSet(em.qubits, states, counts, energies, p.reads, "sa", job, meta)


__all__ = [
    "JobParams",
    "SampleSet",
    "GroundStates",
    "ModelTooLarge",
    "brute_force",
    "qubo_minimum",
    "simulated_anneal",
    "run_job",
    "apply_gauge",
]
