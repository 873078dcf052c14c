"""Experiment drivers: variable/interaction scaling, embeddability, and solver accuracy."""

from __future__ import annotations

import csv
import io
import json
import logging
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .chimera import DEFAULT_TRIES, HardwareGraph, default_hardware, find_embedding_for
from .decode import DEFAULT_KMAX, DecodeStrategy, SolveConfig, solve_gi_strategies, Classification
from .graphs import Graph, gen_iso_pair, gen_noniso_pair
from .hamiltonian import H1, H2, compile_pair, count_terms
from .samplers import JobParams
from .seeding import derive_seed

log = logging.getLogger(__name__)

# reference power-law curves, carried in summaries for comparison only
REFERENCE_FITS = {
    "h2_vars": (0.748, 1.45),
    "h2_embed_qubits": (0.0723, 3.29),
    "h1_embed_qubits": (0.235, 4.22),
}
PERCENTILES = (35, 65)
MAX_REGENERATIONS = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    sizes: tuple[int, ...] = tuple(range(10, 101, 10))
    pairs: int = 100
    p: float = 0.5
    hamiltonians: tuple[str, ...] = (H1, H2)
    strategies: tuple[str, ...] = ("discard", "majority_vote")
    tries: int = DEFAULT_TRIES
    k_max: int = DEFAULT_KMAX
    seed: int = 0
    reads: int = 40000
    sweeps: int = 100
    beta_start: float = 0.1
    beta_end: float = 5.0
    chain_strength: float = -1.0
    scale: float = 0.2
    out_dir: str | None = None

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("sizes must be nonempty")
        if self.pairs < 2 or self.pairs % 2:
            raise ValueError("pairs must be a positive even number (half isomorphic, half not)")
        for h in self.hamiltonians:
            if h not in (H1, H2):
                raise ValueError(f"unknown hamiltonian {h!r}")

    @property
    def n_iso(self) -> int:
        return self.pairs // 2

    def job_params(self) -> JobParams:
        return JobParams(reads=self.reads, sweeps=self.sweeps, beta_range=(self.beta_start, self.beta_end))


@dataclass(frozen=True)
class PairSpec:
    size: int
    pair_id: int
    iso: bool
    g1: Graph
    g2: Graph
    regenerated: int = 0


def _draw(size: int, pair_id: int, iso: bool, p: float, seed: int, attempt: int) -> tuple[Graph, Graph]:
    s = derive_seed(seed, "pair", size, pair_id, attempt)
    if iso:
        g1, g2, _ = gen_iso_pair(size, p, s)
        return g1, g2
    return gen_noniso_pair(size, p, s)


def make_pairs(size: int, cfg: ExperimentConfig, connected_h2: bool = False) -> list[PairSpec]:
    """``cfg.pairs`` inputs at one size: the first half isomorphic, the rest not.

    With ``connected_h2`` any pair whose compact model is not one connected
    component is redrawn, and the number of redraws is kept on the record.
    """
    out = []
    for pid in range(cfg.pairs):
        iso = pid < cfg.n_iso
        for attempt in range(MAX_REGENERATIONS):
            g1, g2 = _draw(size, pid, iso, cfg.p, cfg.seed, attempt)
            if not connected_h2 or compile_pair(g1, g2, H2).report.n_components == 1:
                break
        else:
            raise RuntimeError(f"no connected model after {MAX_REGENERATIONS} draws (N={size}, pair {pid})")
        out.append(PairSpec(size, pid, iso, g1, g2, attempt))
    return out


def lower_median(x: Sequence[float]) -> float:
    return float(np.percentile(np.asarray(x, dtype=float), 50, method="lower"))


def describe(x: Sequence[float]) -> dict:
    """Lower median, 35th/65th percentiles (lower rule), and range."""
    a = np.asarray(x, dtype=float)
    if a.size == 0:
        return {"median": None, "p35": None, "p65": None, "min": None, "max": None}
    lo, hi = (float(np.percentile(a, q, method="lower")) for q in PERCENTILES)
    return {"median": lower_median(a), "p35": lo, "p65": hi, "min": float(a.min()), "max": float(a.max())}


@dataclass(frozen=True)
class PowerLawFit:
    a: float
    b: float
    r2: float

    def __call__(self, x):
        return self.a * np.asarray(x, dtype=float) ** self.b


def fit_power_law(points: Iterable[tuple[float, float]]) -> PowerLawFit:
    """Least-squares line through ``(ln x, ln y)``; ``y = a x^b``."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("power-law fit needs positive x and y")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    if np.ptp(lx) == 0:
        raise ValueError("need at least two distinct x values")
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - float((resid ** 2).sum()) / ss_tot
    return PowerLawFit(float(np.exp(res.intercept)), float(res.slope), r2)


SCALING_FIELDS = ["size", "pair_id", "iso_flag", "h1_vars", "h2_vars", "h1_terms", "h2_terms"]


def scaling_experiment(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """Per-pair variable and interaction counts for both models, plus per-size summaries."""
    rows = []
    for n in cfg.sizes:
        for ps in make_pairs(n, cfg):
            h1v, h1t = count_terms(ps.g1, ps.g2, H1)
            h2v, h2t = count_terms(ps.g1, ps.g2, H2)
            rows.append({"size": n, "pair_id": ps.pair_id, "iso_flag": int(ps.iso),
                         "h1_vars": h1v, "h2_vars": h2v, "h1_terms": h1t, "h2_terms": h2t})
    summary = []
    for n in cfg.sizes:
        sub = [r for r in rows if r["size"] == n]
        rec = {"size": n}
        for key in SCALING_FIELDS[3:]:
            for stat, v in describe([r[key] for r in sub]).items():
                rec[f"{key}_{stat}"] = v
        summary.append(rec)
    return rows, summary


def scaling_fits(summary: Sequence[dict]) -> dict[str, PowerLawFit]:
    out = {}
    for key in SCALING_FIELDS[3:]:
        pts = [(r["size"], r[f"{key}_median"]) for r in summary if r[f"{key}_median"]]
        if len(pts) >= 2:
            out[key] = fit_power_law(pts)
    return out


EMBED_FIELDS = ["size", "pair_id", "iso_flag", "hamiltonian", "variables", "regenerated", "embedded",
                "qubits", "max_chain"]


def embeddability_experiment(cfg: ExperimentConfig, hw: HardwareGraph | None = None) -> tuple[list[dict], list[dict]]:
    """One embedding call (``cfg.tries`` restarts) per problem; qubit use is the total chain length."""
    hw = hw or default_hardware()
    rows = []
    for n in cfg.sizes:
        pairs = make_pairs(n, cfg, connected_h2=True)
        redraws = sum(p.regenerated for p in pairs)
        if redraws:
            log.info("N=%d: %d disconnected inputs redrawn", n, redraws)
        for ps in pairs:
            for ham in cfg.hamiltonians:
                m = compile_pair(ps.g1, ps.g2, ham, connect=True).prepared
                e = find_embedding_for(m, hw, tries=cfg.tries, seed=derive_seed(cfg.seed, "embed", n, ps.pair_id, ham))
                rows.append({"size": n, "pair_id": ps.pair_id, "iso_flag": int(ps.iso), "hamiltonian": ham,
                             "variables": m.n, "regenerated": ps.regenerated, "embedded": int(e is not None),
                             "qubits": e.n_qubits if e else "", "max_chain": e.max_chain if e else ""})
    summary = []
    for n in cfg.sizes:
        for ham in cfg.hamiltonians:
            sub = [r for r in rows if r["size"] == n and r["hamiltonian"] == ham]
            used = [r["qubits"] for r in sub if r["embedded"]]
            d = describe(used)
            summary.append({"size": n, "hamiltonian": ham, "problems": len(sub),
                            "fraction_embedded": sum(r["embedded"] for r in sub) / len(sub),
                            "qubits_median": d["median"], "qubits_p35": d["p35"], "qubits_p65": d["p65"],
                            "redrawn": sum(r["regenerated"] for r in sub)})
    return rows, summary


ACCURACY_FIELDS = ["size", "pair_id", "iso_flag", "hamiltonian", "strategy", "regenerated", "classification",
                   "embedded_single", "solved_single", "embedded_multi", "solved_multi", "jobs", "pooled_p0", "R"]


def accuracy_experiment(cfg: ExperimentConfig, hw: HardwareGraph | None = None) -> tuple[list[dict], list[dict]]:
    """Table-style counts per Hamiltonian, decoding strategy, and single versus multi-job.

    A single-job run is the first job of the multi-job run (same seeds), so
    both modes, and both strategies, are scored on the same samples.
    """
    hw = hw or default_hardware()
    params = cfg.job_params()
    rows = []
    for n in cfg.sizes:
        for ps in make_pairs(n, cfg, connected_h2=True):
            for ham in cfg.hamiltonians:
                sc = SolveConfig(hamiltonian=ham, k_max=cfg.k_max, tries=cfg.tries, scale=cfg.scale,
                                 chain_strength=cfg.chain_strength, job=params,
                                 seed=derive_seed(cfg.seed, "solve", n, ps.pair_id, ham))
                verdicts = solve_gi_strategies(ps.g1, ps.g2, sc, cfg.strategies, hw, f"{n}-{ps.pair_id}")
                for strat, v in verdicts.items():
                    iso = v.classification is Classification.ISOMORPHIC
                    first = v.jobs[0] if v.jobs else None
                    trivial = not v.jobs
                    rows.append({
                        "size": n, "pair_id": ps.pair_id, "iso_flag": int(ps.iso), "hamiltonian": ham,
                        "strategy": strat.value, "regenerated": ps.regenerated,
                        "classification": v.classification.value,
                        "embedded_single": int(trivial or first.embedded),
                        "solved_single": int(iso and v.k <= 1),
                        "embedded_multi": int(trivial or v.embedded),
                        "solved_multi": int(iso),
                        "jobs": v.k,
                        "pooled_p0": "" if v.pooled_p0 is None else repr(v.pooled_p0),
                        "R": "" if v.repetitions is None else v.repetitions,
                    })
    summary = []
    for n in cfg.sizes:
        for ham in cfg.hamiltonians:
            for strat in cfg.strategies:
                strat = DecodeStrategy(strat).value
                sub = [r for r in rows if r["size"] == n and r["hamiltonian"] == ham and r["strategy"] == strat]
                iso = [r for r in sub if r["iso_flag"]]
                non = [r for r in sub if not r["iso_flag"]]
                summary.append({
                    "size": n, "hamiltonian": ham, "strategy": strat,
                    "iso_problems": len(iso),
                    "embedded_single": sum(r["embedded_single"] for r in iso),
                    "solved_single": sum(r["solved_single"] for r in iso),
                    "embedded_multi": sum(r["embedded_multi"] for r in iso),
                    "solved_multi": sum(r["solved_multi"] for r in iso),
                    "noniso_problems": len(non),
                    "false_positives": sum(r["solved_multi"] for r in non),
                })
    return rows, summary


def to_csv(rows: Sequence[dict], fields: Sequence[str] | None = None) -> str:
    fields = list(fields or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {"gi_anneal": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def write_outputs(out_dir: str | Path, name: str, rows: Sequence[dict], summary: Sequence[dict],
                  fields: Sequence[str], config: dict, extra: dict | None = None) -> list[Path]:
    """Write ``<name>.csv``, ``<name>_summary.csv`` and ``<name>_manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{name}.csv", out / f"{name}_summary.csv", out / f"{name}_manifest.json"]
    paths[0].write_text(to_csv(rows, fields))
    paths[1].write_text(to_csv(summary))
    manifest = {"experiment": name, "config": config, "versions": versions(), "rows": len(rows),
                "percentiles": "lower median; 35th/65th percentiles by the lower-rank rule"}
    if extra:
        manifest.update(extra)
    paths[2].write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return paths


def config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["sizes"] = list(cfg.sizes)
    return d
