"""Acceptance checks, one test per criterion.

Each test records a single pass/fail line (shown in the terminal summary and
in the captured output) and then asserts it. Set ``GI_ACCEPT_EXHAUSTIVE_N5=1``
to replace the sampled N=5 sweep with all 2^20 ordered pairs.
"""

import itertools
import os
from pathlib import Path

import numpy as np
import pytest

from gi_anneal.chimera import (
    apply_gauge,
    chimera,
    default_hardware,
    embed_ising,
    find_embedding,
    find_embedding_for,
    random_mask,
    validate_embedding,
)
from gi_anneal.decode import (
    Classification,
    DecodeStrategy,
    DecodedSample,
    SolveConfig,
    p_zero,
    pooled_p_zero,
    repetitions,
    solve_gi,
    solve_gi_strategies,
)
from gi_anneal.graphs import Graph, gen_iso_pair, is_isomorphic, is_valid_isomorphism, parse_pair
from gi_anneal.hamiltonian import (
    H1,
    H2,
    QuboProblem,
    bits_to_spins,
    build_qubo_h2,
    compile_pair,
    components,
    ising_energy,
    qubo_energy,
    qubo_to_ising,
)
from gi_anneal.harness import (
    SCALING_FIELDS,
    ExperimentConfig,
    embeddability_experiment,
    fit_power_law,
    make_pairs,
    scaling_experiment,
    to_csv,
)
from gi_anneal.samplers import JobParams, qubo_minimum, run_job
from gi_anneal.seeding import derive_rng, derive_seed

from conftest import all_graphs, record_criterion

FIXTURES = Path(__file__).parent / "fixtures"
VOTE, DISCARD = DecodeStrategy.MAJORITY_VOTE, DecodeStrategy.DISCARD

# reads per job for the end-to-end check (device default 40000). The hardest
# N=7 instance seen decodes to zero energy on ~1.5e-4 of reads, and 2000 reads
# x 9 jobs missed it.
ACCEPT_READS = 10_000


def _graph_from_code(n: int, code: int) -> Graph:
    pairs = list(itertools.combinations(range(n), 2))
    return Graph(n, frozenset(e for k, e in enumerate(pairs) if code >> k & 1))


def test_criterion_1_exhaustive_soundness_n4():
    gs = all_graphs(4)
    disagreements = iso = 0
    for g1 in gs:
        for g2 in gs:
            oracle = is_isomorphic(g1, g2) is not None
            zero = qubo_minimum(build_qubo_h2(g1, g2), lower_bound=0) == 0
            iso += oracle
            disagreements += oracle != zero
    total = len(gs) ** 2
    ok = total == 4096 and disagreements == 0
    record_criterion(1, ok, f"{total} ordered N=4 pairs ({iso} isomorphic), {disagreements} disagreements")
    assert ok


def test_criterion_2_sampled_soundness_n5():
    if os.environ.get("GI_ACCEPT_EXHAUSTIVE_N5") == "1":
        codes = np.arange(1 << 20)
    else:
        codes = derive_rng(2, "criterion-2").integers(0, 1 << 20, size=10_000)
    disagreements = iso = 0
    for c in codes:
        g1, g2 = _graph_from_code(5, int(c) & 1023), _graph_from_code(5, int(c) >> 10)
        oracle = is_isomorphic(g1, g2) is not None
        zero = qubo_minimum(build_qubo_h2(g1, g2), lower_bound=0) == 0
        iso += oracle
        disagreements += oracle != zero
    ok = len(codes) >= 10_000 and disagreements == 0
    record_criterion(2, ok, f"{len(codes)} ordered N=5 pairs ({iso} isomorphic), {disagreements} disagreements")
    assert ok


@pytest.fixture(scope="module")
def scaling():
    cfg = ExperimentConfig(sizes=tuple(range(10, 101, 10)), pairs=100, seed=7)
    return scaling_experiment(cfg)


def _fit(summary, key):
    return fit_power_law([(r["size"], r[f"{key}_median"]) for r in summary])


def test_criterion_3_variable_scaling(scaling):
    rows, summary = scaling
    h1_exact = all(r["h1_vars_median"] == r["size"] ** 2 for r in summary)
    below = all(r["h2_vars_median"] < r["size"] * np.log2(r["size"]) for r in summary)
    fit = _fit(summary, "h2_vars")
    ok = len(rows) == 1000 and h1_exact and below and 1.30 <= fit.b <= 1.60
    record_criterion(3, ok, f"H1 median = N^2: {h1_exact}; H2 vars ~ {fit.a:.3f} N^{fit.b:.3f} "
                            f"(R2 {fit.r2:.4f}); H2 median < N log2 N at all sizes: {below}")
    assert ok


def test_criterion_4_interaction_scaling(scaling):
    _, summary = scaling
    h2 = _fit(summary, "h2_terms")
    h1 = _fit(summary, "h1_terms")
    ok = 2.7 <= h2.b <= 3.1 and 3.8 <= h1.b <= 4.2
    record_criterion(4, ok, f"H2 interactions ~ N^{h2.b:.3f} (R2 {h2.r2:.4f}); "
                            f"H1 interactions ~ N^{h1.b:.3f} (R2 {h1.r2:.4f})")
    assert ok


# the baseline model fails slowly (all tries exhaust), so it gets a smaller batch
H1_N7_PAIRS = 20


def test_criterion_5_embeddability(hw):
    assert len(hw.qubits) == 504 and len(hw.couplers) == 1427
    cfg = ExperimentConfig(sizes=tuple(range(3, 13)), pairs=100, tries=10, seed=5, hamiltonians=(H2,))
    _, summary = embeddability_experiment(cfg, hw)
    frac = {r["size"]: r["fraction_embedded"] for r in summary}
    h1_cfg = ExperimentConfig(sizes=(7,), pairs=H1_N7_PAIRS, tries=10, seed=5, hamiltonians=(H1,))
    h1 = embeddability_experiment(h1_cfg, hw)[1][0]["fraction_embedded"]
    ok_small = all(frac[n] >= 0.90 for n in frac if n <= 8)
    ok_large = all(frac[n] >= 0.50 for n in frac)
    ok = ok_small and ok_large and h1 <= 0.50
    shown = " ".join(f"{n}:{frac[n]:.2f}" for n in sorted(frac))
    record_criterion(5, ok, f"H2 embedded fraction by N [{shown}]; H1 at N=7: {h1:.2f} of {H1_N7_PAIRS}")
    assert ok


def _ping_fixtures():
    return [parse_pair(p.read_text()) for p in sorted(FIXTURES.glob("ping_n*.txt"))]


def test_criterion_6_end_to_end_accuracy(hw):
    cfg = ExperimentConfig(sizes=tuple(range(3, 9)), pairs=100, seed=6)
    misses, false_pos, embedded, solved, worst_k = [], 0, 0, 0, 0
    for n in cfg.sizes:
        for ps in make_pairs(n, cfg, connected_h2=True):
            sc = SolveConfig(hamiltonian=H2, strategy=VOTE, k_max=9, job=JobParams(reads=ACCEPT_READS),
                             seed=derive_seed(cfg.seed, "solve", n, ps.pair_id))
            v = solve_gi(ps.g1, ps.g2, sc, hw)
            found = v.classification is Classification.ISOMORPHIC
            if ps.iso:
                if v.embedded or not v.jobs:
                    embedded += 1
                    good = found and is_valid_isomorphism(ps.g1, ps.g2, v.witness)
                    solved += good
                    worst_k = max(worst_k, v.k)
                    if not good:
                        misses.append((n, ps.pair_id))
            elif found:
                false_pos += 1
    pings = _ping_fixtures()
    for k, (g1, g2) in enumerate(pings):
        assert is_isomorphic(g1, g2) is None
        a1, a2 = g1.adjacency.astype(float), g2.adjacency.astype(float)
        assert np.allclose(np.linalg.eigvalsh(a1), np.linalg.eigvalsh(a2))
        sc = SolveConfig(strategy=VOTE, k_max=9, job=JobParams(reads=ACCEPT_READS), seed=k, short_circuit=False)
        if solve_gi(g1, g2, sc, hw).classification is Classification.ISOMORPHIC:
            false_pos += 1
    ok = not misses and solved == embedded and false_pos == 0
    record_criterion(6, ok, f"{solved}/{embedded} embedded isomorphic pairs solved with verified witness "
                            f"(worst case {worst_k} jobs, {ACCEPT_READS} reads/job); false positives on "
                            f"300 non-isomorphic pairs + {len(pings)} isospectral fixtures: {false_pos}")
    assert ok


def test_criterion_7_error_correction_benefit(hw):
    lines, ok = [], True
    for n in (5, 6):
        cfg = ExperimentConfig(sizes=(n,), pairs=100, seed=11)
        batch = [p for p in make_pairs(n, cfg, connected_h2=True) if p.iso]
        assert len(batch) == 50
        vote = discard = strict = 0
        monotone = True
        for p in batch:
            sc = SolveConfig(k_max=1, chain_strength=-0.5, job=JobParams(reads=1000),
                             seed=derive_seed(cfg.seed, "weak", n, p.pair_id))
            out = solve_gi_strategies(p.g1, p.g2, sc, [VOTE, DISCARD], hw)
            a = out[VOTE].classification is Classification.ISOMORPHIC
            b = out[DISCARD].classification is Classification.ISOMORPHIC
            vote += a
            discard += b
            strict += a and not b
            monotone &= a or not b
        ok &= monotone and vote >= discard and strict >= 1
        lines.append(f"N={n}: vote {vote}, discard {discard}, vote-only {strict}")
    record_criterion(7, ok, "chain coupling -0.5, one job of 1000 reads, 50 isomorphic inputs per size; "
                     + "; ".join(lines))
    assert ok


def test_criterion_8_formula_suite():
    checks = {
        "repetitions(0.5, 0.99) == 7": repetitions(0.5, 0.99) == 7,
        "repetitions(p >= 0.99) == 1": all(repetitions(p, 0.99) == 1 for p in (0.99, 0.995, 1.0)),
        "pooled({0.5, 0.5}) == 0.5": pooled_p_zero([0.5, 0.5]) == 0.5,
        "pooled K=1 identity": all(pooled_p_zero([p]) == p for p in (0.0, 1e-5, 0.25, 0.731, 1.0)),
        "pooled({0, 0.5})": pooled_p_zero([0.0, 0.5]) == 1 - 0.5 ** 0.5,
        "P0 = 3/40000": p_zero([DecodedSample(np.array([1]), 0, 3, False)], 40000) == 3 / 40000,
        "P0 counts discarded reads": p_zero([DecodedSample(np.array([1]), 0, 2, False)], 8) == 0.25,
        "P0 none zero": p_zero([DecodedSample(np.array([1]), 1, 8, False)], 8) == 0,
        "P0 all zero": p_zero([DecodedSample(np.array([1]), 0, 8, False)], 8) == 1,
        "repetitions(0) undefined": repetitions(0.0) is None,
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    record_criterion(8, ok, f"{len(checks) - len(failed)}/{len(checks)} exact formula checks"
                     + (f"; failed: {failed}" if failed else ""))
    assert ok


def _random_connected(rng, n):
    while True:
        p = rng.uniform(0.2, 0.9)
        edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < p]
        if components(n, edges).max() == 0:
            return edges


def _embedding_validity(n_instances=1000):
    hw = chimera(4, 4, 4, random_mask(4, 4, 4, 4, 1))
    found = 0
    for i in range(n_instances):
        rng = derive_rng(9, "instance", i)
        n = int(rng.integers(2, 11))
        edges = _random_connected(rng, n)
        e = find_embedding(edges, hw, tries=3, seed=i, n_vars=n)
        if e is not None:
            found += 1
            if validate_embedding(e, edges, hw):
                return found, False
    return found, True


def _gauge_spectra(hw):
    checked = 0
    for seed in itertools.count():
        g1, g2, _ = gen_iso_pair(4, 0.5, seed)
        c = compile_pair(g1, g2, connect=True)
        if c.prepared.n < 2:
            continue
        e = find_embedding_for(c.prepared, hw, tries=3, seed=seed)
        if e is None or e.n_qubits > 16:
            continue
        em = embed_ising(c.prepared, e, hw)
        s = np.array(list(itertools.product([-1, 1], repeat=em.n)), dtype=np.int8)
        base = np.sort(em.energies(s))
        for k in range(4):
            g = apply_gauge(em, seed=derive_seed(seed, "g", k))
            if not np.allclose(np.sort(g.energies(s)), base, atol=1e-12):
                return checked, False
        checked += 1
        if checked == 10:
            return checked, True


def _qubo_ising_exhaustive():
    rng = derive_rng(9, "qubo")
    models = []
    for n in range(1, 11):
        for _ in range(3):
            lin = tuple(int(x) for x in rng.integers(-5, 6, size=n))
            quad = {(a, b): int(rng.integers(-4, 5)) for a, b in itertools.combinations(range(n), 2)
                    if rng.random() < 0.6}
            models.append(QuboProblem(tuple((k, k) for k in range(n)), lin, quad, int(rng.integers(-3, 4))))
    for seed in range(200):
        g1, g2, _ = gen_iso_pair(4, 0.5, seed)
        q = build_qubo_h2(g1, g2)
        if 1 <= q.n <= 10:
            models.append(q)
    states = 0
    for q in models:
        m = qubo_to_ising(q)
        bits = np.array(list(itertools.product([0, 1], repeat=q.n)))
        batch = m.energies(2 * bits - 1)
        for b, e in zip(bits, batch):
            if e != qubo_energy(q, b) or ising_energy(m, bits_to_spins(b)) != e:
                return len(models), states, False
            states += 1
    return len(models), states, True


def _reproducible(hw, tmp_path):
    outputs = []
    for _ in range(2):
        cfg = ExperimentConfig(sizes=(10, 20), pairs=10, seed=3)
        scal = to_csv(scaling_experiment(cfg)[0], SCALING_FIELDS).encode()
        g1, g2, _ = gen_iso_pair(6, 0.5, 12)
        verdict = solve_gi(g1, g2, SolveConfig(job=JobParams(reads=500), seed=4), hw).to_json().encode()
        c = compile_pair(g1, g2, connect=True)
        e = find_embedding_for(c.prepared, hw, seed=2)
        em = apply_gauge(embed_ising(c.prepared, e, hw), seed=5)
        sample = run_job(em, JobParams(reads=300, seed=6)).to_text().encode()
        emb = embeddability_experiment(ExperimentConfig(sizes=(4,), pairs=2, tries=2, seed=8), hw)
        outputs.append((scal, verdict, e.to_text().encode(), sample, to_csv(emb[0]).encode()))
    return outputs[0] == outputs[1]


def test_criterion_9_structural_invariants(hw, tmp_path):
    found, emb_ok = _embedding_validity()
    gauged, gauge_ok = _gauge_spectra(hw)
    n_models, n_states, conv_ok = _qubo_ising_exhaustive()
    repro = _reproducible(hw, tmp_path)
    ok = emb_ok and gauge_ok and conv_ok and repro
    record_criterion(9, ok, f"embeddings valid: {emb_ok} ({found}/1000 found); gauge spectra equal: {gauge_ok} "
                            f"({gauged} models x 4 gauges, <=16 qubits); QUBO/Ising equal: {conv_ok} "
                            f"({n_models} models, {n_states} states); byte-reproducible: {repro}")
    assert ok
