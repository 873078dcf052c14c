import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gi_anneal.graphs import Graph, degree_classes, gen_er, gen_iso_pair, is_isomorphic, permute
from gi_anneal.hamiltonian import (
    H1,
    H2,
    IsingProblem,
    QuboProblem,
    VertexCountMismatch,
    bits_to_spins,
    build_qubo,
    build_qubo_h1,
    build_qubo_h2,
    compile_pair,
    count_terms,
    interaction_components,
    ising_energy,
    prepare_for_embedding,
    qubo_energies,
    qubo_energy,
    qubo_to_ising,
    read_ising,
    read_qubo,
    spins_to_bits,
    write_ising,
    write_qubo,
)
from gi_anneal.samplers import qubo_minimum

from conftest import graph_pairs, graphs


def penalty_oracle(g1, g2, hamiltonian, x, c1=1, c2=1):
    """Straight evaluation of the penalty sum from an assignment matrix ``x[u, i]``."""
    n = g1.n
    A1, A2 = g1.adjacency, g2.adjacency
    if hamiltonian == H1:
        rows, cols = range(n), range(n)
    else:
        rows = [u for u in range(n) if g2.degrees[u] > 0]
        cols = [i for i in range(n) if g1.degrees[i] > 0]
    e = sum(c1 * (1 - x[u, :].sum()) ** 2 for u in rows)
    e += sum(c1 * (1 - x[:, i].sum()) ** 2 for i in cols)
    for u, v in itertools.permutations(range(n), 2):
        for i, j in itertools.permutations(range(n), 2):
            if A1[i, j] != A2[u, v]:
                e += c2 * x[u, i] * x[v, j]
    return int(e)


def assignment_matrix(q, bits, n):
    x = np.zeros((n, n), dtype=np.int64)
    for (u, i), b in zip(q.variables, bits):
        x[u, i] = b
    return x


def test_h1_has_n_squared_variables():
    for g1, g2 in [(Graph.path(3), Graph(3)), (Graph.complete(3), Graph.cycle(3))]:
        assert build_qubo_h1(g1, g2).n == 9


def test_h1_identity_assignment_zero():
    g = gen_er(5, 0.5, 1)
    q = build_qubo_h1(g, g)
    bits = [int(u == i) for u, i in q.variables]
    assert qubo_energy(q, bits) == 0


def test_h1_all_zero_assignment_n3():
    q = build_qubo_h1(Graph.path(3), Graph.path(3), c1=1)
    assert qubo_energy(q, [0] * q.n) == 6


def test_h2_two_paths_has_five_variables():
    q = build_qubo_h2(Graph.path(3), Graph.path(3))
    assert q.n == 5
    assert q.variables == ((0, 0), (0, 2), (1, 1), (2, 0), (2, 2))


def test_h2_k4_vs_c4_is_empty():
    q = build_qubo_h2(Graph.complete(4), Graph.cycle(4))
    assert q.n == 0 and q.uncovered_constraints == 8


def test_vertex_count_mismatch():
    with pytest.raises(VertexCountMismatch):
        build_qubo_h2(Graph(3), Graph(4))
    with pytest.raises(VertexCountMismatch):
        build_qubo_h1(Graph(3), Graph(4))


def test_conflict_pair_costs_at_least_c1():
    q = build_qubo_h1(Graph.path(3), Graph.path(3))
    idx = q.index()
    bits = [0] * q.n
    bits[idx[(0, 1)]] = bits[idx[(2, 1)]] = 1
    assert qubo_energy(q, bits) >= 1


def test_qubo_energy_length_checked():
    q = build_qubo_h1(Graph.path(3), Graph.path(3))
    with pytest.raises(ValueError):
        qubo_energy(q, [0] * (q.n - 1))


@given(graph_pairs(max_n=5), st.sampled_from([H1, H2]), st.data())
def test_energy_matches_direct_penalty_sum(pair, ham, data):
    g1, g2 = pair
    q = build_qubo(g1, g2, ham)
    bits = data.draw(st.lists(st.integers(0, 1), min_size=q.n, max_size=q.n))
    x = assignment_matrix(q, bits, g1.n)
    assert qubo_energy(q, bits) == penalty_oracle(g1, g2, ham, x)


@given(graph_pairs(max_n=5), st.sampled_from([H1, H2]))
def test_batch_energies_match_scalar(pair, ham):
    q = build_qubo(*pair, ham)
    rng = np.random.default_rng(q.n)
    bits = rng.integers(0, 2, size=(16, q.n))
    assert list(qubo_energies(q, bits)) == [qubo_energy(q, b) for b in bits]


@given(graph_pairs(max_n=7))
def test_variable_counts(pair):
    g1, g2 = pair
    n = g1.n
    assert build_qubo_h1(g1, g2).n == n * n
    d1, d2 = degree_classes(g1), degree_classes(g2)
    expect = sum(len(d1[d]) * len(d2.get(d, ())) for d in d1)
    q2 = build_qubo_h2(g1, g2)
    assert q2.n == expect
    if sorted(g1.degrees) == sorted(g2.degrees):
        assert q2.n == sum(len(v) ** 2 for v in d1.values())
    assert set(q2.variables) <= set(build_qubo_h1(g1, g2).variables)
    assert list(q2.variables) == sorted(q2.variables)


@given(graph_pairs(max_n=6), st.sampled_from([H1, H2]))
def test_no_double_penalties(pair, ham):
    g1, g2 = pair
    q = build_qubo(g1, g2, ham)
    for (a, b), w in q.quadratic.items():
        (u, i), (v, j) = q.variables[a], q.variables[b]
        conflict = (u == v) != (i == j)
        mismatch = u != v and i != j and g1.has_edge(i, j) != g2.has_edge(u, v)
        assert not (conflict and mismatch)
        assert w == 2 * (conflict + mismatch) and w > 0


@given(graph_pairs(max_n=8), st.sampled_from([H1, H2]))
def test_count_terms_matches_explicit_build(pair, ham):
    q = build_qubo(*pair, ham)
    assert count_terms(*pair, ham) == (q.n, q.n_interactions)


def test_regular_graphs_need_n_squared_in_both_models():
    for n in (5, 8, 11):
        c = Graph.cycle(n)
        other = permute(c, list(np.random.default_rng(n).permutation(n)))
        assert count_terms(c, other, H2)[0] == count_terms(c, other, H1)[0] == n * n


def test_qubo_to_ising_examples():
    m = qubo_to_ising(QuboProblem(((0, 0),), (2,), {}))
    assert m.h == (Fraction(1),) and m.offset == 1 and m.J == {}
    m = qubo_to_ising(QuboProblem(((0, 0), (1, 1)), (0, 0), {(0, 1): 4}))
    assert m.J == {(0, 1): Fraction(1)} and m.h == (1, 1) and m.offset == 1
    m = qubo_to_ising(QuboProblem((), (), {}))
    assert m.n == 0 and m.offset == 0


def test_ising_energy_examples():
    assert ising_energy(IsingProblem((0,), (Fraction(1),), {}), [-1]) == -1
    m = IsingProblem((0, 1), (Fraction(0), Fraction(0)), {(0, 1): Fraction(0)}, Fraction(2))
    assert all(ising_energy(m, s) == 2 for s in itertools.product([-1, 1], repeat=2))
    with pytest.raises(ValueError):
        ising_energy(m, [1])


def test_bits_spins_inverse():
    assert bits_to_spins([0, 1, 1]) == [-1, 1, 1]
    assert spins_to_bits([-1, 1, 1]) == [0, 1, 1]


def test_conversion_random_assignments_n5():
    g1, g2, _ = gen_iso_pair(5, 0.5, 4)
    q = build_qubo_h1(g1, g2)
    m = qubo_to_ising(q)
    rng = np.random.default_rng(0)
    for bits in rng.integers(0, 2, size=(1000, q.n)):
        assert ising_energy(m, bits_to_spins(bits)) == qubo_energy(q, bits)


@st.composite
def small_qubos(draw, max_n=10):
    n = draw(st.integers(0, max_n))
    lin = tuple(draw(st.lists(st.integers(-5, 5), min_size=n, max_size=n)))
    pairs = list(itertools.combinations(range(n), 2))
    keep = draw(st.lists(st.integers(-4, 4), min_size=len(pairs), max_size=len(pairs)))
    quad = {p: w for p, w in zip(pairs, keep) if w}
    return QuboProblem(tuple((k, k) for k in range(n)), lin, quad, draw(st.integers(-3, 3)))


@given(small_qubos(max_n=8))
def test_conversion_exhaustive(q):
    m = qubo_to_ising(q)
    for bits in itertools.product([0, 1], repeat=q.n):
        assert ising_energy(m, bits_to_spins(bits)) == qubo_energy(q, bits)


@given(small_qubos())
def test_batch_ising_energies_exact(q):
    m = qubo_to_ising(q)
    bits = np.array(list(itertools.islice(itertools.product([0, 1], repeat=q.n), 64)))
    spins = 2 * bits - 1
    assert m.energies(spins) == [qubo_energy(q, b) for b in bits]


def test_prepare_connected_model_unchanged():
    # C5 vs a relabeled C5: 25 variables in one component
    c5 = Graph.cycle(5)
    m = qubo_to_ising(build_qubo_h2(c5, permute(c5, [2, 0, 4, 1, 3])))
    out, rep = prepare_for_embedding(m, connect=True)
    assert out.n == m.n == 25 and rep.n_components == 1 and rep.n_dummies == 0
    assert out.J == m.J and rep.n_placeholders == 0


def test_middle_of_path_is_its_own_component():
    m = qubo_to_ising(build_qubo_h2(Graph.path(3), Graph.path(3)))
    assert prepare_for_embedding(m)[1].n_components == 2


def test_prepare_empty_model_gets_two_dummies():
    m = qubo_to_ising(build_qubo_h2(Graph.complete(4), Graph.cycle(4)))
    out, rep = prepare_for_embedding(m)
    assert out.n == 2 and rep.n_dummies == 2 and rep.cannot_reach_zero
    assert out.edges == [(0, 1)] and out.J[(0, 1)] == 0
    assert out.offset == m.offset


def test_prepare_two_cliques_flagged():
    J = {(0, 1): Fraction(1), (0, 2): Fraction(1), (1, 2): Fraction(1), (3, 4): Fraction(1)}
    m = IsingProblem(tuple(range(5)), (Fraction(0),) * 5, J)
    out, rep = prepare_for_embedding(m)
    assert rep.n_components == 2 and rep.disconnected and out.J == J
    joined, rep2 = prepare_for_embedding(m, connect=True)
    assert rep2.n_placeholders == 1 and len(joined.J) == 5
    for s in itertools.product([-1, 1], repeat=5):
        assert ising_energy(joined, s) == ising_energy(m, s)


@given(graph_pairs(min_n=3, max_n=6))
def test_components_agree(pair):
    c = compile_pair(*pair)
    assert c.report.n_components == interaction_components(*pair)


@given(small_qubos())
def test_qubo_text_round_trip(q):
    back = read_qubo(write_qubo(q))
    assert back.offset == q.offset and back.linear == q.linear
    assert {k: w for k, w in back.quadratic.items() if w} == {k: w for k, w in q.quadratic.items() if w}


@given(small_qubos())
def test_ising_text_round_trip(q):
    m = qubo_to_ising(q)
    back = read_ising(write_ising(m))
    assert back.h == m.h and back.offset == m.offset and back.J == m.J


def test_text_format_header_and_rationals():
    m = qubo_to_ising(QuboProblem(((0, 0), (1, 1)), (1, 0), {(0, 1): 1}))
    text = write_ising(m)
    assert text.splitlines()[0] == "2 3 3/4"
    assert "0 0 3/4" in text and "0 1 1/4" in text
    with pytest.raises(ValueError):
        read_ising("2 1 0\n1 0 1\n")


@pytest.mark.parametrize("ham", [H1, H2])
def test_soundness_exhaustive_n3(ham):
    from conftest import all_graphs

    for g1 in all_graphs(3):
        for g2 in all_graphs(3):
            iso = is_isomorphic(g1, g2) is not None
            assert (qubo_minimum(build_qubo(g1, g2, ham)) == 0) == iso


def test_h1_soundness_exhaustive_n4():
    # the compact model's N=4 sweep is an acceptance check; this covers the baseline
    from conftest import all_graphs

    gs = all_graphs(4)
    for a in range(len(gs)):
        for b in range(a, len(gs)):
            g1, g2 = gs[a], gs[b]
            iso = is_isomorphic(g1, g2) is not None
            assert (qubo_minimum(build_qubo_h1(g1, g2), lower_bound=0) == 0) == iso


def test_noniso_min_energy_at_least_one_n5():
    from gi_anneal.graphs import gen_noniso_pair

    for seed in range(30):
        g1, g2 = gen_noniso_pair(5, 0.5, seed)
        assert qubo_minimum(build_qubo_h2(g1, g2)) >= 1
