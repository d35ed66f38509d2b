from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_two_reachable, brute_two_rooted, random_bidirectional
from scaleform.errors import (
    ArgumentError,
    ConstructionError,
    DecompositionError,
    GraphShapeError,
)
from scaleform.graph import (
    Dep,
    DepDecomposition,
    SensingGraph,
    build_dep_induced,
    decompose_deps,
    is_two_rooted,
    two_reachable,
)


def both_ways(pairs):
    return {(a, b) for a, b in pairs} | {(b, a) for a, b in pairs}


def test_rejects_self_loop_and_out_of_range():
    with pytest.raises(GraphShapeError):
        SensingGraph(3, [(1, 1)])
    with pytest.raises(GraphShapeError):
        SensingGraph(3, [(1, 4)])


def test_neighbors_follow_measurement_direction():
    g = SensingGraph(3, [(1, 3), (2, 3)])
    assert g.in_neighbors(3) == {1, 2}
    assert g.out_neighbors(1) == {3}
    assert not g.is_bidirectional()
    assert g.symmetrized().is_bidirectional()


def test_triangle_is_two_rooted():
    g = SensingGraph(3, both_ways([(1, 2), (1, 3), (2, 3)]))
    assert is_two_rooted(g, (1, 2))
    dec = decompose_deps(g, (1, 2))
    assert dec.deps == (Dep(1, 2, (3,)),)


def test_path_graph_witness_is_far_end():
    g = SensingGraph(4, both_ways([(1, 2), (2, 3), (3, 4)]))
    assert not is_two_rooted(g, (1, 2))
    with pytest.raises(DecompositionError) as info:
        decompose_deps(g, (1, 2))
    assert info.value.witness == 3


def test_non_bidirectional_rejected():
    g = SensingGraph(3, [(1, 3), (2, 3)])
    with pytest.raises(GraphShapeError):
        is_two_rooted(g, (1, 2))
    with pytest.raises(GraphShapeError):
        decompose_deps(g, (1, 2))


def test_two_reachable_argument_checks():
    g = SensingGraph(3, both_ways([(1, 2), (1, 3), (2, 3)]))
    with pytest.raises(ArgumentError):
        two_reachable(g, {1}, 3)
    with pytest.raises(ArgumentError):
        two_reachable(g, {1, 2}, 2)


def test_cycle_needs_no_chord():
    # 1-3-4-5-2 plus root edge: a single DEP of length 3 through the cycle
    g = SensingGraph(5, both_ways([(1, 3), (3, 4), (4, 5), (5, 2), (1, 2)]))
    dec = decompose_deps(g, (1, 2))
    assert len(dec.deps) == 1
    assert dec.deps[0].length == 3
    assert set(dec.deps[0].inner) == {3, 4, 5}


def test_dep_edges_are_not_symmetric_at_entries():
    d = Dep(1, 2, (3, 4))
    assert d.edges() == {(1, 3), (2, 4), (3, 4), (4, 3)}
    assert d.neighbors_of(0) == (1, 4)
    assert d.neighbors_of(1) == (3, 2)


def test_dep_validation():
    with pytest.raises(ConstructionError):
        Dep(1, 1, (3,))
    with pytest.raises(ConstructionError):
        Dep(1, 2, ())
    with pytest.raises(ConstructionError):
        Dep(1, 2, (1, 3))


def test_build_requires_covered_entries_and_fresh_labels():
    with pytest.raises(ConstructionError):
        build_dep_induced((1, 2), [Dep(1, 4, (3,))])
    with pytest.raises(ConstructionError):
        build_dep_induced((1, 2), [Dep(1, 2, (3,)), Dep(1, 2, (3,))])
    with pytest.raises(ConstructionError):
        build_dep_induced((1, 2), [Dep(1, 2, (4,))])


def test_construction_labels_follow_attachment_order():
    dec = DepDecomposition(5, (1, 2), (Dep(1, 2, (5,)), Dep(5, 2, (4, 3))))
    assert dec.construction_label == {1: 1, 2: 2, 5: 3, 4: 4, 3: 5}
    assert dec.follower_order() == [5, 4, 3]
    assert dec.is_valid()


def test_shipped_graph_decomposes_and_spans(scene):
    dec = decompose_deps(scene.graph, scene.leaders)
    dec.validate(scene.graph)
    assert sorted(dec.follower_order()) == list(range(3, 10))
    assert is_two_rooted(scene.graph, (1, 2))


def test_shipped_decomposition_is_deterministic(scene):
    first = decompose_deps(scene.graph, (1, 2))
    again = decompose_deps(SensingGraph(scene.n, list(scene.graph.sorted_edges())[::-1]), (1, 2))
    assert first.deps == again.deps


@pytest.mark.parametrize("seed", range(5))
def test_two_reachable_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    for _ in range(40):
        n = int(rng.integers(3, 8))
        edges = random_bidirectional(rng, n, 0.45)
        g = SensingGraph(n, edges)
        for v in range(3, n + 1):
            assert two_reachable(g, {1, 2}, v) == brute_two_reachable(n, edges, {1, 2}, v)


@settings(max_examples=150, deadline=None)
@given(st.integers(3, 7), st.floats(0.2, 0.9), st.integers(0, 2**32 - 1))
def test_decomposition_is_valid_whenever_it_succeeds(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = random_bidirectional(rng, n, p)
    g = SensingGraph(n, edges)
    rooted = brute_two_rooted(n, edges, (1, 2))
    try:
        dec = decompose_deps(g, (1, 2))
    except DecompositionError as exc:
        assert not rooted
        assert not brute_two_reachable(n, edges, (1, 2), exc.witness)
        return
    assert rooted
    induced = dec.induced_graph()
    assert induced.edges <= g.edges
    assert induced.n == n


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_dep_induced_graphs_are_two_rooted(seed, count):
    rng = np.random.default_rng(seed)
    covered = [1, 2]
    deps = []
    nxt = 3
    for _ in range(count):
        a, b = rng.choice(covered, 2, replace=False)
        ell = int(rng.integers(1, 4))
        inner = tuple(range(nxt, nxt + ell))
        nxt += ell
        deps.append(Dep(int(a), int(b), inner))
        covered += list(inner)
    g = build_dep_induced((1, 2), deps).symmetrized()
    assert brute_two_rooted(g.n, g.edges, (1, 2))
    assert is_two_rooted(g, (1, 2))
