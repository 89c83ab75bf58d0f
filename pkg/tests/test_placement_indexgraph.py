from __future__ import annotations

from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from combcache.exactmath import ParameterError
from combcache.indexgraph import (
    DemandVector,
    acyclic_set_f,
    build_graph,
    full_graph,
    is_acyclic,
    restrict_perm_g,
    subsets_of,
)
from combcache.placement import man_placement, mass_of
from combcache.topology import mask_items, to_mask


# -- placement ---------------------------------------------------------------


def test_t1_placement():
    p = man_placement(6, 6, 1)
    assert p.subfiles_per_file == 6
    assert p.M == 1
    for j in range(1, 7):
        cached = [W for W in p.cache_sets() if p.stores(j, W)]
        assert cached == [to_mask([j])]


def test_extreme_placements():
    p0 = man_placement(4, 4, 0)
    assert p0.subfiles_per_file == 1 and list(p0.cache_sets()) == [0]
    assert all(p0.stored_fraction(k) == 0 for k in range(1, 5))
    pk = man_placement(4, 4, 4)
    assert all(pk.stored_fraction(k) == 1 for k in range(1, 5))


@pytest.mark.parametrize("t", [-1, 5])
def test_placement_range(t):
    with pytest.raises(ParameterError):
        man_placement(4, 4, t)


@pytest.mark.parametrize("t,mass", [(1, Fraction(1, 6)), (2, Fraction(1, 15)), (0, Fraction(1))])
def test_mass_values(t, mass):
    x = mass_of(man_placement(6, 6, t))
    assert set(x.x.values()) == {mass}
    assert len(x.x) == comb(6, t)


@given(st.integers(1, 7), st.data())
def test_mass_feasible(K, data):
    t = data.draw(st.integers(0, K))
    N = data.draw(st.integers(1, 9))
    p = man_placement(N, K, t)
    x = mass_of(p)
    assert x.total() == 1
    assert x.is_feasible(p.M / N)
    for k in range(1, K + 1):
        assert x.user_load(k) == p.M / N == p.stored_fraction(k)
    sets = list(p.cache_sets())
    assert len(sets) == len(set(sets)) == p.subfiles_per_file
    assert len(list(p.subfiles())) == N * p.subfiles_per_file


# -- side-information graph ----------------------------------------------------


def test_graph_vertex_count():
    g = build_graph(man_placement(3, 3, 1), DemandVector((1, 2, 3)))
    assert len(g.vertices) == 3 * comb(2, 1)
    assert all(not W >> (k - 1) & 1 for k, W in g.vertices)


def test_graph_edge_rule():
    g = build_graph(man_placement(3, 3, 1), DemandVector((1, 2, 3)))
    for (k, W), (k2, _) in g.edges():
        assert W >> (k2 - 1) & 1
    assert "digraph" in g.to_dot()


def test_single_user_and_no_cache():
    g = build_graph(man_placement(1, 1, 0), DemandVector((1,)))
    assert len(g.vertices) == 1 and g.edges() == []
    g = build_graph(man_placement(3, 3, 0), DemandVector((1, 2, 3)))
    assert g.edges() == []


def test_f_single_user():
    got = acyclic_set_f(DemandVector(tuple(range(1, 7))), range(1, 7), (1,))
    assert got == {(1, W) for W in subsets_of(to_mask(range(2, 7)))}


def test_f_chain():
    S = set(range(1, 7)) - {1, 6}
    got = acyclic_set_f(DemandVector(tuple(range(1, 7))), S, (2, 3, 4, 5))
    want = {(i, W) for i in range(2, 6) for W in subsets_of(to_mask(range(i + 1, 6)))}
    assert got == want


def test_f_empty_and_errors():
    assert acyclic_set_f(None, {1, 2}, ()) == frozenset()
    with pytest.raises(ParameterError):
        acyclic_set_f(None, {1, 2}, (3,))
    with pytest.raises(ParameterError):
        acyclic_set_f(None, {1, 2}, (1, 1))


@pytest.mark.parametrize("S,p,expected", [
    ({1, 2, 3}, (2, 4, 1, 3), (2, 1, 3)),
    (set(), (1, 2), ()),
    ({3, 5, 6}, (1, 2, 3, 4, 5, 6), (3, 5, 6)),
])
def test_restrict_perm(S, p, expected):
    assert restrict_perm_g(S, p) == expected


def test_two_chains_form_a_cycle():
    d = DemandVector(tuple(range(1, 7)))
    b1 = acyclic_set_f(d, range(1, 7), (1,))
    b2 = acyclic_set_f(d, range(1, 7), (6,))
    g = full_graph(6)
    assert is_acyclic(g, b1) and is_acyclic(g, b2)
    assert not is_acyclic(g, b1 | b2)
    assert is_acyclic(g, ())


@settings(max_examples=200)
@given(st.integers(1, 8), st.data())
def test_f_is_acyclic(K, data):
    S = data.draw(st.sets(st.integers(1, K), min_size=1))
    v = data.draw(st.permutations(sorted(S)))
    v = v[: data.draw(st.integers(0, len(v)))]
    d = DemandVector(tuple(range(1, K + 1)))
    assert is_acyclic(None, acyclic_set_f(d, S, v))


@given(st.sets(st.integers(1, 9)), st.permutations(list(range(1, 10))))
def test_restrict_preserves_order(S, p):
    g = restrict_perm_g(S, p)
    assert len(g) == len(S)
    assert list(g) == [x for x in p if x in S]


def test_demand_vector_checks():
    d = DemandVector.of([1, 1, 2])
    assert not d.is_distinct() and d.file_of(2) == 1
    with pytest.raises(ParameterError):
        d.check(1, 3)
    with pytest.raises(ParameterError):
        d.check(2, 4)
    assert mask_items(to_mask([2, 3])) == [2, 3]
