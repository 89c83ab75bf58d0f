from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from scipy.optimize import linprog

from combcache.bounds import (
    PermSource,
    UnsupportedRegimeError,
    block_partitions,
    bound_lp,
    chain_coeffs,
    coeff_c,
    compute_bound,
    cutset_bound,
    gen_thm1,
    gen_thm2,
    gen_thm3,
    gen_thm4,
)
from combcache.exactmath import ParameterError
from combcache.indexgraph import subsets_of
from combcache.lp import LinearProgram, LPInfeasibleError, LPUnboundedError, check_feasible, solve_lp
from combcache.topology import build_topology, to_mask

F = Fraction


@pytest.fixture(scope="module")
def t42():
    return build_topology(4, 2)


@pytest.fixture(scope="module")
def t32():
    return build_topology(3, 2)


def chain(users, ground):
    """Oracle: sum over prefixes i of sum over W inside ground minus {p_1..p_i}."""
    out = {}
    removed = 0
    for u in users:
        removed |= 1 << (u - 1)
        for W in subsets_of(ground & ~removed):
            out[W] = out.get(W, 0) + 1
    return out


# -- cut-set ----------------------------------------------------------------


@pytest.mark.parametrize("M,expected", [(0, F(3, 2)), (6, F(0)), (1, F(2, 3))])
def test_cutset_values(t42, M, expected):
    assert cutset_bound(t42, 6, M) == expected


def test_cutset_range(t42):
    with pytest.raises(ParameterError):
        cutset_bound(t42, 6, 7)


def test_cutset_nonincreasing(t42):
    vals = [cutset_bound(t42, 6, F(i, 4)) for i in range(25)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


# -- row generators --------------------------------------------------------------


@pytest.mark.parametrize("order", [(1,), (2, 3, 4, 5), (3, 1, 2), ()])
def test_chain_coeffs_oracle(order):
    ground = to_mask(range(1, 7))
    assert chain_coeffs(order, ground) == chain(order, ground)


def test_thm1_single_user_row(t42):
    rows = [r for r in gen_thm1(t42, 6) if r.provenance[1] == (1, 2)]
    assert len(rows) == 1
    row = rows[0]
    assert row.coeff_R == 2
    assert {w: -c for w, c in row.coeff_x.items()} == {W: 1 for W in subsets_of(to_mask(range(2, 7)))}


def test_thm2_partition_row(t42):
    want = chain((1,), 63)
    for w, c in chain((6,), 63).items():
        want[w] = want.get(w, 0) + c
    for w, c in chain((2, 3, 4, 5), to_mask(range(2, 6))).items():
        want[w] = want.get(w, 0) + c
    rows = [r for r in gen_thm2(t42, 6)
            if r.provenance[1] == (1, 2, 3, 4) and r.provenance[2] == ((1, 2), (3, 4))
            and r.provenance[3] == ((1,), (6,), (2, 3, 4, 5))]
    assert len(rows) == 1
    assert rows[0].coeff_R == 4
    assert {w: -c for w, c in rows[0].coeff_x.items()} == want


def test_single_block_rows_are_thm1_rows(t42):
    thm1 = {r.key() for r in gen_thm1(t42, 6)}
    thm2 = {r.key() for r in gen_thm2(t42, 6)}
    assert thm1 <= thm2


def test_block_partitions():
    parts = list(block_partitions([1, 2, 3, 4], 2))
    assert sorted(map(tuple, parts)) == sorted([((1, 2, 3, 4),), ((1, 2), (3, 4)), ((1, 3), (2, 4)), ((1, 4), (2, 3))])
    assert list(block_partitions([1, 2, 3], 2)) == [[(1, 2, 3)]]


def test_coeff_c(t42):
    assert coeff_c(t42, {1}, 3) == 1
    assert coeff_c(t42, {1, 6}, 3) == 0
    assert coeff_c(t42, set(), 3) == 3


def coupling_oracle(t, b, order):
    out = {}
    removed = 0
    for u in order:
        removed |= 1 << (u - 1)
        for W in subsets_of(t.all_users_mask & ~removed):
            c = coeff_c(t, W | 1 << (u - 1), b)
            if c:
                out[W] = out.get(W, 0) + c
    return out


@pytest.mark.parametrize("H,r,b", [(3, 2, 2), (3, 2, 3), (4, 2, 2), (4, 2, 3)])
def test_coupling_rows_match_oracle(H, r, b):
    t = build_topology(H, r)
    rows = [row for row in gen_thm3(t, t.K, b) if row.provenance[0] == "coupling"]
    assert rows
    for row in rows:
        order = row.provenance[2]
        assert {w: -c for w, c in row.coeff_x.items()} == coupling_oracle(t, b, order)
        assert set(row.coeff_y) == {to_mask(Q) for Q in combinations(range(1, H + 1), b)}


def test_coupling_collapses_when_pairs_span_every_relay_set(t42):
    # every two users of (4, 2) cover three relays, so only x_empty survives
    rows = [r for r in gen_thm3(t42, 6, 3) if r.provenance[0] == "coupling"]
    assert len(rows) == 1 and rows[0].coeff_x == {0: -6}


def test_thm3_row_shapes(t42):
    rows = gen_thm3(t42, 6, 3)
    kinds = {r.provenance[0] for r in rows}
    assert kinds == {"thm1", "thm3", "coupling", "nonneg"}
    for r in rows:
        if r.provenance[0] == "thm3":
            assert bin(to_mask(r.provenance[1])).count("1") == 3 and r.coeff_y


def test_thm4_contains_y_partition_rows(t42):
    rows = gen_thm4(t42, 6, 4)
    assert any(r.provenance[0] == "thm4" and len(r.provenance[2]) == 2 for r in rows)


def test_regime_errors(t42):
    with pytest.raises(UnsupportedRegimeError):
        gen_thm1(t42, 5)
    with pytest.raises(ParameterError):
        gen_thm3(t42, 6, 1)
    with pytest.raises(ParameterError):
        compute_bound("thm1", build_topology(6, 3), 20, 1)


def test_dump_format(t42):
    line = gen_thm1(t42, 6)[0].dump(6)
    assert line.startswith("thm1 >= 0 | R:2 | x:{")
    assert "| prov:" in line


# -- LP solver --------------------------------------------------------------


def test_trivial_lp():
    lp = LinearProgram(variables=["R", "x"], objective={0: F(1)})
    lp.add_row({"x": 1}, "=", 1)
    res = solve_lp(lp)
    assert res.optimum == 0
    assert check_feasible(lp, res.witness)[0]


def test_small_lp_optimum():
    # min R s.t. 2R >= x + 1, R >= 1 - x, 0 <= x <= 1
    lp = LinearProgram(variables=["R", "x"], objective={0: F(1)})
    lp.add_row({"R": 2, "x": -1}, ">=", 1)
    lp.add_row({"R": 1, "x": 1}, ">=", 1)
    lp.add_row({"x": 1}, "<=", 1)
    res = solve_lp(lp)
    assert res.optimum == F(2, 3)
    assert res.witness["x"] == F(1, 3)


def test_infeasible_and_unbounded():
    lp = LinearProgram(variables=["x"], objective={0: F(1)})
    lp.add_row({"x": 1}, "<=", 1)
    lp.add_row({"x": 1}, ">=", 2)
    with pytest.raises(LPInfeasibleError):
        solve_lp(lp)
    lp = LinearProgram(variables=["x", "y"], objective={0: F(1), 1: F(-1)})
    lp.add_row({"x": 1}, ">=", 0)
    with pytest.raises(LPUnboundedError):
        solve_lp(lp)


def test_thm1_witness_is_tight(t42):
    lp = bound_lp("thm1", t42, 6, 2)
    res = solve_lp(lp)
    assert res.optimum == F(9, 23)
    assert check_feasible(lp, res.witness)[0]
    worse = dict(res.witness)
    worse["R"] -= F(1, 1000)
    ok, violated = check_feasible(lp, worse)
    assert not ok and violated and violated[0][1][0] == "thm1"


def test_lp_against_float_oracle(t32):
    lp = bound_lp("thm1", t32, 3, 1)
    res = solve_lp(lp)
    n = len(lp.variables)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row in lp.rows:
        vec = np.zeros(n)
        for i, c in row.coeffs.items():
            vec[i] = float(c)
        if row.sense == "=":
            A_eq.append(vec)
            b_eq.append(float(row.rhs))
        elif row.sense == "<=":
            A_ub.append(vec)
            b_ub.append(float(row.rhs))
        else:
            A_ub.append(-vec)
            b_ub.append(-float(row.rhs))
    c = np.zeros(n)
    c[0] = 1
    ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert abs(ref.fun - float(res.optimum)) < 1e-9


def test_lp_deterministic(t32):
    a = solve_lp(bound_lp("thm2", t32, 3, F(1, 2)))
    b = solve_lp(bound_lp("thm2", t32, 3, F(1, 2)))
    assert a.optimum == b.optimum and a.witness == b.witness


def test_man_mass_with_scheme_load_is_feasible(t42):
    lp = bound_lp("thm1", t42, 6, 1)
    assignment = {"R": F(2, 3)}
    for k in range(1, 7):
        assignment[("x", 1 << (k - 1))] = F(1, 6)
    assert check_feasible(lp, assignment)[0]


def test_sampled_permutations_flag(t42):
    res = compute_bound("thm3", t42, 6, F(1, 2), b=3, perm_sample=24, seed=1)
    assert res.sampled and "sampled-valid" in res.provenance
    assert res.value <= F(13, 12)


def test_perm_source_sample_size():
    src = PermSource(cap=5, seed=0)
    assert len(src.orders(range(1, 6))) == 5 and src.sampled
    assert len(PermSource().orders((1, 2, 3))) == 6


@pytest.mark.parametrize("method", ["thm1", "thm2", "thm3", "thm4"])
def test_small_network_dominance(t32, method):
    for M in (F(0), F(1, 2), F(3, 2), F(3)):
        value = compute_bound(method, t32, 3, M).value
        assert cutset_bound(t32, 3, M) <= value
    assert compute_bound(method, t32, 3, 3).value == 0


@pytest.mark.parametrize("method,M", [("thm2", F(1)), ("thm3", F(3, 2)), ("thm1", F(0))])
def test_float_start_agrees_with_pure_simplex(t32, method, M):
    lp = bound_lp(method, t32, 3, M, b=3 if method == "thm3" else None)
    fast, slow = solve_lp(lp), solve_lp(lp, crash=False)
    assert fast.optimum == slow.optimum
    assert check_feasible(lp, fast.witness)[0] and check_feasible(lp, slow.witness)[0]
