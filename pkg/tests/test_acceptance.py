"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

from __future__ import annotations

import random
import time
from fractions import Fraction
from itertools import combinations
from math import comb

import pytest

from combcache.bounds import compute_bound, cutset_bound
from combcache.closedforms import grid, load_thm6, lower_convex_hull, thm7_points, thm8_low_memory
from combcache.delivery import general_load, max_link_load, plan_general, simulate_decode
from combcache.elimination import (
    certify_circulant,
    cyclic_groups,
    full_rank,
    group_count_is_integral,
    group_divide,
    lift_matrix,
    plan_elimination,
    random_groups,
    solve_coding_matrix,
)
from combcache.harness import sweep
from combcache.indexgraph import DemandVector
from combcache.placement import PlacementSpec
from combcache.topology import build_topology

F = Fraction


@pytest.fixture
def report(capsys):
    """Print exactly one PASS/FAIL line for the criterion, even when the check raises."""
    state = {}

    def record(n: int, ok: bool, detail: str):
        state.update(n=n, ok=ok, detail=detail)

    start = time.perf_counter()
    yield record
    elapsed = time.perf_counter() - start
    with capsys.disabled():
        status = "PASS" if state.get("ok") else "FAIL"
        print(f"\n[acceptance {state.get('n', '?')}] {status}: {state.get('detail', 'no result recorded')}"
              f" ({elapsed:.1f}s)")


def distinct(K):
    return DemandVector(tuple(range(1, K + 1)))


def run(report, n, check):
    """Evaluate ``check`` (returns (ok, detail)) and record the outcome for criterion n."""
    try:
        ok, detail = check()
    except Exception as exc:  # recorded, then re-raised so pytest shows the traceback
        report(n, False, f"raised {type(exc).__name__}: {exc}")
        raise
    report(n, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------


def test_criterion_01_acyclic_bounds(report):
    def check():
        t = build_topology(4, 2)
        out, ok = [], True
        for method, want in (("thm1", F(9, 23)), ("thm2", F(7, 17))):
            start = time.perf_counter()
            got = compute_bound(method, t, 6, 2).value
            secs = time.perf_counter() - start
            ok &= got == want and secs < 60
            out.append(f"{method}={got} (want {want}, {secs:.1f}s)")
        return ok, "; ".join(out)
    run(report, 1, check)


def test_criterion_02_coupled_bound(report):
    def check():
        t = build_topology(4, 2)
        start = time.perf_counter()
        thm3 = compute_bound("thm3", t, 6, F(1, 2), b=3).value
        thm1 = compute_bound("thm1", t, 6, F(1, 2)).value
        secs = time.perf_counter() - start
        ok = thm3 == F(13, 12) and thm1 == F(17, 16) and secs < 120
        return ok, f"thm3(b=3)={thm3} (want 13/12), thm1={thm1} (want 17/16), {secs:.1f}s"
    run(report, 2, check)


def test_criterion_03_scheme_loads(report):
    cases = [
        ("elim", 4, 2, 6, F(2, 3), None),
        ("general", 4, 2, 6, F(3, 4), None),
        ("elim", 5, 2, 10, F(1), (F(3, 5), F(2, 5))),
        ("elim", 6, 3, 20, F(8, 5), (F(3, 2), F(1, 10))),
    ]

    def check():
        start = time.perf_counter()
        out, ok = [], True
        for scheme, H, r, N, want, split in cases:
            t = build_topology(H, r)
            p = PlacementSpec(N=N, K=t.K, t=1)
            d = distinct(t.K)
            plan = (plan_elimination if scheme == "elim" else plan_general)(t, p, d)
            load = max_link_load(plan)
            good = load == want
            if split is not None:
                stages = plan.stage_loads()
                good &= (stages.get("step2"), stages.get("elim")) == split
            decoded = all(simulate_decode(t, p, d, plan, seed=s).ok for s in range(5))
            ok &= good and decoded
            out.append(f"{scheme}({H},{r})={load}{'' if decoded else ' DECODE FAIL'}")
        secs = time.perf_counter() - start
        ok &= secs < 60
        return ok, ", ".join(out) + f", 5 seeds each, {secs:.1f}s"
    run(report, 3, check)


def test_criterion_04_closed_form_matches_simulation(report):
    def check():
        out, ok = [], True
        for H, r in [(4, 2), (5, 2), (6, 2), (6, 3), (7, 3)]:
            t = build_topology(H, r)
            p = PlacementSpec(N=t.K, K=t.K, t=1)
            d = distinct(t.K)
            plan = plan_elimination(t, p, d)
            sim = max_link_load(plan)
            closed = load_thm6(t)
            decoded = simulate_decode(t, p, d, plan).ok
            ok &= sim == closed and decoded
            out.append(f"({H},{r}) {sim}{'=' if sim == closed else '!='}{closed}")
        return ok, ", ".join(out)
    run(report, 4, check)


def test_criterion_05_general_curve_equals_cutset(report):
    def check():
        t = build_topology(4, 3)
        N, K = 4, t.K
        pts = [(F(s * N, K), general_load(t, N, s)) for s in range(K + 1)]
        expected = [(F(s * N, K), F(K - s, (s + 1) * t.H)) for s in range(K - 1)] + [(F(N), F(0))]
        breakpoints_ok = all(pts[s] == expected[s] for s in range(K - 1)) and pts[K] == expected[-1]
        breakpoints_ok &= thm7_points(t, N) == expected
        curve = lower_convex_hull(pts)
        Ms = grid(0, N, 9)
        mism = [M for M in Ms if curve(M) != cutset_bound(t, N, M)]
        ok = breakpoints_ok and not mism
        return ok, (f"breakpoints {'match' if breakpoints_ok else 'differ'}; "
                    f"curve vs cut-set on 9 points: {9 - len(mism)}/9 equal")
    run(report, 5, check)


def test_criterion_06_low_memory_closed_forms(report):
    def check():
        start = time.perf_counter()
        out, ok = [], True
        for H, r, N in [(4, 2, 6), (3, 2, 3)]:
            t = build_topology(H, r)
            for M in (F(0), F(1, 2), F(1)):
                lp = compute_bound("thm4", t, N, M).value
                closed = thm8_low_memory(t, N, M)
                ok &= lp == closed
                out.append(f"({H},{r},M={M}) {lp}{'=' if lp == closed else '!='}{closed}")
        secs = time.perf_counter() - start
        ok &= secs < 600
        return ok, ", ".join(out) + f", {secs:.1f}s"
    run(report, 6, check)


def test_criterion_07_coding_matrix_goldens(report):
    def check():
        four_relay = solve_coding_matrix(build_topology(4, 2), [(1, 6), (2, 5), (3, 4)])
        order = [four_relay.pairs.index(p) if p in four_relay.pairs else four_relay.pairs.index(p[::-1])
                 for p in [(1, 6), (2, 5), (3, 4)]]
        signs = [[int(row[j]) for j in order] for row in four_relay.A]
        want = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]
        t6 = build_topology(6, 3)
        g1 = solve_coding_matrix(t6, [(1, 20), (2, 19), (3, 18), (5, 16), (7, 14)], s=-3)
        col = g1.column([set(p) for p in g1.pairs].index({1, 20}))
        golden = col == [1, -2, -2, 1, 1, 1]
        violations = len(four_relay.check_zero_forcing(build_topology(4, 2))) + len(g1.check_zero_forcing(t6))
        checked = 2
        for H, r in [(4, 2), (5, 2), (6, 2), (6, 3), (7, 3)]:
            t = build_topology(H, r)
            plan = plan_elimination(t, PlacementSpec(N=t.K, K=t.K, t=1), distinct(t.K))
            for m in plan.extra["coding_matrices"]:
                violations += len(m.check_zero_forcing(t))
                checked += 1
        ok = signs == want and golden and violations == 0
        return ok, (f"sign matrix {'matches' if signs == want else signs}; s=-3 column {[int(v) for v in col]}; "
                    f"{checked} matrices, {violations} zero-forcing violations")
    run(report, 7, check)


def test_criterion_08_certification(report):
    def check():
        identity = all(group_count_is_integral(k) for k in range(1, 41))
        circ_total = circ_bad = 0
        for n in (3, 5, 7, 9, 11, 13):
            k = (n - 1) // 2
            for ones in combinations(range(n), k):
                row = [1 if i in ones else 0 for i in range(n)]
                circ_total += 1
                circ_bad += not certify_circulant(k, row)
        lift_total = lift_bad = 0
        for k in range(1, 5):
            groups = list(cyclic_groups(k)) + list(random_groups(k, seed=k)[0]) + list(group_divide(k).groups)
            for g in groups:
                lift_total += 1
                lift_bad += not full_rank(lift_matrix(g, k))
        ok = identity and circ_bad == 0 and lift_bad == 0
        return ok, (f"identity k<=40 {'holds' if identity else 'fails'}; "
                    f"{circ_total - circ_bad}/{circ_total} circulants invertible; "
                    f"{lift_total - lift_bad}/{lift_total} lifted groups full rank")
    run(report, 8, check)


def test_criterion_09_sandwich(report):
    def check():
        out, problems = [], []
        for H, r in [(3, 2), (4, 2), (4, 3)]:
            K = comb(H, r)
            res = sweep(H, r, K, grid(0, K, 11))
            problems += res.violations()
            for row in res.rows:
                v = {m: e.value for m, e in row.values.items()}
                chain = [("cutset", "thm1"), ("thm1", "thm3"), ("thm1", "thm2"), ("thm2", "thm4")]
                for lo, hi in chain:
                    if v[lo] > v[hi]:
                        problems.append(f"({H},{r}) M={row.M}: {lo}={v[lo]} > {hi}={v[hi]}")
                if "thm4" not in v or "general" not in v:
                    problems.append(f"({H},{r}) M={row.M}: missing methods")
            out.append(f"({H},{r}) {len(res.rows)} points")
        return not problems, ", ".join(out) + (f"; {len(problems)} violations: {problems[:3]}"
                                               if problems else "; all orderings hold")
    run(report, 9, check)


def test_criterion_10_decode_property(report):
    cases = [(H, r) for H in range(1, 64) for r in range(1, H + 1) if comb(H, r) <= 10]

    def check():
        runs, failures = 0, []
        for H, r in cases:
            t = build_topology(H, r)
            K = t.K
            N = max(K, 2)
            rng = random.Random(1000 * H + r)
            for tp in range(K + 1):
                p = PlacementSpec(N=N, K=K, t=tp)
                for trial in range(20):
                    d = DemandVector(tuple(rng.randint(1, N) for _ in range(K)))
                    plans = [plan_general(t, p, d)]
                    if tp == 1 and H >= 2 * r:
                        plans.append(plan_elimination(t, p, d))
                    for plan in plans:
                        rep = simulate_decode(t, p, d, plan, seed=trial)
                        runs += 1
                        if not rep.ok:
                            failures.append(f"{plan.scheme} H={H} r={r} t={tp} d={d.d} GF({rep.field_size}): "
                                            f"{[(v.user, v.reason) for v in rep.failures][:2]}")
        for f in failures[:5]:
            print(f)
        return not failures, f"{len(cases)} (H,r) cases, {runs} simulations, {len(failures)} failures"
    run(report, 10, check)
