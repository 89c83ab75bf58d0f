"""Command-line entry point: ``combcache {net,bound,scheme,sweep,certify,selftest}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from itertools import combinations

from .bounds import METHODS, compute_bound
from .closedforms import grid, load_thm6
from .delivery import max_link_load, plan_general, simulate_decode
from .elimination import (
    GroupDivisionError,
    certify_circulant,
    group_count_is_integral,
    group_divide,
    plan_elimination,
    invertibility_guaranteed,
)
from .exactmath import ParameterError, as_rational, fmt_decimal, fmt_rational
from .harness import SWEEP_METHODS, SweepError, sweep
from .indexgraph import DemandVector
from .placement import PlacementSpec
from .topology import build_topology, complement_pairs


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2) if args.json else text)


def _int_range(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(text)]


def _grid(text: str) -> list[Fraction]:
    """``lo:hi:n`` for an evenly spaced grid, or a comma-separated list."""
    if text.count(":") == 2:
        lo, hi, n = text.split(":")
        return grid(lo, hi, int(n))
    return [as_rational(v) for v in text.split(",") if v]


def _demands(text: str | None, N: int, K: int) -> DemandVector:
    if text is None:
        if N < K:
            raise ParameterError(f"default distinct demands need N >= K; got N={N}, K={K}")
        return DemandVector(tuple(range(1, K + 1)))
    d = DemandVector(tuple(int(v) for v in text.split(",")))
    d.check(N, K)
    return d


# ---------------------------------------------------------------------------
# commands


def cmd_net(args) -> int:
    t = build_topology(args.H, args.r)
    pairs = complement_pairs(t)
    payload = json.loads(t.to_json())
    payload["K"] = t.K
    payload["complement_pairs"] = [sorted(p) for p in pairs]
    lines = [f"H={t.H} r={t.r} K={t.K}"]
    lines += [f"  user {k}: relays {sorted(t.relays_of(k))}" for k in range(1, t.K + 1)]
    lines += [f"  relay {h}: users {sorted(t.users_of(h))}" for h in range(1, t.H + 1)]
    lines.append(f"  disjoint pairs: {len(pairs)}")
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_bound(args) -> int:
    t = build_topology(args.H, args.r)
    start = time.perf_counter()
    res = compute_bound(args.method, t, args.N, args.M, args.b, args.perm_sample, args.seed)
    payload = res.to_json()
    payload.update(H=t.H, r=t.r, N=args.N, M=fmt_rational(as_rational(args.M)),
                   seconds=round(time.perf_counter() - start, 3))
    text = f"{res.provenance}: {fmt_rational(res.value)} ({fmt_decimal(res.value)})"
    _emit(args, payload, text)
    return 0


def cmd_scheme(args) -> int:
    t = build_topology(args.H, args.r)
    p = PlacementSpec(N=args.N, K=t.K, t=args.t)
    d = _demands(args.demands, args.N, t.K)
    if args.scheme == "elim":
        plan = plan_elimination(t, p, d, s=args.s, seed=args.seed, field=args.field)
    else:
        plan = plan_general(t, p, d, field=args.field)
    load = max_link_load(plan)
    payload = plan.to_json()
    payload["max_link_load"] = fmt_rational(load)
    lines = [f"{args.scheme} H={t.H} r={t.r} N={args.N} t={args.t}: max-link load "
             f"{fmt_rational(load)} ({fmt_decimal(load)}), GF({plan.field_size})"]
    lines += [f"  stage {k}: {fmt_rational(v)}" for k, v in plan.stage_loads().items()]
    lines += [f"  note: {n}" for n in plan.notes]
    if args.scheme == "elim" and "coding_matrices" in plan.extra:
        payload["coding_matrices"] = [m.to_json() for m in plan.extra["coding_matrices"]]
        if args.matrices:
            for m in plan.extra["coding_matrices"]:
                cols = " ".join(f"{{{a},{b}}}" for a, b in m.pairs)
                lines.append(f"  relays {list(m.relays)} columns {cols}")
                for h, row in zip(m.relays, m.A):
                    lines.append(f"    relay {h}: " + " ".join(f"{fmt_rational(v):>3}" for v in row))
    status = 0
    if args.verify:
        reports = [simulate_decode(t, p, d, plan, field=args.field, seed=args.seed + i)
                   for i in range(args.trials)]
        payload["verify"] = [r.to_json() for r in reports]
        bad = [v for r in reports for v in r.failures]
        lines.append(f"  decode: {args.trials - sum(not r.ok for r in reports)}/{args.trials} trials, "
                     f"all users recovered" if not bad else f"  decode: {len(bad)} user failures")
        for v in bad[:10]:
            lines.append(f"    user {v.user}: {v.reason}")
        status = 1 if bad else 0
    _emit(args, payload, "\n".join(lines))
    return status


def cmd_sweep(args) -> int:
    methods = [m for m in args.methods.split(",") if m] if args.methods is not None else None
    Hs = _int_range(args.H)
    results = []
    for H in Hs:
        K = build_topology(H, args.r).K
        N = K if args.N == "K" else int(args.N)
        results.append(sweep(H, args.r, N, _grid(args.M), methods, args.perm_sample, args.seed, args.jobs))
    csv_text = "".join(res.to_csv() if i == 0 else res.to_csv().split("\n", 1)[1]
                       for i, res in enumerate(results))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    problems = [v for res in results for v in res.violations()]
    if args.json:
        print(json.dumps({"rows": [e.csv_row() for res in results for e in res.entries()],
                          "violations": problems}, indent=2))
    elif not args.out:
        sys.stdout.write(csv_text)
    for v in problems:
        print(f"violation: {v}", file=sys.stderr)
    return 1 if problems else 0


def cmd_certify(args) -> int:
    payload: dict = {"identity": {}, "circulant": {}, "groups": {}}
    lines = []
    bad = [k for k in range(1, args.identity_max + 1) if not group_count_is_integral(k)]
    payload["identity"] = {"k_max": args.identity_max, "failures": bad}
    lines.append(f"C(2k+1,k) divisible by 2k+1 for k in [1,{args.identity_max}]: "
                 f"{'yes' if not bad else 'no, fails at ' + str(bad)}")
    for k in range(1, args.k_max + 1):
        n = 2 * k + 1
        rows = [tuple(1 if i in c else 0 for i in range(n)) for c in combinations(range(n), k)]
        singular = [row for row in rows if not certify_circulant(k, row)]
        payload["circulant"][k] = {"n": n, "rows": len(rows), "singular": len(singular),
                                   "condition": invertibility_guaranteed(n)}
        cond = "p^v or pq" if invertibility_guaranteed(n) else "outside p^v / pq"
        lines.append(f"k={k} n={n} ({cond}): {len(rows) - len(singular)}/{len(rows)} circulants invertible")
    for k in range(1, args.groups_max + 1):
        try:
            div = group_divide(k, args.max_restarts, args.seed)
        except GroupDivisionError as exc:
            payload["groups"][k] = {"error": str(exc)}
            lines.append(f"k={k}: {exc}")
            continue
        payload["groups"][k] = div.to_json()
        lines.append(f"k={k}: {len(div.groups)} {div.method} groups, distinct lifted ranks {sorted(set(div.ranks))}"
                     f" {'certified' if div.certified() else 'NOT certified'}")
    if args.row:
        digits = args.row.replace(",", "")
        if not digits or set(digits) - {"0", "1"}:
            raise ParameterError(f"--row must be a 0/1 string such as 11000 or 1,1,0,0,0; got {args.row!r}")
        row = [int(c) for c in digits]
        k = (len(row) - 1) // 2
        ok = certify_circulant(k, row)
        payload["row"] = {"row": args.row, "invertible": ok}
        lines.append(f"row {args.row}: {'invertible' if ok else 'singular'}")
    _emit(args, payload, "\n".join(lines))
    failed = bad or any("error" in g or min(g["ranks"]) < 2 * int(k) + 2
                        for k, g in payload["groups"].items())
    return 1 if failed else 0


def _selftest_cases():
    F = Fraction

    def bound(method, H, r, N, M, b=None):
        return lambda: compute_bound(method, build_topology(H, r), N, M, b).value

    def scheme(name, H, r, N, t):
        def run():
            top = build_topology(H, r)
            p = PlacementSpec(N=N, K=top.K, t=t)
            d = DemandVector(tuple(range(1, top.K + 1)))
            plan = (plan_elimination if name == "elim" else plan_general)(top, p, d)
            if not simulate_decode(top, p, d, plan).ok:
                raise AssertionError("decode failed")
            return max_link_load(plan)
        return run

    return [
        ("thm2 H=4 r=2 N=6 M=2", bound("thm2", 4, 2, 6, 2), F(7, 17)),
        ("thm1 H=4 r=2 N=6 M=2", bound("thm1", 4, 2, 6, 2), F(9, 23)),
        ("thm3 H=4 r=2 N=6 M=1/2 b=3", bound("thm3", 4, 2, 6, F(1, 2), 3), F(13, 12)),
        ("cutset H=4 r=2 N=6 M=6", bound("cutset", 4, 2, 6, 6), F(0)),
        ("general H=4 r=2 N=6 t=1", scheme("general", 4, 2, 6, 1), F(3, 4)),
        ("elim H=4 r=2 N=6 t=1", scheme("elim", 4, 2, 6, 1), F(2, 3)),
        ("elim H=5 r=2 N=10 t=1", scheme("elim", 5, 2, 10, 1), F(1)),
        ("elim H=6 r=3 N=20 t=1", scheme("elim", 6, 3, 20, 1), F(8, 5)),
        ("thm6 H=6 r=3", lambda: load_thm6(build_topology(6, 3)), F(8, 5)),
    ]


def cmd_selftest(args) -> int:
    results = []
    for name, fn, want in _selftest_cases():
        start = time.perf_counter()
        try:
            got = fn()
            ok, detail = got == want, fmt_rational(got)
        except Exception as exc:
            ok, detail = False, f"error: {exc}"
        results.append({"case": name, "expected": fmt_rational(want), "got": detail, "pass": ok,
                        "seconds": round(time.perf_counter() - start, 2)})
    lines = [f"{'PASS' if r['pass'] else 'FAIL'} {r['case']}: got {r['got']}, expected {r['expected']}"
             f" ({r['seconds']}s)" for r in results]
    _emit(args, {"results": results}, "\n".join(lines))
    return 0 if all(r["pass"] for r in results) else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--perm-sample", type=int, default=None, metavar="N",
                        help="cap permutations per family (rows become sampled-valid)")
    common.add_argument("--field", type=int, default=None, metavar="p", help="prime field size")

    parser = argparse.ArgumentParser(prog="combcache", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("net", parents=[common], help="show the network incidence structure")
    p.add_argument("--H", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("bound", parents=[common], help="compute one converse bound")
    p.add_argument("method", choices=METHODS)
    p.add_argument("--H", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--M", type=str, required=True, help="memory, e.g. 2 or 1/2")
    p.add_argument("--b", type=int, default=None, help="relay-set size (thm3/thm4); default: max over b")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("scheme", parents=[common], help="build a delivery plan and report its load")
    p.add_argument("scheme", choices=("general", "elim"))
    p.add_argument("--H", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--t", type=int, required=True, help="placement parameter, M = tN/K")
    p.add_argument("--demands", type=str, default=None, help="comma-separated file indices")
    p.add_argument("--s", type=str, default=None, help="fixed useful sum for elim coding columns")
    p.add_argument("--verify", action="store_true", help="simulate encoding and decoding")
    p.add_argument("--trials", type=int, default=1, help="decode trials with seeds seed..seed+n-1")
    p.add_argument("--matrices", action="store_true", help="print elim coding matrices")
    p.set_defaults(func=cmd_scheme)

    p = sub.add_parser("sweep", parents=[common], help="tabulate methods over a memory grid as CSV")
    p.add_argument("--H", type=str, required=True, help="relay count or range lo:hi")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--N", type=str, default="K", help="file count, or K for N=K (default)")
    p.add_argument("--M", type=str, required=True, help="lo:hi:n grid or comma list")
    p.add_argument("--methods", type=str, default=None,
                   help=f"comma list from {','.join(SWEEP_METHODS)} (default all)")
    p.add_argument("--out", type=str, default=None, help="CSV path (default stdout)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("certify", parents=[common], help="circulant and group-division certificates")
    p.add_argument("--k-max", type=int, default=6, help="exhaustive circulant check for k <= K")
    p.add_argument("--identity-max", type=int, default=40)
    p.add_argument("--groups-max", type=int, default=4, help="build group divisions for k <= K")
    p.add_argument("--max-restarts", type=int, default=100)
    p.add_argument("--row", type=str, default=None, help="single 0/1 first row to certify")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("selftest", parents=[common], help="run the built-in golden checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "s", None) is not None:
        args.s = as_rational(args.s)
    try:
        return args.func(args)
    except (ParameterError, SweepError, GroupDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
