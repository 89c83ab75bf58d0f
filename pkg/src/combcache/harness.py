"""Comparison tables: bounds and scheme loads over a memory grid."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .bounds import LP_METHODS, MAX_LP_USERS, compute_bound, cutset_bound
from .closedforms import LoadCurve, load_thm6, lower_convex_hull, thm8_low_memory
from .delivery import general_load
from .exactmath import ParameterError, as_rational, fmt_decimal, fmt_rational
from .topology import build_topology

CONVERSE = ("cutset",) + LP_METHODS
ACHIEVABLE = ("general", "elim", "thm6")
OPTIMUM = ("thm8",)
SWEEP_METHODS = CONVERSE + ACHIEVABLE + OPTIMUM + ("baselines",)
CSV_HEADER = ("M_frac", "M_dec", "method", "value_frac", "value_dec", "provenance")

# Loads reported for earlier schemes, keyed by (H, r, N, M).  Stored, never computed.
BASELINES: dict[tuple[int, int, int, Fraction], dict[str, tuple[Fraction, str]]] = {
    (4, 2, 6, Fraction(1)): {
        "baseline_cachingincom": (Fraction(5, 4), "reported load, H=4 r=2 N=K=6 M=1"),
        "baseline_zewail": (Fraction(1), "reported load, H=4 r=2 N=K=6 M=1"),
        "baseline_multiserver": (Fraction(1), "reported load, H=4 r=2 N=K=6 M=1"),
    },
    (5, 2, 10, Fraction(1)): {
        "baseline_cachingincom": (Fraction(9, 4), "reported load, H=5 r=2 N=K=10 M=1"),
        "baseline_zewail": (Fraction(3, 2), "reported load, H=5 r=2 N=K=10 M=1"),
        "baseline_multiserver": (Fraction(3, 2), "reported load, H=5 r=2 N=K=10 M=1"),
    },
    (6, 3, 20, Fraction(1)): {
        "baseline_cachingincom": (Fraction(19, 6), "reported load, H=6 r=3 N=K=20 M=1"),
        "baseline_zewail": (Fraction(29, 12), "reported load, H=6 r=3 N=K=20 M=1"),
        "baseline_multiserver": (Fraction(19, 7), "reported load, H=6 r=3 N=K=20 M=1"),
    },
}


class SweepError(RuntimeError):
    pass


@dataclass
class Entry:
    M: Fraction
    method: str
    value: Fraction
    provenance: str

    def csv_row(self) -> tuple[str, ...]:
        return (fmt_rational(self.M), fmt_decimal(self.M), self.method,
                fmt_rational(self.value), fmt_decimal(self.value), self.provenance)


@dataclass
class ComparisonRow:
    M: Fraction
    values: dict[str, Entry] = field(default_factory=dict)

    def converse(self) -> list[Entry]:
        return [e for m, e in self.values.items() if m in CONVERSE or m in OPTIMUM]

    def achievable(self) -> list[Entry]:
        return [e for m, e in self.values.items() if m not in CONVERSE]

    def violations(self) -> list[str]:
        out = []
        for lo in self.converse():
            for hi in self.achievable():
                if lo.value > hi.value:
                    out.append(f"M={fmt_rational(self.M)}: {lo.method}={fmt_rational(lo.value)} "
                               f"exceeds {hi.method}={fmt_rational(hi.value)}")
        return out


# ---------------------------------------------------------------------------
# achievable curves


@lru_cache(maxsize=None)
def general_points(H: int, r: int, N: int) -> tuple[tuple[Fraction, Fraction], ...]:
    t = build_topology(H, r)
    K = t.K
    return tuple((Fraction(s * N, K), general_load(t, N, s)) for s in range(K + 1))


def achievable_curve(H: int, r: int, N: int, scheme: str) -> LoadCurve:
    """Memory sharing between the scheme's integer-t operating points."""
    pts = list(general_points(H, r, N))
    if scheme == "elim":
        t = build_topology(H, r)
        if H < 2 * r:
            raise ParameterError(f"elim needs H >= 2r; got H={H}, r={r}")
        pts.append((Fraction(N, t.K), load_thm6(t)))
    elif scheme != "general":
        raise ParameterError(f"unknown scheme {scheme!r}")
    return lower_convex_hull(pts)


def scheme_value(H: int, r: int, N: int, M: Fraction, scheme: str) -> tuple[Fraction, str]:
    t = build_topology(H, r)
    K = t.K
    if K > MAX_LP_USERS:
        # too many operating points for a full hull; use the exact point only
        s = M * K / N
        if s.denominator != 1:
            raise ParameterError(f"K={K}: only integer t = KM/N is supported, got {s}")
        s = int(s)
        if scheme == "elim":
            if s != 1 or H < 2 * r:
                raise ParameterError("elim is defined at t=1 with H >= 2r")
            return load_thm6(t), "elim point t=1"
        return general_load(t, N, s), f"general point t={s}"
    curve = achievable_curve(H, r, N, scheme)
    return curve(M), f"{scheme} memory sharing"


# ---------------------------------------------------------------------------
# one grid point


def applicable(method: str, H: int, r: int, N: int, M: Fraction) -> bool:
    t = build_topology(H, r)
    K = t.K
    if N < K:
        return False
    if method in LP_METHODS:
        return K <= MAX_LP_USERS
    if method == "thm6":
        return H >= 2 * r and M == Fraction(N, K)
    if method == "thm8":
        return H <= 2 * r and M <= Fraction(N, K)
    if method == "elim":
        return H >= 2 * r and (K <= MAX_LP_USERS or M == Fraction(N, K))
    if method == "general":
        return K <= MAX_LP_USERS or (M * K / N).denominator == 1
    if method == "baselines":
        return (H, r, N, M) in BASELINES
    return method == "cutset"


def evaluate(method: str, H: int, r: int, N: int, M: Fraction,
             perm_sample: int | None = None, seed: int = 0) -> list[Entry]:
    tag = f"H={H} r={r} N={N}"
    t = build_topology(H, r)
    if method == "cutset":
        return [Entry(M, method, cutset_bound(t, N, M), f"{tag} cut-set envelope")]
    if method in LP_METHODS:
        res = compute_bound(method, t, N, M, perm_sample=perm_sample, seed=seed)
        return [Entry(M, method, res.value, f"{tag} {res.provenance}")]
    if method in ("general", "elim"):
        v, how = scheme_value(H, r, N, M, method)
        return [Entry(M, method, v, f"{tag} {how}")]
    if method == "thm6":
        return [Entry(M, method, load_thm6(t), f"{tag} closed form")]
    if method == "thm8":
        return [Entry(M, method, thm8_low_memory(t, N, M), f"{tag} closed form")]
    if method == "baselines":
        return [Entry(M, name, v, prov) for name, (v, prov) in BASELINES[(H, r, N, M)].items()]
    raise ParameterError(f"unknown method {method!r}")


def _task(args):
    method, H, r, N, M, perm_sample, seed = args
    try:
        return evaluate(method, H, r, N, M, perm_sample, seed)
    except Exception as exc:  # re-raised with context in the parent
        return exc


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    H: int
    r: int
    N: int
    rows: list[ComparisonRow]
    skipped: list[tuple[str, Fraction]]

    def entries(self) -> list[Entry]:
        return [e for row in self.rows for _, e in sorted(row.values.items())]

    def violations(self) -> list[str]:
        out = [v for row in self.rows for v in row.violations()]
        series: dict[str, list[Entry]] = {}
        for row in self.rows:
            for m, e in row.values.items():
                series.setdefault(m, []).append(e)
        for m, es in series.items():
            for a, b in zip(es, es[1:]):
                if b.value > a.value:
                    out.append(f"{m} increases from {fmt_rational(a.value)} at M={fmt_rational(a.M)} "
                               f"to {fmt_rational(b.value)} at M={fmt_rational(b.M)}")
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for e in self.entries():
            w.writerow(e.csv_row())
        return buf.getvalue()


def sweep(H: int, r: int, N: int, grid: Iterable, methods: Sequence[str] | None = None,
          perm_sample: int | None = None, seed: int = 0, jobs: int = 1) -> SweepResult:
    """Evaluate every applicable method on every grid point; results ordered by M then method."""
    methods = list(SWEEP_METHODS if methods is None else methods)
    for m in methods:
        if m not in SWEEP_METHODS:
            raise ParameterError(f"unknown method {m!r}; choose from {', '.join(SWEEP_METHODS)}")
    build_topology(H, r)
    Ms = sorted({as_rational(M) for M in grid})
    for M in Ms:
        if not 0 <= M <= N:
            raise ParameterError(f"M={M} outside [0, {N}]")
    tasks, skipped = [], []
    for M in Ms:
        for m in methods:
            if applicable(m, H, r, N, M):
                tasks.append((m, H, r, N, M, perm_sample, seed))
            else:
                skipped.append((m, M))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(a) for a in tasks]
    rows = {M: ComparisonRow(M) for M in Ms}
    for args, res in zip(tasks, results):
        if isinstance(res, Exception):
            raise SweepError(f"{args[0]} at H={H} r={r} N={N} M={fmt_rational(args[4])}: {res}") from res
        for e in res:
            rows[e.M].values[e.method] = e
    return SweepResult(H, r, N, [rows[M] for M in Ms], skipped)
