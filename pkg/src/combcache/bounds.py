"""Converse bounds on the max-link load under uncoded placement.

Four LP families are generated here, plus the closed-form cut-set curve.
Every LP row has the shape

    coeff_R * R  (sense)  sum_W coeff_x[W] x_W + sum_Q coeff_y[Q] y_Q + rhs

moved to one side, i.e. rows are stored as ``lhs . v  >=  rhs`` over the
variable vector ``(R, x_W, y_Q)``.  User sets ``W`` and relay sets ``Q`` are
bitmasks; ``W`` ranges over all subsets of ``[K]``.

Families:

* ``thm1``: one row per relay set Q (|Q| >= r) and ordering of the users
  below Q, from the acyclic-set bound.
* ``thm2``: partitions of Q into blocks of at least r relays, each block
  contributing its own acyclic chain, which lets the bound exploit cycles.
* ``thm3``: the ``thm1`` rows of size b augmented with an auxiliary y_Q, tied
  together by one coupling row per ordering of all users.
* ``thm4``: the partition rows of ``thm2`` augmented the same way.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations
from math import factorial
from typing import Iterable, Iterator, Sequence

from .exactmath import ParameterError, as_rational, binom
from .topology import Topology, mask_items, to_mask

METHODS = ("cutset", "thm1", "thm2", "thm3", "thm4")
LP_METHODS = METHODS[1:]
MAX_LP_USERS = 12  # 2^K mass variables


class UnsupportedRegimeError(ParameterError):
    """The requested bound is only derived for distinct demands (N >= K)."""


@dataclass(frozen=True)
class BoundConstraint:
    coeff_R: Fraction
    coeff_x: dict[int, Fraction]
    coeff_y: dict[int, Fraction] = field(default_factory=dict)
    sense: str = ">="
    rhs: Fraction = Fraction(0)
    provenance: tuple = ()

    def key(self):
        return (
            self.coeff_R,
            tuple(sorted((w, c) for w, c in self.coeff_x.items() if c)),
            tuple(sorted((q, c) for q, c in self.coeff_y.items() if c)),
            self.sense,
            self.rhs,
        )

    def evaluate(self, R, x: dict[int, Fraction], y: dict[int, Fraction] | None = None) -> Fraction:
        """Left side minus right side; the row holds iff the result has the right sign."""
        y = y or {}
        val = self.coeff_R * R
        val += sum((c * x.get(w, 0) for w, c in self.coeff_x.items()), Fraction(0))
        val += sum((c * y.get(q, 0) for q, c in self.coeff_y.items()), Fraction(0))
        return val - self.rhs

    def dump(self, K: int) -> str:
        def fmt_set(mask):
            return "[" + ",".join(map(str, mask_items(mask))) + "]"
        xs = ",".join(f"{fmt_set(w)}:{c}" for w, c in sorted(self.coeff_x.items()) if c)
        ys = ",".join(f"{fmt_set(q)}:{c}" for q, c in sorted(self.coeff_y.items()) if c)
        prov = " ".join(_fmt_prov(p) for p in self.provenance)
        return f"{self.provenance[0] if self.provenance else '?'} {self.sense} {self.rhs} | R:{self.coeff_R} | x:{{{xs}}} | y:{{{ys}}} | prov:{prov}"


def _fmt_prov(item) -> str:
    if isinstance(item, (tuple, list)):
        return "(" + ",".join(_fmt_prov(i) for i in item) + ")"
    return str(item)


# ---------------------------------------------------------------------------
# coefficient helpers


def chain_coeffs(order: Sequence[int], ground: int) -> dict[int, int]:
    """Coefficients of sum_i sum_{W subset ground minus {p_1..p_i}} x_W.

    For a given W the count is the number of prefixes of ``order`` that avoid
    W, i.e. the position of the first element of ``order`` lying in W.
    """
    out: dict[int, int] = {}
    n = len(order)
    if n == 0:
        return out
    bits = [1 << (u - 1) for u in order]
    sub = ground
    while True:
        c = n
        for i, b in enumerate(bits):
            if sub & b:
                c = i
                break
        if c:
            out[sub] = c
        if sub == 0:
            break
        sub = (sub - 1) & ground
    return out


def coeff_c(t: Topology, W1: Iterable[int] | int, l: int) -> int:
    """max(C(H-1, l-1) - #{Q : |Q| = l, K_Q meets W1}, 0)."""
    mask = W1 if isinstance(W1, int) else to_mask(W1)
    if not t.r <= l <= t.H:
        raise ParameterError(f"l={l} outside [{t.r}, {t.H}]")
    return _coeff_c_table(t, l)[mask]


@lru_cache(maxsize=64)
def _coeff_c_table(t: Topology, l: int) -> tuple[int, ...]:
    base = binom(t.H - 1, l - 1)
    kq = [t.users_within_mask(to_mask(Q)) for Q in combinations(range(1, t.H + 1), l)]
    return tuple(max(base - sum(1 for m in kq if m & W), 0) for W in range(1 << t.K))


def relay_sets(t: Topology, sizes: Iterable[int]) -> Iterator[int]:
    for s in sizes:
        for Q in combinations(range(1, t.H + 1), s):
            yield to_mask(Q)


def block_partitions(items: Sequence[int], r: int) -> Iterator[list[tuple[int, ...]]]:
    """Unordered set partitions of ``items`` into blocks of size >= r."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for extra in range(r - 1, len(rest) + 1):
        for mates in combinations(rest, extra):
            block = (first,) + mates
            remaining = [x for x in rest if x not in mates]
            if remaining and len(remaining) < r:
                continue
            for tail in block_partitions(remaining, r):
                yield [block] + tail


class PermSource:
    """Enumerates orderings, or draws a fixed-size seeded sample when too many."""

    def __init__(self, cap: int | None = None, seed: int = 0):
        self.cap = cap
        self.rng = random.Random(seed)
        self.sampled = False

    def orders(self, users: Sequence[int]) -> list[tuple[int, ...]]:
        users = tuple(users)
        if self.cap is None or factorial(len(users)) <= self.cap:
            return list(permutations(users))
        self.sampled = True
        seen = {users}
        out = [users]
        while len(out) < self.cap:
            p = list(users)
            self.rng.shuffle(p)
            tp = tuple(p)
            if tp not in seen:
                seen.add(tp)
                out.append(tp)
        return out


def _check_regime(t: Topology, N: int) -> None:
    if N < t.K:
        raise UnsupportedRegimeError(f"bounds require N >= K (distinct demands); got N={N}, K={t.K}")
    if t.K > MAX_LP_USERS:
        raise ParameterError(f"LP bounds need 2^K variables; K={t.K} exceeds {MAX_LP_USERS}")


def _check_b(t: Topology, b: int) -> None:
    if not t.r <= b <= t.H:
        raise ParameterError(f"b={b} outside [{t.r}, {t.H}]")


def _row(size: int, coeffs: dict[int, int], y: int | None, prov: tuple) -> BoundConstraint:
    cx = {w: Fraction(-c) for w, c in coeffs.items()}
    cy = {y: Fraction(-1)} if y is not None else {}
    return BoundConstraint(coeff_R=Fraction(size), coeff_x=cx, coeff_y=cy, provenance=prov)


def dedup(rows: Iterable[BoundConstraint]) -> list[BoundConstraint]:
    seen = set()
    out = []
    for row in rows:
        k = row.key()
        if k not in seen:
            seen.add(k)
            out.append(row)
    return out


# ---------------------------------------------------------------------------
# generators


def _thm1_rows(t: Topology, Q: int, perms: PermSource, y: bool, tag: str) -> Iterator[BoundConstraint]:
    kq = mask_items(t.users_within_mask(Q))
    size = bin(Q).count("1")
    for p in perms.orders(kq):
        yield _row(size, chain_coeffs(p, t.all_users_mask), Q if y else None,
                   (tag, tuple(mask_items(Q)), p))


def _partition_rows(t: Topology, Q: int, perms: PermSource, y: bool, tag: str) -> Iterator[BoundConstraint]:
    size = bin(Q).count("1")
    full = t.all_users_mask
    for blocks in block_partitions(mask_items(Q), t.r):
        block_users = [mask_items(t.users_within_mask(to_mask(b))) for b in blocks]
        V = to_mask(u for us in block_users for u in us)
        rest = mask_items(t.users_within_mask(Q) & ~V)
        choices = [perms.orders(us) for us in block_users] + [perms.orders(rest)]
        for combo in _product(choices):
            coeffs: dict[int, int] = {}
            for p in combo[:-1]:
                for w, c in chain_coeffs(p, full).items():
                    coeffs[w] = coeffs.get(w, 0) + c
            for w, c in chain_coeffs(combo[-1], full & ~V).items():
                coeffs[w] = coeffs.get(w, 0) + c
            prov = (tag, tuple(mask_items(Q)), tuple(blocks), tuple(combo))
            yield _row(size, coeffs, Q if y else None, prov)


def _product(choices):
    if not choices:
        yield ()
        return
    for head in choices[0]:
        for tail in _product(choices[1:]):
            yield (head,) + tail


def _coupling_rows(t: Topology, b: int, perms: PermSource) -> Iterator[BoundConstraint]:
    table = _coeff_c_table(t, b)
    qs = list(relay_sets(t, [b]))
    full = t.all_users_mask
    for p in perms.orders(range(1, t.K + 1)):
        coeffs: dict[int, int] = {}
        prefix = 0
        for u in p:
            prefix |= 1 << (u - 1)
            ground = full & ~prefix
            bit = 1 << (u - 1)
            sub = ground
            while True:
                c = table[bit | sub]
                if c:
                    coeffs[sub] = coeffs.get(sub, 0) + c
                if sub == 0:
                    break
                sub = (sub - 1) & ground
        yield BoundConstraint(
            coeff_R=Fraction(0),
            coeff_x={w: Fraction(-c) for w, c in coeffs.items()},
            coeff_y={q: Fraction(1) for q in qs},
            provenance=("coupling", b, p),
        )


def _nonneg_rows(t: Topology, b: int) -> Iterator[BoundConstraint]:
    for Q in relay_sets(t, [b]):
        yield BoundConstraint(coeff_R=Fraction(0), coeff_x={}, coeff_y={Q: Fraction(1)},
                              provenance=("nonneg", tuple(mask_items(Q))))


def gen_thm1(t: Topology, N: int, perms: PermSource | None = None) -> list[BoundConstraint]:
    _check_regime(t, N)
    perms = perms or PermSource()
    rows = []
    for Q in relay_sets(t, range(t.r, t.H + 1)):
        rows.extend(_thm1_rows(t, Q, perms, False, "thm1"))
    return dedup(rows)


def gen_thm2(t: Topology, N: int, perms: PermSource | None = None) -> list[BoundConstraint]:
    _check_regime(t, N)
    perms = perms or PermSource()
    rows = []
    for Q in relay_sets(t, range(t.r, t.H + 1)):
        rows.extend(_partition_rows(t, Q, perms, False, "thm2"))
    return dedup(rows)


def gen_thm3(t: Topology, N: int, b: int, perms: PermSource | None = None) -> list[BoundConstraint]:
    """Rows with y_Q for |Q| = b, plain acyclic rows for other sizes, coupling rows."""
    _check_regime(t, N)
    _check_b(t, b)
    perms = perms or PermSource()
    rows = []
    for Q in relay_sets(t, range(t.r, t.H + 1)):
        with_y = bin(Q).count("1") == b
        rows.extend(_thm1_rows(t, Q, perms, with_y, "thm3" if with_y else "thm1"))
    rows.extend(_coupling_rows(t, b, perms))
    rows.extend(_nonneg_rows(t, b))
    return dedup(rows)


def gen_thm4(t: Topology, N: int, b: int, perms: PermSource | None = None) -> list[BoundConstraint]:
    _check_regime(t, N)
    _check_b(t, b)
    perms = perms or PermSource()
    rows = []
    for Q in relay_sets(t, range(t.r, t.H + 1)):
        with_y = bin(Q).count("1") == b
        rows.extend(_partition_rows(t, Q, perms, with_y, "thm4" if with_y else "thm2"))
    rows.extend(_coupling_rows(t, b, perms))
    rows.extend(_nonneg_rows(t, b))
    return dedup(rows)


# ---------------------------------------------------------------------------
# cut-set


def cutset_points(t: Topology, N: int, x: int) -> list[tuple[Fraction, Fraction]]:
    n = binom(x, t.r)
    return [(Fraction(s * N, n), Fraction(n - s, x * (s + 1))) for s in range(n + 1)]


def interpolate(points: Sequence[tuple[Fraction, Fraction]], M: Fraction) -> Fraction:
    """Piecewise-linear interpolation through points sorted by M."""
    for (m0, r0), (m1, r1) in zip(points, points[1:]):
        if m0 <= M <= m1:
            return r0 + (r1 - r0) * (M - m0) / (m1 - m0)
    if points and M == points[0][0]:
        return points[0][1]
    raise ParameterError(f"M={M} outside the interpolation range")


def cutset_bound(t: Topology, N: int, M) -> Fraction:
    M = as_rational(M)
    if not 0 <= M <= N:
        raise ParameterError(f"M={M} outside [0, {N}]")
    return max(interpolate(cutset_points(t, N, x), M) for x in range(t.r, t.H + 1))


# ---------------------------------------------------------------------------
# LP assembly


def generate(method: str, t: Topology, N: int, b: int | None = None,
             perms: PermSource | None = None) -> list[BoundConstraint]:
    if method == "thm1":
        return gen_thm1(t, N, perms)
    if method == "thm2":
        return gen_thm2(t, N, perms)
    if method in ("thm3", "thm4"):
        if b is None:
            raise ParameterError(f"{method} needs b")
        return (gen_thm3 if method == "thm3" else gen_thm4)(t, N, b, perms)
    raise ParameterError(f"unknown LP method {method!r}")


def placement_rows(t: Topology, N: int, M: Fraction) -> list[BoundConstraint]:
    """Mass normalisation and per-user memory rows."""
    full = range(1 << t.K)
    rows = [BoundConstraint(coeff_R=Fraction(0), coeff_x={w: Fraction(1) for w in full},
                            sense="=", rhs=Fraction(1), provenance=("normalisation",))]
    for k in range(1, t.K + 1):
        bit = 1 << (k - 1)
        rows.append(BoundConstraint(
            coeff_R=Fraction(0),
            coeff_x={w: Fraction(1) for w in full if w & bit},
            sense="<=", rhs=M / N, provenance=("memory", k)))
    return rows


def var_name(var) -> str:
    if var == "R":
        return "R"
    kind, mask = var
    return f"{kind}[{','.join(map(str, mask_items(mask)))}]"


def bound_lp(method: str, t: Topology, N: int, M, b: int | None = None,
             perms: PermSource | None = None):
    """LinearProgram minimising R over the rows of ``method``."""
    from .lp import LinearProgram

    M = as_rational(M)
    if not 0 <= M <= N:
        raise ParameterError(f"M={M} outside [0, {N}]")
    rows = generate(method, t, N, b, perms)
    ys = sorted({q for row in rows for q in row.coeff_y})
    variables = ["R"] + [("x", w) for w in range(1 << t.K)] + [("y", q) for q in ys]
    lp = LinearProgram(variables=variables, objective={0: Fraction(1)})
    for row in rows + placement_rows(t, N, M):
        coeffs = {("x", w): c for w, c in row.coeff_x.items()}
        coeffs.update({("y", q): c for q, c in row.coeff_y.items()})
        if row.coeff_R:
            coeffs["R"] = row.coeff_R
        lp.add_row(coeffs, row.sense, row.rhs, row.provenance)
    return lp


@dataclass
class BoundResult:
    method: str
    value: Fraction
    witness: dict
    b: int | None = None
    sampled: bool = False

    @property
    def provenance(self) -> str:
        tag = self.method if self.b is None else f"{self.method}(b={self.b})"
        return tag + (" sampled-valid" if self.sampled else "")

    def to_json(self) -> dict:
        from .exactmath import fmt_rational
        out = {
            "method": self.method,
            "optimum": fmt_rational(self.value),
            "decimal": float(self.value),
            "witness": {var_name(v): fmt_rational(q) for v, q in self.witness.items() if q},
        }
        if self.b is not None:
            out["b"] = self.b
        if self.sampled:
            out["sampled"] = True
        return out


def compute_bound(method: str, t: Topology, N: int, M, b: int | None = None,
                  perm_sample: int | None = None, seed: int = 0) -> BoundResult:
    """Value of one converse bound; ``thm3``/``thm4`` maximise over b when b is None."""
    from .lp import solve_lp

    M = as_rational(M)
    if method == "cutset":
        return BoundResult("cutset", cutset_bound(t, N, M), {})
    if method not in LP_METHODS:
        raise ParameterError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if method in ("thm3", "thm4") and b is None:
        results = [compute_bound(method, t, N, M, bb, perm_sample, seed) for bb in range(t.r, t.H + 1)]
        return max(results, key=lambda res: (res.value, -res.b))
    perms = PermSource(perm_sample, seed)
    lp = bound_lp(method, t, N, M, b, perms)
    res = solve_lp(lp)
    return BoundResult(method, res.optimum, res.witness, b, perms.sampled)
