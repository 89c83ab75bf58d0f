"""Interference elimination for t = 1 and H >= 2r.

Pairs of users with disjoint relay sets (the set ``V_1``) are delivered in
groups of ``2r-1`` through a block ``B`` of ``2r`` relays.  Each relay in
``B`` receives one linear combination of the group's messages; the
coefficients are chosen so that a user summing what its ``r`` relays
forwarded sees only its own message.

Group construction works on the local labels ``1..2r`` of ``B``.  A pair is
represented by the member whose relay set contains the largest label
``2r``; dropping that label leaves an (r-1)-subset of ``[2r-1]``.  The
default groups are the orbits of those subsets under cyclic rotation,
whose incidence matrices are circulant; a randomized search is the
fallback.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import gcd, lcm
from typing import Sequence

from .delivery import (
    DeliveryPlan,
    Transmission,
    _validate,
    common_relays,
    message_sets,
    plan_general,
    step2_transmissions,
)
from .exactmath import ParameterError, RankDeficiencyError, binom, is_prime, next_prime, rank, solve
from .indexgraph import DemandVector
from .placement import PlacementSpec
from .topology import Topology


class GroupDivisionError(RuntimeError):
    def __init__(self, k: int, groups_found: int, attempts: int):
        super().__init__(
            f"no certified group division for k={k} after {attempts} attempts "
            f"({groups_found} groups found); a guarantee exists when 2k+1 = p^v or pq")
        self.k = k
        self.groups_found = groups_found
        self.attempts = attempts


# ---------------------------------------------------------------------------
# certification helpers


def circulant(first_row: Sequence[int]) -> list[list[int]]:
    n = len(first_row)
    return [[first_row[(j - i) % n] for j in range(n)] for i in range(n)]


def certify_circulant(k: int, first_row: Sequence[int]) -> bool:
    """Whether the circulant matrix with this 0/1 first row (k ones) is invertible."""
    if len(first_row) != 2 * k + 1 or any(v not in (0, 1) for v in first_row) or sum(first_row) != k:
        raise ParameterError(f"first row must be 0/1 of length {2 * k + 1} with exactly {k} ones")
    return full_rank(circulant(first_row))


_SCREEN_PRIME = 2**61 - 1


def full_rank(rows: Sequence[Sequence[int]]) -> bool:
    """Exact full-rank test for a square integer matrix.

    Full rank modulo a prime implies a nonzero determinant over Q, so the
    modular screen is conclusive when it succeeds; otherwise fall back to
    rational elimination.
    """
    n = len(rows)
    return rank(rows, modulus=_SCREEN_PRIME) == n or rank(rows) == n


def k_matrix_rows(k: int) -> list[tuple[int, ...]]:
    n = 2 * k + 1
    return [tuple(1 if i in c else 0 for i in range(n)) for c in combinations(range(n), k)]


def group_count_is_integral(k: int) -> bool:
    return binom(2 * k + 1, k) % (2 * k + 1) == 0


def invertibility_guaranteed(n: int) -> bool:
    """n = p^v or n = p*q for distinct primes p, q."""
    factors = []
    m, d = n, 2
    while d * d <= m:
        while m % d == 0:
            factors.append(d)
            m //= d
        d += 1
    if m > 1:
        factors.append(m)
    distinct = set(factors)
    return len(distinct) == 1 or (len(distinct) == 2 and len(factors) == 2)


def lift_matrix(group: Sequence[Sequence[int]], k: int) -> list[list[int]]:
    """(2k+2)x(2k+2): an all-ones row, then one 0/1 row per subset with 2k+2 added."""
    n = 2 * k + 2
    rows = [[1] * n]
    for S in group:
        members = set(S) | {n}
        rows.append([1 if j in members else 0 for j in range(1, n + 1)])
    return rows


# ---------------------------------------------------------------------------
# group division


@dataclass(frozen=True)
class GroupDivision:
    """Groups of k-subsets of [2k+1]; the element 2k+2 is implicit in every subset."""

    k: int
    groups: tuple[tuple[tuple[int, ...], ...], ...]
    ranks: tuple[int, ...]
    method: str

    def certified(self) -> bool:
        return all(r == 2 * self.k + 2 for r in self.ranks)

    def to_json(self) -> dict:
        return {"k": self.k, "method": self.method,
                "groups": [[list(S) + [2 * self.k + 2] for S in g] for g in self.groups],
                "ranks": list(self.ranks)}


def cyclic_groups(k: int) -> list[tuple[tuple[int, ...], ...]]:
    """Orbits of k-subsets of [2k+1] under rotation, each ordered by rotation."""
    n = 2 * k + 1
    seen: set[tuple[int, ...]] = set()
    groups = []
    for c in combinations(range(1, n + 1), k):
        if c in seen:
            continue
        orbit = []
        for shift in range(n):
            rot = tuple(sorted((x - 1 + shift) % n + 1 for x in c))
            orbit.append(rot)
        seen.update(orbit)
        groups.append(tuple(orbit))
    return groups


def _certify(groups, k) -> tuple[int, ...]:
    n = 2 * k + 2
    return tuple(n if full_rank(lift_matrix(g, k)) else rank(lift_matrix(g, k)) for g in groups)


def random_groups(k: int, seed: int = 0, times: int = 10, max_restarts: int = 100):
    """Randomized group division with a retry budget per restart."""
    n = 2 * k + 1
    count = binom(n, k) // n
    rng = random.Random(seed)
    best = 0
    attempts = 0
    for _ in range(max_restarts):
        pool = list(combinations(range(1, n + 1), k))
        groups = []
        budget = 0
        while len(groups) < count:
            attempts += 1
            pick = rng.sample(range(len(pool)), n)
            chosen = tuple(sorted(pool[i] for i in pick))
            if full_rank(lift_matrix(chosen, k)):
                groups.append(chosen)
                keep = set(pick)
                pool = [s for i, s in enumerate(pool) if i not in keep]
            else:
                budget += 1
                if budget > times:
                    break
        best = max(best, len(groups))
        if len(groups) == count:
            return groups, attempts
    raise GroupDivisionError(k, best, attempts)


@lru_cache(maxsize=None)
def group_divide(k: int, max_restarts: int = 100, seed: int = 0, mode: str = "auto") -> GroupDivision:
    """Certified division into C(2k+1,k)/(2k+1) groups of 2k+1 subsets.

    ``mode`` is ``auto`` (cyclic orbits, randomized fallback), ``cyclic`` or
    ``random``.
    """
    if k < 0:
        raise ParameterError(f"k must be nonnegative, got {k}")
    if mode not in ("auto", "cyclic", "random"):
        raise ParameterError(f"unknown group mode {mode!r}")
    if mode in ("auto", "cyclic"):
        groups = cyclic_groups(k)
        ranks = _certify(groups, k)
        if all(r == 2 * k + 2 for r in ranks):
            return GroupDivision(k, tuple(groups), ranks, "cyclic")
        if mode == "cyclic":
            raise GroupDivisionError(k, sum(r == 2 * k + 2 for r in ranks), 1)
    groups, _ = random_groups(k, seed=seed, max_restarts=max_restarts)
    return GroupDivision(k, tuple(groups), _certify(groups, k), "random")


# ---------------------------------------------------------------------------
# coding matrices


@dataclass
class CodingMatrix:
    relays: tuple[int, ...]               # the relay block B, sorted
    pairs: tuple[tuple[int, int], ...]    # (k3, k4): k3 is attached to max(B)
    A: list[list[Fraction]]               # len(relays) x len(pairs)
    s: tuple[Fraction, ...]               # per column: sum over H_{k4}; k3 sees -s

    def column(self, j: int) -> list[Fraction]:
        return [row[j] for row in self.A]

    def max_abs(self) -> Fraction:
        return max(abs(v) for row in self.A for v in row)

    def relay_sums(self, t: Topology, k: int) -> list[Fraction]:
        """Per column, the sum of the coefficients over the relays of user k."""
        idx = [self.relays.index(h) for h in sorted(t.relays_of(k))]
        return [sum((self.A[i][j] for i in idx), Fraction(0)) for j in range(len(self.pairs))]

    def check_zero_forcing(self, t: Topology) -> list[str]:
        """Violations of the elimination conditions; empty when the matrix is valid."""
        problems = []
        for j in range(len(self.pairs)):
            if sum(self.column(j)) != 0:
                problems.append(f"column {j} does not sum to zero")
            if self.s[j] == 0:
                problems.append(f"column {j} has s = 0")
        for j, pair in enumerate(self.pairs):
            for k in pair:
                sums = self.relay_sums(t, k)
                for jj, v in enumerate(sums):
                    if jj != j and v != 0:
                        problems.append(f"user {k} sees interference from column {jj}")
                expected = -self.s[j] if k == pair[0] else self.s[j]
                if sums[j] != expected:
                    problems.append(f"user {k} sees {sums[j]} on its own column, expected {expected}")
        return problems

    def to_json(self) -> dict:
        return {
            "relays": list(self.relays),
            "columns": [list(p) for p in self.pairs],
            "s": [str(v) for v in self.s],
            "A": [[str(v) for v in row] for row in self.A],
        }


def _primitive(vec: list[Fraction]) -> list[Fraction]:
    """Scale to a primitive integer vector; most entries positive, ties: first nonzero positive."""
    den = 1
    for v in vec:
        den = lcm(den, v.denominator)
    ints = [int(v * den) for v in vec]
    g = 0
    for v in ints:
        g = gcd(g, v)
    ints = [v // g for v in ints]
    pos = sum(v > 0 for v in ints)
    neg = sum(v < 0 for v in ints)
    first = next(v for v in ints if v)
    if neg > pos or (neg == pos and first < 0):
        ints = [-v for v in ints]
    return [Fraction(v) for v in ints]


def orient_pairs(t: Topology, group: Sequence[Sequence[int]], relays: Sequence[int]) -> list[tuple[int, int]]:
    top = max(relays)
    out = []
    for pair in group:
        a, b = sorted(pair)
        if top in t.relays_of(b) and top not in t.relays_of(a):
            a, b = b, a
        if top not in t.relays_of(a):
            raise ParameterError(f"pair {sorted(pair)} has no member attached to relay {top}")
        out.append((a, b))
    return out


def solve_coding_matrix(t: Topology, group: Sequence[Sequence[int]], s=None,
                        relays: Sequence[int] | None = None) -> CodingMatrix:
    """Coefficients for one group of complementary pairs within a relay block.

    With ``s`` given every column uses that value.  Otherwise each column is
    solved and scaled to its primitive integer form, and ``s`` is read back.
    """
    relays = tuple(sorted(relays)) if relays is not None else tuple(range(1, t.H + 1))
    if len(relays) != 2 * t.r:
        raise ParameterError(f"a coding block needs 2r = {2 * t.r} relays, got {len(relays)}")
    block = set(relays)
    pairs = orient_pairs(t, group, relays)
    for a, b in pairs:
        ha, hb = t.relays_of(a), t.relays_of(b)
        if ha & hb or (ha | hb) != block:
            raise ParameterError(f"pair ({a},{b}) is not complementary within relays {relays}")
    n = len(relays)
    C = [[Fraction(1)] * n]
    for a, _ in pairs:
        C.append([Fraction(1 if h in t.relays_of(a) else 0) for h in relays])
    if len(C) != n:
        raise ParameterError(f"group has {len(pairs)} pairs; expected {n - 1}")
    cols, svals = [], []
    for j in range(len(pairs)):
        # the row of k3 carries -s, so k4 (not on max(B)) sums to s
        target = Fraction(-1) if s is None else -Fraction(s)
        rhs = [Fraction(0)] * n
        rhs[j + 1] = target
        try:
            col = solve(C, rhs)
        except RankDeficiencyError as exc:
            raise ParameterError(f"group {[list(q) for q in pairs]} is not a valid elimination group: "
                                 f"C_g has rank {exc.rank} < {n}") from exc
        if s is None:
            col = _primitive(col)
        cols.append(col)
        svals.append(sum((col[i] for i, h in enumerate(relays) if h in t.relays_of(pairs[j][1])), Fraction(0)))
    A = [[cols[j][i] for j in range(len(pairs))] for i in range(n)]
    return CodingMatrix(relays, tuple(pairs), A, tuple(svals))


def elimination_field(matrices: Sequence[CodingMatrix]) -> int:
    """Smallest prime above every |coefficient| that keeps every s invertible.

    Zero-forcing sums are integer zeros and stay zero in any field; the
    useful sums s must not vanish, hence the divisibility condition.
    """
    bound = max((m.max_abs() for m in matrices), default=Fraction(1))
    svals = [v for m in matrices for v in m.s]
    dens = [v.denominator for m in matrices for row in m.A for v in row]
    p = next_prime(int(bound) + 1)
    while any(v.numerator % p == 0 for v in svals) or any(d % p == 0 for d in dens):
        p = next_prime(p + 1)
    return p


# ---------------------------------------------------------------------------
# plans


def block_pairs(t: Topology, relays: Sequence[int]) -> list[tuple[int, int]]:
    """T_B: complementary pairs inside block B, as (k3, k4) with k3 attached to max(B)."""
    block = frozenset(relays)
    top = max(relays)
    out = []
    for S in combinations(sorted(block), t.r):
        if top in S:
            k3 = t.user_of_relayset[frozenset(S)]
            k4 = t.user_of_relayset[block - frozenset(S)]
            out.append((k3, k4))
    return out


def block_groups(t: Topology, relays: Sequence[int], division: GroupDivision) -> list[list[tuple[int, int]]]:
    """Map each group of local subsets to user pairs of block ``relays``."""
    relays = sorted(relays)
    block = frozenset(relays)
    out = []
    for g in division.groups:
        pairs = []
        for S in g:
            local = set(S) | {2 * t.r}
            rs = frozenset(relays[i - 1] for i in local)
            pairs.append((t.user_of_relayset[rs], t.user_of_relayset[block - rs]))
        out.append(pairs)
    return out


def plan_elimination(t: Topology, p: PlacementSpec, d: DemandVector, s=None, seed: int = 0,
                     field: int | None = None, group_mode: str = "auto",
                     max_restarts: int = 100) -> DeliveryPlan:
    _validate(t, p, d)
    if p.t != 1:
        raise ParameterError(f"interference elimination needs t = 1, got t={p.t}")
    if t.H < 2 * t.r:
        plan = plan_general(t, p, d, field)
        plan.notes.append("H < 2r: no pair lacks a common relay, general scheme used")
        return plan
    division = group_divide(t.r - 1, max_restarts, seed, group_mode)
    plan = DeliveryPlan(t, p, d, scheme="elim")
    msgs = message_sets(t.K, 1)
    rest = [J for J in msgs if common_relays(t, J)]
    plan.transmissions.extend(step2_transmissions(t, p, rest))
    L = 1
    for J in rest:
        L = lcm(L, bin(common_relays(t, J)).count("1"))
    plan.symbols = L

    matrices = []
    covered = []
    for B in combinations(range(1, t.H + 1), 2 * t.r):
        for gi, pairs in enumerate(block_groups(t, B, division)):
            cm = solve_coding_matrix(t, pairs, s, B)
            matrices.append(cm)
            msgs_g = tuple((1 << (a - 1)) | (1 << (b - 1)) for a, b in cm.pairs)
            covered.extend(msgs_g)
            for i, h in enumerate(cm.relays):
                plan.transmissions.append(Transmission(
                    relay=h, kind="lincomb", messages=msgs_g, length=p.subfile_length,
                    stage="elim", coeffs=tuple(cm.A[i]), group=("elim", B, gi)))
    v1 = [J for J in msgs if not common_relays(t, J)]
    if sorted(covered) != sorted(v1):
        raise AssertionError("relay blocks do not partition the pairs without a common relay")
    if field is None:
        plan.field_size = elimination_field(matrices)
    else:
        if not is_prime(field):
            raise ParameterError(f"field size {field} is not prime")
        if any(v.numerator % field == 0 for m in matrices for v in m.s):
            raise ParameterError(f"GF({field}) annihilates a useful coefficient s")
        plan.field_size = field
    plan.extra["coding_matrices"] = matrices
    plan.extra["group_method"] = division.method
    return plan
