"""Exact rational linear programming.

Problems are ``minimize c.x`` subject to rows ``a.x (>=|<=|=) b`` and
``x >= 0``.  The solver works on the dual, ``maximize h.u`` subject to
``G^T u <= c, u >= 0`` where ``G x >= h`` is the primal rewritten in
``>=`` form.  For the bound LPs ``c >= 0`` so the dual slack basis is
feasible from the start and only rarely does a phase-one pass run.  The
primal optimum is read off the final reduced costs of the dual slacks and
then checked row by row, together with the zero duality gap, in exact
arithmetic.

Tableau entries are ``gmpy2.mpq`` for speed; everything crossing the module
boundary is ``fractions.Fraction``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Hashable, Sequence

import numpy as np
from gmpy2 import mpq

log = logging.getLogger(__name__)

Var = Hashable


class LPError(ArithmeticError):
    pass


class LPInfeasibleError(LPError):
    """Primal infeasible; ``certificate`` maps row index to a nonnegative multiplier."""

    def __init__(self, certificate: dict[int, Fraction]):
        super().__init__(f"LP infeasible (Farkas combination of {len(certificate)} rows)")
        self.certificate = certificate


class LPUnboundedError(LPError):
    pass


@dataclass
class LPRow:
    coeffs: dict[int, Fraction]
    sense: str
    rhs: Fraction
    provenance: tuple = ()

    def activity(self, x: Sequence[Fraction]) -> Fraction:
        return sum((c * x[i] for i, c in self.coeffs.items()), Fraction(0))

    def holds(self, x: Sequence[Fraction]) -> bool:
        a = self.activity(x)
        if self.sense == ">=":
            return a >= self.rhs
        if self.sense == "<=":
            return a <= self.rhs
        return a == self.rhs


@dataclass
class LinearProgram:
    variables: list[Var]
    objective: dict[int, Fraction]
    rows: list[LPRow] = field(default_factory=list)

    def index(self, var: Var) -> int:
        return self._index[var]

    def __post_init__(self):
        self._index = {v: i for i, v in enumerate(self.variables)}
        if len(self._index) != len(self.variables):
            raise ValueError("duplicate variable names")

    def add_row(self, coeffs: dict[Var, Fraction], sense: str, rhs, provenance: tuple = ()):
        if sense not in (">=", "<=", "="):
            raise ValueError(f"bad sense {sense!r}")
        row = {self._index[v]: Fraction(c) for v, c in coeffs.items() if c}
        self.rows.append(LPRow(row, sense, Fraction(rhs), provenance))


@dataclass
class LPResult:
    optimum: Fraction
    witness: dict[Var, Fraction]
    duals: dict[int, Fraction]
    iterations: int
    rows_used: int

    def to_json(self, name=str) -> dict:
        from .exactmath import fmt_rational
        return {
            "optimum": fmt_rational(self.optimum),
            "decimal": float(self.optimum),
            "witness": {name(v): fmt_rational(q) for v, q in self.witness.items() if q},
        }


def check_feasible(lp: LinearProgram, assignment: dict[Var, Fraction], limit: int = 10):
    """Exact feasibility check; returns (ok, first violated rows as (index, provenance))."""
    x = [Fraction(assignment.get(v, 0)) for v in lp.variables]
    bad = [(i, lp.variables[i]) for i, v in enumerate(x) if v < 0]
    violated = [("nonneg", var) for _, var in bad[:limit]]
    for i, row in enumerate(lp.rows):
        if len(violated) >= limit:
            break
        if not row.holds(x):
            violated.append((i, row.provenance))
    return not violated, violated


# ---------------------------------------------------------------------------
# presolve


def _ge_rows(lp: LinearProgram) -> tuple[list[dict[int, Fraction]], list[Fraction], list[int]]:
    """Rewrite every row as ``g.x >= h``; equality rows become two rows."""
    G, h, origin = [], [], []
    for i, row in enumerate(lp.rows):
        if row.sense in (">=", "="):
            G.append(dict(row.coeffs)); h.append(row.rhs); origin.append(i)
        if row.sense in ("<=", "="):
            G.append({j: -c for j, c in row.coeffs.items()}); h.append(-row.rhs); origin.append(i)
    return G, h, origin


def _presolve(G, h, n) -> list[int]:
    """Indices of rows kept after removing duplicates and dominated rows.

    With ``x >= 0`` a row ``g.x >= h`` is implied by ``g'.x >= h'`` whenever
    ``g' <= g`` entrywise and ``h' >= h``.  Only rows sharing the same support
    are compared.
    """
    groups: dict[tuple, list[int]] = {}
    for i, g in enumerate(G):
        groups.setdefault(tuple(sorted(j for j, c in g.items() if c)), []).append(i)
    keep = []
    for support, members in groups.items():
        if len(members) == 1:
            keep.extend(members)
            continue
        scale = 1
        for i in members:
            for c in list(G[i].values()) + [h[i]]:
                scale = lcm(scale, c.denominator)
        mat = [[int(G[i].get(j, 0) * scale) for j in support] + [-int(h[i] * scale)] for i in members]
        if max(abs(v) for row in mat for v in row) >= 2**62:
            keep.extend(members)
            continue
        A = np.array(mat, dtype=np.int64)
        # row j removes row i when A[j] <= A[i] everywhere (the last column
        # holds -h); exact ties keep the first occurrence
        le = (A[:, None, :] <= A[None, :, :]).all(axis=2)
        eq = (A[:, None, :] == A[None, :, :]).all(axis=2)
        idx = np.arange(len(members))
        earlier = idx[:, None] < idx[None, :]
        removes = le & (~eq | earlier)
        np.fill_diagonal(removes, False)
        dominated = removes.any(axis=0)
        keep.extend(m for m, d in zip(members, dominated) if not d)
    return sorted(keep)


# ---------------------------------------------------------------------------
# tableau simplex on the dual


class _Tableau:
    def __init__(self, rows, rhs, basis, ncols):
        self.T = rows          # list of dense mpq lists, length ncols
        self.b = rhs           # mpq
        self.basis = basis     # column index per row
        self.ncols = ncols
        self.iterations = 0

    def pivot(self, r: int, col: int, obj_rows):
        T = self.T
        prow = T[r]
        inv = 1 / prow[col]
        prow = [v * inv for v in prow]
        T[r] = prow
        self.b[r] *= inv
        br = self.b[r]
        nz = [j for j, v in enumerate(prow) if v]
        for i in range(len(T)):
            if i == r:
                continue
            row = T[i]
            f = row[col]
            if f:
                for j in nz:
                    row[j] -= f * prow[j]
                self.b[i] -= f * br
        for obj in obj_rows:
            f = obj[0][col]
            if f:
                for j in nz:
                    obj[0][j] -= f * prow[j]
                obj[1] -= f * br
        self.basis[r] = col
        self.iterations += 1

    def run(self, obj, allowed, max_iter=10**6):
        """Maximise; ``obj = [reduced-cost row, value]`` with entering on negative entries.

        Returns None at optimum, else the unbounded entering column.
        """
        degenerate = 0
        bland = False
        while True:
            z = obj[0]
            col = None
            if bland:
                col = next((j for j in allowed if z[j] < 0), None)
            else:
                best = 0
                for j in allowed:
                    if z[j] < best:
                        best, col = z[j], j
            if col is None:
                return None
            r = None
            best_ratio = None
            for i, row in enumerate(self.T):
                a = row[col]
                if a > 0:
                    ratio = self.b[i] / a
                    if (best_ratio is None or ratio < best_ratio
                            or (ratio == best_ratio and self.basis[i] < self.basis[r])):
                        best_ratio, r = ratio, i
            if r is None:
                return col
            if best_ratio == 0:
                degenerate += 1
                if degenerate > 50 and not bland:
                    log.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, col, [obj])
            if self.iterations > max_iter:
                raise LPError("iteration limit reached")


def _to_mpq(q: Fraction) -> mpq:
    return mpq(q.numerator, q.denominator)


def _from_mpq(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def solve_lp(lp: LinearProgram, presolve: bool = True, crash: bool = True) -> LPResult:
    """Exact optimum and certified primal witness.

    With ``crash`` a floating-point solve proposes a starting basis; the exact
    simplex then continues from it, so a bad proposal costs time but never
    correctness.
    """
    n = len(lp.variables)
    G, h, origin = _ge_rows(lp)
    kept = _presolve(G, h, n) if presolve else list(range(len(G)))
    m = len(kept)
    c = [lp.objective.get(j, Fraction(0)) for j in range(n)]

    res = _float_solve(G, h, c, kept, n) if crash else None
    if res is not None:
        found = _reconstruct(G, h, c, kept, n, res)
        if found is not None:
            x, u = found
            try:
                optimum = sum((cj * xj for cj, xj in zip(c, x)), Fraction(0))
                _verify(lp, x, c, optimum, G, h, kept, u)
            except LPError:
                log.debug("float vertex did not certify; running the exact simplex")
            else:
                return _result(lp, x, u, optimum, G, origin, kept, 0)

    tab, real_cols, art_rows = _dual_tableau(G, kept, c, n)
    if res is not None and not art_rows:
        proposal = _crash_columns(G, c, kept, n, res)
        if proposal and _crash(tab, proposal):
            log.debug("crash basis accepted with %d structural columns", len(proposal[0]))
        else:
            tab, real_cols, art_rows = _dual_tableau(G, kept, c, n)
    ncols = tab.ncols
    if art_rows:
        _phase_one(tab, real_cols, art_rows)

    # phase two objective: maximise h.u
    z = [mpq(0)] * ncols
    for k, gi in enumerate(kept):
        z[k] = -_to_mpq(h[gi])
    val = mpq(0)
    for i, col in enumerate(tab.basis):
        f = z[col]
        if f:
            row = tab.T[i]
            for k in range(ncols):
                if row[k]:
                    z[k] -= f * row[k]
            val -= f * tab.b[i]
    obj = [z, val]
    unbounded = tab.run(obj, real_cols)
    if unbounded is not None:
        ray = {unbounded: Fraction(1)}
        for i, col in enumerate(tab.basis):
            a = tab.T[i][unbounded]
            if a and col < m:
                ray[col] = -_from_mpq(a)
        cert: dict[int, Fraction] = {}
        for k, v in ray.items():
            if k < m and v:
                cert[origin[kept[k]]] = cert.get(origin[kept[k]], Fraction(0)) + v
        raise LPInfeasibleError(cert)

    optimum = _from_mpq(obj[1])
    x = [_from_mpq(obj[0][m + j]) for j in range(n)]
    u = [Fraction(0)] * m
    for i, col in enumerate(tab.basis):
        if col < m:
            u[col] = _from_mpq(tab.b[i])
    _verify(lp, x, c, optimum, G, h, kept, u)
    return _result(lp, x, u, optimum, G, origin, kept, tab.iterations)


def _result(lp, x, u, optimum, G, origin, kept, iterations) -> LPResult:
    duals: dict[int, Fraction] = {}
    for k, v in enumerate(u):
        if v:
            i = origin[kept[k]]
            sign = 1 if lp.rows[i].sense != "<=" else -1
            if lp.rows[i].sense == "=" and G[kept[k]] != dict(lp.rows[i].coeffs):
                sign = -1
            duals[i] = duals.get(i, Fraction(0)) + sign * v
    witness = {var: x[j] for j, var in enumerate(lp.variables)}
    return LPResult(optimum, witness, duals, iterations, len(kept))


def _dual_tableau(G, kept, c, n):
    """Tableau for ``G^T u + s = c``; rows with negative ``c`` get artificials."""
    m = len(kept)
    ncols = m + n
    rows, rhs, basis, art_rows = [], [], [], []
    for j in range(n):
        row = [mpq(0)] * ncols
        for k, gi in enumerate(kept):
            v = G[gi].get(j)
            if v:
                row[k] = _to_mpq(v)
        row[m + j] = mpq(1)
        cj = _to_mpq(c[j])
        if cj < 0:
            row = [-v for v in row]
            cj = -cj
            art_rows.append(j)
        rows.append(row)
        rhs.append(cj)
        basis.append(m + j)
    for j in art_rows:
        col = len(rows[0])
        for row in rows:
            row.append(mpq(0))
        rows[j][col] = mpq(1)
        basis[j] = col
    tab = _Tableau(rows, rhs, basis, len(rows[0]) if rows else ncols)
    return tab, list(range(m + n)), art_rows


def _phase_one(tab, real_cols, art_rows):
    art = set(range(len(real_cols), tab.ncols))
    z1 = [mpq(0)] * tab.ncols
    val = mpq(0)
    for j in art_rows:
        for k in range(tab.ncols):
            if k not in art:
                z1[k] -= tab.T[j][k]
        val -= tab.b[j]
    phase1 = [z1, val]
    tab.run(phase1, real_cols)
    if phase1[1] != 0:
        raise LPUnboundedError("dual infeasible: the primal is unbounded or infeasible")
    for i, col in enumerate(tab.basis):
        if col in art:
            piv = next((k for k in real_cols if tab.T[i][k]), None)
            if piv is not None:
                tab.pivot(i, piv, [phase1])


def _float_solve(G, h, c, kept, n):
    """HiGHS solve of the primal; None when unavailable or not optimal."""
    try:
        from scipy.optimize import linprog
        from scipy.sparse import lil_matrix
    except ImportError:  # pragma: no cover
        return None
    A = lil_matrix((len(kept), n))
    for k, gi in enumerate(kept):
        for j, v in G[gi].items():
            A[k, j] = -float(v)
    res = linprog([float(v) for v in c], A_ub=A.tocsr(), b_ub=[-float(h[gi]) for gi in kept],
                  bounds=(0, None), method="highs")
    return res if res.status == 0 else None


def _unique_solution(rows, rhs, ncols):
    """Exact solution of a consistent system with full column rank, else None."""
    m = [[mpq(v) for v in row] + [mpq(b)] for row, b in zip(rows, rhs)]
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][col]), None)
        if piv is None:
            return None
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][col]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col]:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        r += 1
    if any(row[-1] for row in m[r:]):
        return None
    return [_from_mpq(m[i][-1]) for i in range(ncols)]


def _reconstruct(G, h, c, kept, n, res, tol=1e-9):
    """Exact primal and dual vertices from the supports of a float optimum.

    The primal solves the binding rows on the positive variables, the dual
    solves the tight dual rows on the positive multipliers.  The caller
    certifies the pair, so a wrong support only costs a fallback.
    """
    m = len(kept)
    pos = [j for j in range(n) if res.x[j] > tol]
    binding = [k for k in range(m) if res.ineqlin.residual[k] <= tol]
    xs = _unique_solution([[G[kept[k]].get(j, 0) for j in pos] for k in binding],
                          [h[kept[k]] for k in binding], len(pos))
    if xs is None:
        return None
    u_f = -res.ineqlin.marginals
    support = [k for k in range(m) if u_f[k] > tol]
    reduced = np.array([float(v) for v in c])
    for k in support:
        for j, v in G[kept[k]].items():
            reduced[j] -= float(v) * u_f[k]
    tight = [j for j in range(n) if abs(reduced[j]) <= 1e-7]
    us = _unique_solution([[G[kept[k]].get(j, 0) for k in support] for j in tight],
                          [c[j] for j in tight], len(support))
    if us is None:
        return None
    x = [Fraction(0)] * n
    for j, v in zip(pos, xs):
        x[j] = v
    u = [Fraction(0)] * m
    for k, v in zip(support, us):
        u[k] = v
    if any(v < 0 for v in u):
        return None
    return x, u


def _crash_columns(G, c, kept, n, res, tol=1e-9):
    """Dual columns that a floating-point solve reports as basic, largest first."""
    u = -res.ineqlin.marginals
    order = sorted((k for k in range(len(kept)) if u[k] > tol), key=lambda k: -u[k])
    m = len(kept)
    # slacks of the dual constraints that are tight at u; any of them may leave
    reduced = [float(c[j]) for j in range(n)]
    for k in order:
        for j, v in G[kept[k]].items():
            reduced[j] -= float(v) * u[k]
    tight = sorted((j for j in range(n) if reduced[j] <= 1e-7), key=lambda j: -res.x[j])
    return order[:n], [m + j for j in tight]


def _crash(tab: "_Tableau", proposal) -> bool:
    """Pivot the proposed columns in, preferably replacing the proposed leaving slacks.

    Returns False if the resulting basis is not primal feasible.
    """
    cols, leaving = proposal
    wanted = set(cols)
    prefer = set(leaving)
    for col in cols:
        rows = [i for i, bc in enumerate(tab.basis) if bc not in wanted and tab.T[i][col]]
        if not rows:
            continue
        r = next((i for i in rows if tab.basis[i] in prefer), rows[0])
        tab.pivot(r, col, [])
    return all(v >= 0 for v in tab.b)


def _verify(lp, x, c, optimum, G, h, kept, u):
    if any(v < 0 for v in x):
        raise LPError("negative primal witness")
    for i, row in enumerate(lp.rows):
        if not row.holds(x):
            raise LPError(f"primal witness violates row {i} {row.provenance}")
    primal = sum((cj * xj for cj, xj in zip(c, x)), Fraction(0))
    dual = sum((h[gi] * uk for gi, uk in zip(kept, u)), Fraction(0))
    if not primal == dual == optimum:
        raise LPError(f"duality gap: primal {primal}, dual {dual}, tableau {optimum}")
    for j in range(len(x)):
        lhs = sum((G[gi].get(j, 0) * uk for gi, uk in zip(kept, u) if uk), Fraction(0))
        if lhs > c[j]:
            raise LPError(f"dual multipliers infeasible at column {j}")
