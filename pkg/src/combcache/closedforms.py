"""Closed-form loads and piecewise-linear curves."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .exactmath import ParameterError, as_rational, binom
from .topology import Topology


@dataclass(frozen=True)
class LoadCurve:
    """Breakpoints (M, R), linearly interpolated between them."""

    breakpoints: tuple[tuple[Fraction, Fraction], ...]
    kind: str = "achievable"

    def __post_init__(self):
        ms = [m for m, _ in self.breakpoints]
        if any(a >= b for a, b in zip(ms, ms[1:])):
            raise ParameterError("curve breakpoints must have strictly increasing M")

    def __call__(self, M) -> Fraction:
        M = as_rational(M)
        pts = self.breakpoints
        if not pts[0][0] <= M <= pts[-1][0]:
            raise ParameterError(f"M={M} outside [{pts[0][0]}, {pts[-1][0]}]")
        for (m0, r0), (m1, r1) in zip(pts, pts[1:]):
            if m0 <= M <= m1:
                return r0 + (r1 - r0) * (M - m0) / (m1 - m0)
        return pts[0][1]


def lower_convex_hull(points: Iterable[tuple[Fraction, Fraction]]) -> LoadCurve:
    """Lower convex envelope, i.e. the best memory-sharing curve through the points."""
    best: dict[Fraction, Fraction] = {}
    for m, r in points:
        m, r = Fraction(m), Fraction(r)
        best[m] = min(r, best.get(m, r))
    pts = sorted(best.items())
    hull: list[tuple[Fraction, Fraction]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point if it lies on or above the chord
            if (y2 - y1) * (p[0] - x1) >= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    return LoadCurve(tuple(hull), "achievable")


def load_thm6(t: Topology) -> Fraction:
    """Interference-elimination load at M = N/K (requires H >= 2r)."""
    H, r, K = t.H, t.r, t.K
    if H < 2 * r:
        raise ParameterError(f"the elimination load needs H >= 2r; got H={H}, r={r}")
    step2 = Fraction(K - 1 - binom(H - r, r), 2 * H)
    v1 = Fraction(binom(2 * r - 1, r - 1), (2 * r - 1) * K) * binom(H - 1, 2 * r - 1)
    return step2 + v1


def elimination_v1_load(t: Topology) -> Fraction:
    r, K = t.r, t.K
    return Fraction(binom(2 * r - 1, r - 1), (2 * r - 1) * K) * binom(t.H - 1, 2 * r - 1)


def thm8_low_memory(t: Topology, N: int, M) -> Fraction:
    """Optimal uncoded-placement load for H <= 2r and M <= N/K."""
    M = as_rational(M)
    H, r, K = t.H, t.r, t.K
    if N < K:
        raise ParameterError(f"needs N >= K; got N={N}, K={K}")
    if H > 2 * r:
        raise ParameterError(f"needs H <= 2r; got H={H}, r={r}")
    if not 0 <= M <= Fraction(N, K):
        raise ParameterError(f"needs 0 <= M <= N/K = {Fraction(N, K)}; got {M}")
    x = K * M / N
    if H < 2 * r:
        return -Fraction(K + 1, 2 * H) * x + Fraction(K, H)
    return (K * (H - 1) - (Fraction(K * H + H - K, 2) - 1) * x) / (H * (H - 1))


def thm7_points(t: Topology, N: int) -> list[tuple[Fraction, Fraction]]:
    H, K = t.H, t.K
    if t.r != H - 1:
        raise ParameterError(f"needs r = H-1; got H={H}, r={t.r}")
    if N < K:
        raise ParameterError(f"needs N >= K; got N={N}, K={K}")
    pts = [(Fraction(s * N, K), Fraction(K - s, (s + 1) * H)) for s in range(K - 1)]
    pts.append((Fraction(N), Fraction(0)))
    return pts


def thm7_curve(t: Topology, N: int) -> LoadCurve:
    return lower_convex_hull(thm7_points(t, N))


def grid(lo, hi, n: int) -> list[Fraction]:
    lo, hi = as_rational(lo), as_rational(hi)
    if n < 2:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def is_nonincreasing(values: Sequence[Fraction]) -> bool:
    return all(a >= b for a, b in zip(values, values[1:]))
