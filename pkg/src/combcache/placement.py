"""MAN uncoded placement and the subfile-mass vector.

A subfile is identified by ``(file, W)`` where ``W`` is the bitmask of the
users that cache it.  Subfiles stay symbolic; only their normalised length
``1 / C(K, t)`` is tracked here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterator

from .exactmath import ParameterError, binom
from .topology import to_mask


@dataclass(frozen=True)
class PlacementSpec:
    N: int
    K: int
    t: int

    def __post_init__(self):
        if self.N < 1 or self.K < 1:
            raise ParameterError(f"need N >= 1 and K >= 1, got N={self.N}, K={self.K}")
        if not 0 <= self.t <= self.K:
            raise ParameterError(f"t={self.t} outside [0, {self.K}]")

    @property
    def M(self) -> Fraction:
        return Fraction(self.t * self.N, self.K)

    @property
    def subfiles_per_file(self) -> int:
        return binom(self.K, self.t)

    @property
    def subfile_length(self) -> Fraction:
        """Length of one subfile as a fraction of the file size B."""
        return Fraction(1, self.subfiles_per_file)

    def cache_sets(self) -> Iterator[int]:
        """Bitmasks W with |W| = t, in lexicographic order of the member lists."""
        for c in combinations(range(1, self.K + 1), self.t):
            yield to_mask(c)

    def subfiles(self) -> Iterator[tuple[int, int]]:
        """All (file, W) pairs; files are 1-based."""
        sets = list(self.cache_sets())
        for i in range(1, self.N + 1):
            for W in sets:
                yield i, W

    def stores(self, user: int, W: int) -> bool:
        return bool(W >> (user - 1) & 1)

    def stored_fraction(self, user: int) -> Fraction:
        """Fraction of each file cached by ``user``."""
        hits = sum(1 for W in self.cache_sets() if self.stores(user, W))
        return hits * self.subfile_length

    def to_json(self) -> dict:
        return {"N": self.N, "K": self.K, "t": self.t, "M": str(self.M)}


@dataclass(frozen=True)
class SubfileMass:
    """Normalised total size x_W of the bits cached exactly by W (sparse)."""

    K: int
    x: dict[int, Fraction]

    def total(self) -> Fraction:
        return sum(self.x.values(), Fraction(0))

    def user_load(self, user: int) -> Fraction:
        bit = 1 << (user - 1)
        return sum((v for W, v in self.x.items() if W & bit), Fraction(0))

    def is_feasible(self, memory_ratio: Fraction) -> bool:
        """Normalisation, per-user memory and nonnegativity constraints."""
        return (
            self.total() == 1
            and all(v >= 0 for v in self.x.values())
            and all(self.user_load(i) <= memory_ratio for i in range(1, self.K + 1))
        )

    def dense(self) -> list[Fraction]:
        return [self.x.get(W, Fraction(0)) for W in range(1 << self.K)]


def man_placement(N: int, K: int, t: int) -> PlacementSpec:
    return PlacementSpec(N=N, K=K, t=t)


def mass_of(p: PlacementSpec) -> SubfileMass:
    share = p.subfile_length
    return SubfileMass(K=p.K, x={W: share for W in p.cache_sets()})
