"""Combination network incidence structure.

Relays are numbered ``1..H`` and users ``1..K``.  User ids follow the
lexicographic order of their ``r``-subsets of relays, so for ``H=4, r=2``
user 1 is ``{1,2}`` and user 6 is ``{3,4}``.  Sets are stored internally
as bitmasks (bit ``i-1`` for element ``i``); the public helpers accept and
return ordinary ``frozenset`` objects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable

from .exactmath import ParameterError, binom

MAX_USERS = 64
MAX_RELAYS = 63


def to_mask(items: Iterable[int]) -> int:
    mask = 0
    for i in items:
        mask |= 1 << (i - 1)
    return mask


def from_mask(mask: int) -> frozenset[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def mask_items(mask: int) -> list[int]:
    """Sorted 1-based members of a bitmask."""
    return sorted(from_mask(mask))


@dataclass(frozen=True)
class Topology:
    H: int
    r: int
    K: int
    user_relays: tuple[frozenset[int], ...] = field(repr=False)
    relay_users: tuple[frozenset[int], ...] = field(repr=False)

    def relays_of(self, k: int) -> frozenset[int]:
        """H_k: the r relays of user k."""
        return self.user_relays[k - 1]

    def users_of(self, h: int) -> frozenset[int]:
        """U_h: the users attached to relay h."""
        return self.relay_users[h - 1]

    @cached_property
    def user_relay_masks(self) -> tuple[int, ...]:
        return tuple(to_mask(s) for s in self.user_relays)

    @cached_property
    def relay_user_masks(self) -> tuple[int, ...]:
        return tuple(to_mask(s) for s in self.relay_users)

    @cached_property
    def user_of_relayset(self) -> dict[frozenset[int], int]:
        return {s: k for k, s in enumerate(self.user_relays, start=1)}

    @property
    def all_users_mask(self) -> int:
        return (1 << self.K) - 1

    @property
    def all_relays_mask(self) -> int:
        return (1 << self.H) - 1

    # mask-level queries used by the bound generators
    def users_within_mask(self, relay_mask: int) -> int:
        out = 0
        for k, rm in enumerate(self.user_relay_masks):
            if rm & ~relay_mask == 0:
                out |= 1 << k
        return out

    def relays_common_mask(self, user_mask: int) -> int:
        out = self.all_relays_mask
        for k, rm in enumerate(self.user_relay_masks):
            if user_mask >> k & 1:
                out &= rm
        return out

    def to_json(self) -> str:
        return json.dumps({
            "H": self.H,
            "r": self.r,
            "users": [{"id": k, "relays": sorted(s)} for k, s in enumerate(self.user_relays, 1)],
        })


def build_topology(H: int, r: int) -> Topology:
    if not (isinstance(H, int) and isinstance(r, int)) or r < 1 or r > H:
        raise ParameterError(f"need 1 <= r <= H, got H={H}, r={r}")
    if H > MAX_RELAYS:
        raise ParameterError(f"H={H} exceeds the supported maximum {MAX_RELAYS}")
    K = binom(H, r)
    if K > MAX_USERS:
        raise ParameterError(f"K=C({H},{r})={K} exceeds the supported maximum {MAX_USERS}")
    user_relays = tuple(frozenset(c) for c in combinations(range(1, H + 1), r))
    relay_users = tuple(
        frozenset(k for k, s in enumerate(user_relays, 1) if h in s) for h in range(1, H + 1)
    )
    return Topology(H=H, r=r, K=K, user_relays=user_relays, relay_users=relay_users)


def users_within(t: Topology, J: Iterable[int]) -> frozenset[int]:
    """K_J: users whose whole relay neighbourhood lies in J."""
    J = frozenset(J)
    return frozenset(k for k, s in enumerate(t.user_relays, 1) if s <= J)


def relays_common(t: Topology, J: Iterable[int]) -> frozenset[int]:
    """R_J: relays connected to every user of J."""
    out = set(range(1, t.H + 1))
    for k in J:
        out &= t.relays_of(k)
    return frozenset(out)


def complement_pairs(t: Topology) -> list[frozenset[int]]:
    """Unordered user pairs with disjoint relay sets, sorted by (min, max)."""
    masks = t.user_relay_masks
    return [
        frozenset((a + 1, b + 1))
        for a in range(t.K)
        for b in range(a + 1, t.K)
        if masks[a] & masks[b] == 0
    ]
