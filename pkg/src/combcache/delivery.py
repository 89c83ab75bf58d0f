"""General delivery scheme and an end-to-end finite-field simulator.

For every user set ``J`` of size ``t+1`` the server forms
``W_J = sum_{j in J} F_{d_j, J minus j}`` (over GF(p), which plays the role
of the XOR).  Messages with a relay common to all of ``J`` are split into
equal pieces, one per common relay.  Messages without a common relay (the
set ``V_1``) are sent as linear combinations: each relay touching ``J``
receives ``1/r`` of the message length worth of combinations, so every user
in ``J`` collects a full-rank square system from its ``r`` relays.

The combination rows are Vandermonde rows ``(1, a, a^2, ...)`` at distinct
powers ``a = g^e`` of a primitive root ``g``, so any ``L`` of them are
independent.  Plans are symbolic; :func:`simulate_decode` materialises
random subfiles from a seed and checks that every user recovers its file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import lcm
from typing import Iterable

import numpy as np

from .exactmath import (
    ParameterError,
    RankDeficiencyError,
    fmt_rational,
    is_prime,
    next_prime,
    primitive_root,
    solve,
)
from .indexgraph import DemandVector
from .placement import PlacementSpec
from .topology import Topology, mask_items, to_mask


@dataclass(frozen=True)
class Transmission:
    """One server-to-relay payload.

    ``kind`` is ``piece`` (a slice of one message), ``combo`` (Vandermonde
    combinations of one message) or ``lincomb`` (a linear combination of
    several whole messages, used by interference elimination).
    """

    relay: int
    kind: str
    messages: tuple[int, ...]          # user-set bitmasks J
    length: Fraction                   # normalised by the file size
    stage: str
    index: int = 0                     # piece index, or first evaluation exponent
    count: int = 1                     # number of pieces, or number of combination rows
    coeffs: tuple[Fraction, ...] = ()  # lincomb coefficients, aligned with ``messages``
    group: tuple = ()

    def useful_to(self, k: int) -> bool:
        bit = 1 << (k - 1)
        return any(J & bit for J in self.messages)

    def to_json(self) -> dict:
        out = {
            "J": [mask_items(J) for J in self.messages] if len(self.messages) > 1 else mask_items(self.messages[0]),
            "kind": {"lincomb": "elim"}.get(self.kind, self.kind),
            "len": fmt_rational(self.length),
        }
        if self.coeffs:
            out["coeffs"] = [fmt_rational(c) for c in self.coeffs]
        return out


@dataclass
class DeliveryPlan:
    topology: Topology
    placement: PlacementSpec
    demands: DemandVector
    scheme: str
    transmissions: list[Transmission] = field(default_factory=list)
    field_size: int = 2
    symbols: int = 1          # GF(p) symbols per subfile
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    # loads ---------------------------------------------------------------
    def relay_loads(self) -> dict[int, Fraction]:
        out = {h: Fraction(0) for h in range(1, self.topology.H + 1)}
        for tx in self.transmissions:
            out[tx.relay] += tx.length
        return out

    def forwards(self) -> dict[tuple[int, int], list[int]]:
        """Relay h forwards a transmission to user k when k is attached and needs it."""
        out: dict[tuple[int, int], list[int]] = {}
        for idx, tx in enumerate(self.transmissions):
            for k in self.topology.users_of(tx.relay):
                if tx.useful_to(k):
                    out.setdefault((tx.relay, k), []).append(idx)
        return out

    def user_link_loads(self) -> dict[tuple[int, int], Fraction]:
        return {
            key: sum((self.transmissions[i].length for i in idxs), Fraction(0))
            for key, idxs in self.forwards().items()
        }

    def stage_loads(self) -> dict[str, Fraction]:
        """Largest per-relay load of each stage."""
        per: dict[str, dict[int, Fraction]] = {}
        for tx in self.transmissions:
            d = per.setdefault(tx.stage, {})
            d[tx.relay] = d.get(tx.relay, Fraction(0)) + tx.length
        return {s: max(d.values()) for s, d in per.items()}

    def to_json(self) -> dict:
        relays: dict[str, list] = {str(h): [] for h in range(1, self.topology.H + 1)}
        for tx in self.transmissions:
            relays[str(tx.relay)].append(tx.to_json())
        return {
            "scheme": self.scheme,
            "H": self.topology.H, "r": self.topology.r, "K": self.topology.K,
            "N": self.placement.N, "t": self.placement.t,
            "demands": list(self.demands.d),
            "field": self.field_size,
            "symbols_per_subfile": self.symbols,
            "max_link_load": fmt_rational(max_link_load(self)),
            "stage_loads": {s: fmt_rational(v) for s, v in self.stage_loads().items()},
            "relays": relays,
            "notes": self.notes,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def max_link_load(plan: DeliveryPlan) -> Fraction:
    loads = list(plan.relay_loads().values()) + list(plan.user_link_loads().values())
    return max(loads, default=Fraction(0))


def common_relays(t: Topology, J: int) -> int:
    return t.relays_common_mask(J)


def touching_relays(t: Topology, J: int) -> int:
    out = 0
    for k in mask_items(J):
        out |= t.user_relay_masks[k - 1]
    return out


def message_sets(K: int, t: int) -> list[int]:
    return [to_mask(c) for c in combinations(range(1, K + 1), t + 1)] if t < K else []


def _validate(t: Topology, p: PlacementSpec, d: DemandVector) -> None:
    if p.K != t.K:
        raise ParameterError(f"placement has K={p.K} but the network has K={t.K}")
    d.check(p.N, t.K)


def step2_transmissions(t: Topology, p: PlacementSpec, messages: Iterable[int]) -> list[Transmission]:
    sub = p.subfile_length
    out = []
    for J in messages:
        relays = mask_items(common_relays(t, J))
        for i, h in enumerate(relays):
            out.append(Transmission(relay=h, kind="piece", messages=(J,), length=sub / len(relays),
                                    stage="step2", index=i, count=len(relays)))
    return out


def plan_general(t: Topology, p: PlacementSpec, d: DemandVector, field: int | None = None,
                 multiplier: int = 1) -> DeliveryPlan:
    """General scheme at integer cache parameter ``p.t``: split or combination-coded messages."""
    _validate(t, p, d)
    plan = DeliveryPlan(t, p, d, scheme="general")
    msgs = message_sets(t.K, p.t)
    v1 = [J for J in msgs if common_relays(t, J) == 0]
    rest = [J for J in msgs if common_relays(t, J)]
    plan.transmissions.extend(step2_transmissions(t, p, rest))

    L = 1
    for J in rest:
        L = lcm(L, bin(common_relays(t, J)).count("1"))
    if v1:
        L = lcm(L, t.r)
    L *= multiplier
    plan.symbols = L

    need = 2
    if v1:
        rows = L // t.r
        for J in v1:
            touching = mask_items(touching_relays(t, J))
            for i, h in enumerate(touching):
                plan.transmissions.append(Transmission(
                    relay=h, kind="combo", messages=(J,), length=p.subfile_length / t.r,
                    stage="step3", index=i * rows, count=rows))
            # distinct nonzero evaluation points: one per combination row
            need = max(need, len(touching) * rows + 1)
    plan.field_size = _pick_field(need, field)
    plan.extra["v1"] = [mask_items(J) for J in v1]
    return plan


def _pick_field(minimum: int, requested: int | None) -> int:
    if requested is None:
        return next_prime(minimum)
    if not is_prime(requested):
        raise ParameterError(f"field size {requested} is not prime")
    if requested < minimum:
        raise ParameterError(f"field size {requested} is below the plan minimum {minimum}")
    return requested


# ---------------------------------------------------------------------------
# simulation


@dataclass
class UserVerdict:
    user: int
    ok: bool
    reason: str = ""

    def to_json(self) -> dict:
        return {"user": self.user, "ok": self.ok, **({"reason": self.reason} if self.reason else {})}


@dataclass
class SimulationReport:
    field_size: int
    symbols: int
    verdicts: list[UserVerdict]

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)

    @property
    def failures(self) -> list[UserVerdict]:
        return [v for v in self.verdicts if not v.ok]

    def to_json(self) -> dict:
        return {"field": self.field_size, "symbols_per_subfile": self.symbols, "ok": self.ok,
                "users": [v.to_json() for v in self.verdicts]}


class DecodeFailure(Exception):
    pass


def vandermonde_rows(p: int, start: int, count: int, L: int) -> list[list[int]]:
    g = primitive_root(p)
    rows = []
    for e in range(start, start + count):
        a = pow(g, e, p)
        rows.append([pow(a, c, p) for c in range(L)])
    return rows


def _field_coeff(q: Fraction, p: int) -> int:
    if q.denominator % p == 0:
        raise ParameterError(f"coefficient {q} is undefined in GF({p})")
    return q.numerator * pow(q.denominator, -1, p) % p


def simulate_decode(t: Topology, p: PlacementSpec, d: DemandVector, plan: DeliveryPlan,
                    field: int | None = None, seed: int = 0) -> SimulationReport:
    """Materialise random subfiles, run the plan and decode at every user."""
    _validate(t, p, d)
    q = field if field is not None else plan.field_size
    if q != plan.field_size:
        raise ParameterError(f"plan was built for GF({plan.field_size}), not GF({q})")
    L = plan.symbols
    rng = np.random.default_rng(seed)
    cache_sets = list(p.cache_sets())
    pos = {W: i for i, W in enumerate(cache_sets)}
    files = rng.integers(0, q, size=(p.N, len(cache_sets), L), dtype=np.int64)

    def sub(i, W):
        return files[i - 1, pos[W]]

    def message(J):
        acc = np.zeros(L, dtype=np.int64)
        for j in mask_items(J):
            acc += sub(d.file_of(j), J & ~(1 << (j - 1)))
        return acc % q

    # server side: realise every transmission
    payloads = []
    for tx in plan.transmissions:
        if tx.kind == "piece":
            if L % tx.count:
                raise ParameterError(f"{L} symbols cannot be split into {tx.count} pieces")
            w = L // tx.count
            payloads.append(message(tx.messages[0])[tx.index * w:(tx.index + 1) * w])
        elif tx.kind == "combo":
            V = np.array(vandermonde_rows(q, tx.index, tx.count, L), dtype=np.int64)
            payloads.append(V @ message(tx.messages[0]) % q)
        elif tx.kind == "lincomb":
            acc = np.zeros(L, dtype=np.int64)
            for J, c in zip(tx.messages, tx.coeffs):
                acc += _field_coeff(c, q) * message(J)
            payloads.append(acc % q)
        else:
            raise ParameterError(f"unknown transmission kind {tx.kind!r}")

    fwd = plan.forwards()
    verdicts = []
    for k in range(1, t.K + 1):
        received = [i for h in sorted(t.relays_of(k)) for i in fwd.get((h, k), [])]
        try:
            recovered = _decode_user(k, t, p, d, plan, received, payloads, sub, q, L)
            bit = 1 << (k - 1)
            for W in cache_sets:
                want = sub(d.file_of(k), W)
                got = want if W & bit else recovered.get(W)
                if got is None:
                    raise DecodeFailure(f"subfile W={mask_items(W)} was never delivered")
                if not np.array_equal(got % q, want):
                    raise DecodeFailure(f"subfile W={mask_items(W)} decoded incorrectly")
            verdicts.append(UserVerdict(k, True))
        except DecodeFailure as exc:
            verdicts.append(UserVerdict(k, False, str(exc)))
    return SimulationReport(q, L, verdicts)


def _decode_user(k, t, p, d, plan, received, payloads, sub, q, L) -> dict[int, np.ndarray]:
    bit = 1 << (k - 1)
    pieces: dict[int, dict[int, np.ndarray]] = {}
    piece_counts: dict[int, int] = {}
    combos: dict[int, list[tuple[list[list[int]], np.ndarray]]] = {}
    groups: dict[tuple, list[int]] = {}
    for i in received:
        tx = plan.transmissions[i]
        if tx.kind == "piece":
            pieces.setdefault(tx.messages[0], {})[tx.index] = payloads[i]
            piece_counts[tx.messages[0]] = tx.count
        elif tx.kind == "combo":
            rows = vandermonde_rows(q, tx.index, tx.count, L)
            combos.setdefault(tx.messages[0], []).append((rows, payloads[i]))
        else:
            groups.setdefault(tx.group, []).append(i)

    messages: dict[int, np.ndarray] = {}
    for J, got in pieces.items():
        n = piece_counts[J]
        if len(got) < n:
            missing = sorted(set(range(n)) - set(got))
            raise DecodeFailure(f"J={mask_items(J)}: pieces {missing} of {n} missing at user {k}")
        messages[J] = np.concatenate([got[i] for i in range(n)])
    for J, blocks in combos.items():
        A = [row for rows, _ in blocks for row in rows]
        y = [int(v) for _, pay in blocks for v in pay]
        if len(A) < L:
            raise DecodeFailure(f"J={mask_items(J)}: user {k} has rank {len(A)} < {L}")
        A, y = A[:L], y[:L]
        try:
            messages[J] = np.array(solve(A, y, modulus=q), dtype=np.int64)
        except RankDeficiencyError as exc:
            raise DecodeFailure(f"J={mask_items(J)}: user {k} achieved rank {exc.rank} < {L}") from exc
    for gid, idxs in groups.items():
        # sum all codewords of the group received from this user's relays
        total = np.zeros(L, dtype=np.int64)
        coeff: dict[int, int] = {}
        for i in idxs:
            tx = plan.transmissions[i]
            total += payloads[i]
            for J, c in zip(tx.messages, tx.coeffs):
                coeff[J] = (coeff.get(J, 0) + _field_coeff(c, q)) % q
        live = {J: c for J, c in coeff.items() if c}
        mine = [J for J in live if J & bit]
        if len(mine) != 1 or len(live) != 1:
            raise DecodeFailure(
                f"group {gid}: user {k} is left with interference from "
                f"{[mask_items(J) for J in live if not J & bit]}")
        J = mine[0]
        messages[J] = total % q * pow(live[J], -1, q) % q

    recovered: dict[int, np.ndarray] = {}
    for J in message_sets(t.K, p.t):
        if not J & bit:
            continue
        if J not in messages:
            raise DecodeFailure(f"J={mask_items(J)}: no transmission reached user {k}")
        acc = messages[J].copy()
        for j in mask_items(J):
            if j != k:
                acc -= sub(d.file_of(j), J & ~(1 << (j - 1)))
        recovered[J & ~bit] = acc % q
    return recovered


def general_load(t: Topology, N: int, t_param: int) -> Fraction:
    """Max-link load of the general scheme under distinct demands."""
    p = PlacementSpec(N=N, K=t.K, t=t_param)
    d = DemandVector(tuple((i % N) + 1 for i in range(t.K)))
    return max_link_load(plan_general(t, p, d))


