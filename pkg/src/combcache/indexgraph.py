"""Side-information digraph of the induced index-coding problem.

Vertices are requested subfiles keyed by ``(requester k, cache set W)`` with
``k`` not in ``W``.  There is an edge ``(k, W) -> (k', W')`` whenever the
subfile at the source is cached by the requester of the target, i.e. when
``k'`` belongs to ``W``.  Whether a vertex set is acyclic depends only on
this rule, so the helpers below work equally on graphs built from a MAN
placement and on the full graph over all subsets (used by the bounds).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .exactmath import ParameterError
from .placement import PlacementSpec
from .topology import from_mask, mask_items, to_mask

Vertex = tuple[int, int]  # (requesting user, bitmask of caching users)


@dataclass(frozen=True)
class DemandVector:
    d: tuple[int, ...]

    @classmethod
    def of(cls, demands: Iterable[int]) -> "DemandVector":
        return cls(tuple(int(x) for x in demands))

    @property
    def K(self) -> int:
        return len(self.d)

    def file_of(self, k: int) -> int:
        return self.d[k - 1]

    def is_distinct(self) -> bool:
        return len(set(self.d)) == len(self.d)

    def check(self, N: int, K: int) -> None:
        if len(self.d) != K:
            raise ParameterError(f"demand vector has {len(self.d)} entries, expected {K}")
        bad = [x for x in self.d if not 1 <= x <= N]
        if bad:
            raise ParameterError(f"demanded files {bad} outside [1, {N}]")


@dataclass(frozen=True)
class SideInfoGraph:
    K: int
    vertices: tuple[Vertex, ...]
    demands: DemandVector | None = None

    def successors(self, v: Vertex) -> list[Vertex]:
        _, W = v
        return [u for u in self.vertices if W >> (u[0] - 1) & 1]

    def edges(self) -> list[tuple[Vertex, Vertex]]:
        return [(v, u) for v in self.vertices for u in self.successors(v)]

    def label(self, v: Vertex) -> str:
        k, W = v
        f = self.demands.file_of(k) if self.demands else k
        return f"F{f},{{{','.join(map(str, mask_items(W)))}}}"

    def to_dot(self) -> str:
        names = {v: f"v{i}" for i, v in enumerate(self.vertices)}
        lines = ["digraph sideinfo {"]
        for v, n in names.items():
            lines.append(f'  {n} [label="{self.label(v)}"];')
        for a, b in self.edges():
            lines.append(f"  {names[a]} -> {names[b]};")
        lines.append("}")
        return "\n".join(lines)


def build_graph(p: PlacementSpec, d: DemandVector) -> SideInfoGraph:
    d.check(p.N, p.K)
    verts = []
    for k in range(1, p.K + 1):
        bit = 1 << (k - 1)
        verts.extend((k, W) for W in p.cache_sets() if not W & bit)
    return SideInfoGraph(K=p.K, vertices=tuple(verts), demands=d)


def full_graph(K: int) -> SideInfoGraph:
    """Graph over every (k, W) with W any subset of the other users."""
    verts = []
    for k in range(1, K + 1):
        bit = 1 << (k - 1)
        verts.extend((k, W) for W in range(1 << K) if not W & bit)
    return SideInfoGraph(K=K, vertices=tuple(verts))


def subsets_of(mask: int) -> Iterable[int]:
    """All submasks of ``mask`` including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def acyclic_set_f(d: DemandVector | None, Sprime: Iterable[int], v: Sequence[int]) -> frozenset[Vertex]:
    """Union over i of {(v_i, W) : W subset of S' minus {v_1..v_i}}.

    ``d`` only validates the user range; vertices are keyed by requester.
    """
    S = to_mask(Sprime)
    if len(set(v)) != len(v):
        raise ParameterError(f"user sequence {tuple(v)} has repeated entries")
    for u in v:
        if not S >> (u - 1) & 1:
            raise ParameterError(f"user {u} is not in {sorted(from_mask(S))}")
        if d is not None and not 1 <= u <= d.K:
            raise ParameterError(f"user {u} outside [1, {d.K}]")
    out = set()
    rest = S
    for u in v:
        rest &= ~(1 << (u - 1))
        out.update((u, W) for W in subsets_of(rest))
    return frozenset(out)


def restrict_perm_g(S: Iterable[int], p: Sequence[int]) -> tuple[int, ...]:
    keep = set(S)
    return tuple(x for x in p if x in keep)


def is_acyclic(g: SideInfoGraph | None, S: Iterable[Vertex]) -> bool:
    """Kahn's algorithm on the subgraph induced by ``S``."""
    nodes = list(set(S))
    if g is not None:
        known = set(g.vertices)
        missing = [v for v in nodes if v not in known]
        if missing:
            raise ParameterError(f"vertices {missing[:3]} are not in the graph")
    by_user: dict[int, list[Vertex]] = {}
    for v in nodes:
        by_user.setdefault(v[0], []).append(v)
    indeg = {v: 0 for v in nodes}
    succ: dict[Vertex, list[Vertex]] = {}
    for v in nodes:
        out = [u for k in mask_items(v[1]) for u in by_user.get(k, ())]
        succ[v] = out
        for u in out:
            indeg[u] += 1
    queue = [v for v in nodes if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for u in succ[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                queue.append(u)
    return seen == len(nodes)

