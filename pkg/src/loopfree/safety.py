"""Safety checks for candidate update sets.

The per-round safety question quantifies over every subset X of the
candidate set (any prefix of the asynchronous schedule may have landed).
Both checks here collapse that quantifier into a single graph query on the
*union graph*, which carries both the old and new out-edge for every
candidate node:

* strong mode: the candidate is safe iff the union graph is acyclic —
  a directed cycle uses exactly one outgoing edge per visited node, so any
  union-graph cycle induces a consistent X and vice versa;
* relaxed mode: safe iff no union-graph cycle is reachable from the
  source — a shortest source-to-cycle path plus the cycle visits each node
  once, so per-node edge choices stay consistent.

Neither reduction is taken on faith: :func:`oracle_safe` enumerates the
subsets literally and the test suite requires exact agreement.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from .errors import CapExceeded
from .model import RoundState

SLF = "slf"
RLF = "rlf"

ORACLE_CAP_DEFAULT = 20


@dataclass(frozen=True)
class SafetyVerdict:
    """Outcome of a safety check, with a replayable witness when unsafe.

    ``witness_x`` is a subset of the candidate set whose application
    produces ``witness_cycle`` as a forwarding loop (reachable from the
    source in relaxed mode).
    """

    safe: bool
    witness_x: frozenset[str] | None = None
    witness_cycle: tuple[str, ...] | None = None

    def __bool__(self) -> bool:  # pragma: no cover - convenience
        return self.safe


def union_graph(state: RoundState, candidate: Iterable[str]) -> dict[str, tuple[str, ...]]:
    """Adjacency carrying both edges for candidate nodes, one otherwise."""
    cand = frozenset(candidate)
    inst = state.instance
    adj: dict[str, tuple[str, ...]] = {}
    for v in inst.nodes:
        if v in cand:
            adj[v] = (inst.out1(v), inst.out2(v))  # type: ignore[assignment]
        else:
            w = state.active_out(v)
            adj[v] = () if w is None else (w,)
    return adj


def _union_indices(state: RoundState, cand: frozenset[str]) -> list[tuple[int, ...]]:
    inst = state.instance
    active = state.active_indices()
    adj: list[tuple[int, ...]] = []
    for i, v in enumerate(inst.nodes):
        if v in cand:
            adj.append((inst._nxt1[i], inst._nxt2[i]))
        else:
            j = active[i]
            adj.append((j,) if j >= 0 else ())
    return adj


def _find_cycle(adj: list[tuple[int, ...]], order: Iterable[int]) -> list[int] | None:
    """First cycle found by iterative three-color DFS, or None."""
    n = len(adj)
    color = [0] * n  # 0 white, 1 grey, 2 black
    parent_edge: list[int] = [-1] * n
    for root in order:
        if color[root] != 0:
            continue
        stack: list[tuple[int, int]] = [(root, 0)]
        color[root] = 1
        while stack:
            v, idx = stack[-1]
            nbrs = adj[v]
            if idx < len(nbrs):
                stack[-1] = (v, idx + 1)
                w = nbrs[idx]
                if w < 0:
                    continue
                if color[w] == 0:
                    color[w] = 1
                    parent_edge[w] = v
                    stack.append((w, 0))
                elif color[w] == 1:
                    cycle = [w]
                    u = v
                    while u != w:
                        cycle.append(u)
                        u = parent_edge[u]
                    cycle.reverse()
                    return cycle
            else:
                color[v] = 2
                stack.pop()
    return None


def _choices_to_x(
    state: RoundState, cand: frozenset[str], sequences: list[tuple[list[int], bool]]
) -> frozenset[str]:
    """Candidate nodes whose new edge is used along the given sequences.

    Each entry is a node sequence plus a flag telling whether it wraps
    around (a cycle) or stops before its last node (a path).  Applying
    exactly the returned X reproduces every edge used, which is what makes
    witnesses replayable.
    """
    inst = state.instance
    x: set[str] = set()
    for seq, closed in sequences:
        m = len(seq)
        last = m if closed else m - 1
        for k in range(last):
            i = seq[k]
            v = inst.nodes[i]
            if v in cand:
                succ = seq[(k + 1) % m]
                if succ == inst._nxt2[i] and succ != inst._nxt1[i]:
                    x.add(v)
    return frozenset(x)


def slf_safe(state: RoundState, candidate: Iterable[str]) -> SafetyVerdict:
    """Strong check: the union graph must be acyclic."""
    cand = frozenset(candidate)
    inst = state.instance
    adj = _union_indices(state, cand)
    cycle = _find_cycle(adj, range(len(adj)))
    if cycle is None:
        return SafetyVerdict(True)
    names = tuple(inst.nodes[i] for i in cycle)
    return SafetyVerdict(False, _choices_to_x(state, cand, [(cycle, True)]), names)


def rlf_safe(state: RoundState, candidate: Iterable[str]) -> SafetyVerdict:
    """Relaxed check: no union-graph cycle may be reachable from the source."""
    cand = frozenset(candidate)
    inst = state.instance
    adj = _union_indices(state, cand)
    n = len(adj)
    src = inst.position(inst.s)

    # BFS keeps parents so a shortest source-to-cycle path can be rebuilt.
    parent = [-2] * n  # -2 unvisited, -1 root
    parent[src] = -1
    depth = [0] * n
    queue = [src]
    reach = [False] * n
    reach[src] = True
    while queue:
        nxt: list[int] = []
        for v in queue:
            for w in adj[v]:
                if w >= 0 and not reach[w]:
                    reach[w] = True
                    parent[w] = v
                    depth[w] = depth[v] + 1
                    nxt.append(w)
        queue = nxt

    sub = [tuple(w for w in adj[i] if w >= 0 and reach[w]) if reach[i] else () for i in range(n)]
    cycle = _find_cycle(sub, [i for i in range(n) if reach[i]])
    if cycle is None:
        return SafetyVerdict(True)

    entry = min(cycle, key=lambda i: depth[i])
    path: list[int] = []
    u = entry
    while u != -1:
        path.append(u)
        u = parent[u]
    path.reverse()  # source .. entry
    k = cycle.index(entry)
    ring = cycle[k:] + cycle[:k]
    x = _choices_to_x(state, cand, [(path, False), (ring, True)])
    names = tuple(inst.nodes[i] for i in ring)
    return SafetyVerdict(False, x, names)


def mode_safe(state: RoundState, candidate: Iterable[str], mode: str) -> SafetyVerdict:
    if mode == SLF:
        return slf_safe(state, candidate)
    if mode == RLF:
        return rlf_safe(state, candidate)
    raise ValueError(f"unknown mode {mode!r}")


def oracle_safe(
    state: RoundState,
    candidate: Iterable[str],
    mode: str,
    cap: int = ORACLE_CAP_DEFAULT,
) -> SafetyVerdict:
    """Literal subset enumeration; the ground truth the fast checks must match.

    Every X yields a concrete forwarding function (candidates in X use the
    new rule, the rest of the candidates the old one); that function is
    checked for loops directly — any walk looping in strong mode, the walk
    from the source in relaxed mode.  Subsets are visited by cardinality
    then lexicographically, so the witness is the lowest-cardinality,
    lexicographically-first violating X.
    """
    if mode not in (SLF, RLF):
        raise ValueError(f"unknown mode {mode!r}")
    cand = sorted(frozenset(candidate), key=state.instance.position)
    if len(cand) > cap:
        raise CapExceeded(f"oracle capped at {cap} candidate nodes, got {len(cand)}")
    inst = state.instance
    n = len(inst.nodes)
    base = list(state.active_indices())
    idx = [inst.position(v) for v in cand]
    new = [inst._nxt2[i] for i in idx]
    src = inst.position(inst.s)
    rlf = mode == RLF

    # Stamps avoid reallocating per subset; the patched graph is functional
    # (one out-edge per node), so every walk either reaches the destination,
    # joins an already-cleared walk, or closes a loop on itself.
    cleared = [0] * n
    onpath = [0] * n
    trial = 0

    def find_loop(active: list[int]) -> list[int] | None:
        nonlocal trial
        trial += 1
        starts = (src,) if rlf else range(n)
        for start in starts:
            if cleared[start] == trial:
                continue
            path: list[int] = []
            i = start
            while i >= 0 and cleared[i] != trial:
                if onpath[i] == trial:
                    k = path.index(i)
                    return path[k:]
                onpath[i] = trial
                path.append(i)
                i = active[i]
            for j in path:
                cleared[j] = trial
        return None

    for size in range(len(cand) + 1):
        for combo in combinations(range(len(cand)), size):
            active = base[:]
            for k in combo:
                active[idx[k]] = new[k]
            loop = find_loop(active)
            if loop is not None:
                x = frozenset(cand[k] for k in combo)
                names = tuple(inst.nodes[i] for i in loop)
                return SafetyVerdict(False, x, names)
    return SafetyVerdict(True)
