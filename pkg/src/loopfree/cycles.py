"""Simple-cycle enumeration for directed graphs.

Iterative Johnson-style search with path blocking, decomposed over
strongly connected components.  Vertices are processed in a fixed order so
the output sequence is deterministic; every cycle is reported starting at
its smallest vertex.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping, Sequence

from .errors import CapExceeded


def _tarjan_scc(adj: Sequence[Sequence[int]], vertices: Iterable[int]) -> list[list[int]]:
    """Strongly connected components, iteratively, in deterministic order."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    vset = set(vertices)

    for root in sorted(vset):
        if root in index:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            advanced = False
            nbrs = adj[v]
            for k in range(pi, len(nbrs)):
                w = nbrs[k]
                if w not in vset:
                    continue
                if w not in index:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp: list[int] = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(sorted(comp))
    return sccs


def simple_cycles_indices(
    adj: Sequence[Sequence[int]], cap: int = 1_000_000
) -> list[list[int]]:
    """All simple directed cycles of an index-based adjacency, capped."""
    n = len(adj)
    sorted_adj: list[list[int]] = [sorted(set(t for t in targets if t >= 0)) for targets in adj]
    cycles: list[list[int]] = []

    components = [c for c in _tarjan_scc(sorted_adj, range(n)) if len(c) >= 2]
    removed: set[int] = set()
    # Order the work queue by smallest member so the output is stable.
    components.sort(key=lambda c: c[0])
    while components:
        comp = components.pop(0)
        comp_set = set(comp) - removed
        if len(comp_set) < 2:
            continue
        start = min(comp_set)
        local = {v: [w for w in sorted_adj[v] if w in comp_set] for v in comp_set}

        # Johnson search for all cycles through `start` within this SCC.
        blocked: set[int] = {start}
        block_map: dict[int, set[int]] = defaultdict(set)
        path: list[int] = [start]
        stack: list[Iterable[int]] = [iter(local[start])]
        closed: list[bool] = [False]
        while stack:
            advanced = False
            for w in stack[-1]:
                if w == start:
                    cycles.append(path.copy())
                    if len(cycles) > cap:
                        raise CapExceeded(f"more than {cap} simple cycles")
                    closed[-1] = True
                elif w not in blocked:
                    path.append(w)
                    closed.append(False)
                    blocked.add(w)
                    stack.append(iter(local[w]))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            v = path.pop()
            if closed.pop():
                if closed:
                    closed[-1] = True
                unblock = [v]
                while unblock:
                    u = unblock.pop()
                    if u in blocked:
                        blocked.discard(u)
                        unblock.extend(block_map[u])
                        block_map[u].clear()
            else:
                for w in local[v]:
                    block_map[w].add(v)

        removed.add(start)
        rest = comp_set - {start}
        if len(rest) >= 2:
            sub = _tarjan_scc(sorted_adj, rest)
            components.extend(c for c in sub if len(c) >= 2)
            components.sort(key=lambda c: c[0])
    return cycles


def enumerate_simple_cycles(
    graph: Mapping[str, Iterable[str]], cap: int = 1_000_000
) -> list[tuple[str, ...]]:
    """All simple cycles of a token adjacency, as node tuples.

    Raises :class:`CapExceeded` once more than ``cap`` cycles exist.
    """
    names = sorted(graph)
    pos = {v: i for i, v in enumerate(names)}
    extra = sorted(
        {w for targets in graph.values() for w in targets if w is not None and w not in pos}
    )
    for w in extra:
        pos[w] = len(names)
        names.append(w)
    adj: list[list[int]] = [[] for _ in names]
    for v, targets in graph.items():
        adj[pos[v]] = [pos[w] for w in targets if w is not None]
    return [tuple(names[i] for i in cyc) for cyc in simple_cycles_indices(adj, cap)]
