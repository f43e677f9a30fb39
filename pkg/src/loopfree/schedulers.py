"""Per-round maximization solvers and the full-schedule driver.

Solvers come in four flavors: exhaustive search (branch-and-bound with
monotone pruning, plus an exact cycle-hitting route for large strong-mode
forest states), the polynomial two-leaf optima, the direction-majority
1/2-approximation, and the cycle-enumeration / hitting-set pipeline for a
small number of leaves.  Every solver re-verifies its own output against
the mode's safety check before returning; the driver checks again before
committing a round.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .cycles import simple_cycles_indices
from .errors import (
    CapExceeded,
    NoSafeNode,
    NotAForest,
    NotInitialState,
    TooManyLeaves,
    UnsafeRound,
)
from .hitting import (
    EXACT_UNIVERSE_CAP,
    HittingSetInstance,
    _min_hitting_set,
    solve_hitting_set,
)
from .model import (
    EdgeClass,
    RoundState,
    UpdateInstance,
    UpdateSchedule,
    active_walk,
    apply_round,
    branch_tags,
    classify_pending,
    is_forest,
    leaf_count,
)
from .safety import RLF, SLF, mode_safe, rlf_safe, slf_safe

SOLVERS = ("exact", "two-leaf", "majority", "hitting-set", "auto")


@dataclass(frozen=True)
class SolverLimits:
    """Resource caps shared by the solvers; all positive."""

    exact_node_cap: int = 24
    cycle_cap: int = 1_000_000
    time_budget: float | None = None  # seconds per round, None = unbounded

    def __post_init__(self):
        if self.exact_node_cap <= 0 or self.cycle_cap <= 0:
            raise ValueError("limits must be positive")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("limits must be positive")


DEFAULT_LIMITS = SolverLimits()


@dataclass(frozen=True)
class ExactResult:
    """Output of the exhaustive solver.

    ``optimal`` is False only when a time budget expired and the best set
    found so far is returned instead of a certified maximum.
    """

    nodes: frozenset[str]
    optimal: bool = True

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def __contains__(self, item) -> bool:
        return item in self.nodes


def first_round(state: RoundState) -> frozenset[str]:
    """Maximum round-1 set: exactly the forward-classified pending nodes.

    In the initial two-path configuration every forward edge is jointly
    safe and no backward edge can be applied alone, for both modes, so
    this is optimal without any search.
    """
    if state.round_index != 1 or state.updated:
        raise NotInitialState("first_round requires the untouched round-1 state")
    return frozenset(
        v for v, c in classify_pending(state).items() if c is EdgeClass.FORWARD
    )


# ---------------------------------------------------------------------------
# exhaustive search


def _bnb_max(state: RoundState, mode: str, limits: SolverLimits) -> ExactResult:
    """Depth-first include/exclude search over the pending nodes.

    Includes are tried first in position order, so the first maximum found
    is the lexicographically smallest one; supersets of unsafe sets are
    never explored (safety is monotone under subsets).
    """
    inst = state.instance
    pending = sorted(state.pending, key=inst.position)
    n = len(pending)
    best: list[str] = []
    deadline = (
        None if limits.time_budget is None else time.monotonic() + limits.time_budget
    )
    timed_out = False

    def rec(i: int, chosen: list[str]) -> None:
        nonlocal best, timed_out
        if timed_out:
            return
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            return
        if len(chosen) + (n - i) <= len(best):
            return
        if i == n:
            best = chosen.copy()
            return
        v = pending[i]
        chosen.append(v)
        if mode_safe(state, chosen, mode).safe:
            rec(i + 1, chosen)
        chosen.pop()
        rec(i + 1, chosen)

    rec(0, [])
    return ExactResult(frozenset(best), optimal=not timed_out)


def masp_cycle_analysis(
    state: RoundState, limits: SolverLimits | None = None
) -> tuple[list[str], list[tuple[frozenset[str], tuple[str, ...]]]]:
    """Solo-unsafe pending nodes plus the cycle constraints of the rest.

    A candidate set S is strong-safe iff its complement hits, for every
    simple cycle of the union graph over all candidates, the set of nodes
    whose new edge the cycle uses.  Nodes unsafe even alone are split off
    first (their new edges leave the graph), which keeps the enumeration to
    cycles that can actually be traded off.  Returns the unit nodes and a
    list of (new-edge node set, cycle node sequence) pairs.
    """
    limits = limits or DEFAULT_LIMITS
    inst = state.instance
    pending = sorted(state.pending, key=inst.position)
    units = [v for v in pending if not slf_safe(state, (v,)).safe]
    unit_set = frozenset(units)

    n = len(inst.nodes)
    active = state.active_indices()
    adj: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        if active[i] >= 0:
            adj[i].append(active[i])
    rest_by_pos: dict[int, str] = {}
    for v in pending:
        if v in unit_set:
            continue
        i = inst.position(v)
        adj[i].append(inst._nxt2[i])
        rest_by_pos[i] = v

    constraints: list[tuple[frozenset[str], tuple[str, ...]]] = []
    for cyc in simple_cycles_indices(adj, limits.cycle_cap):
        m = len(cyc)
        p2 = [
            rest_by_pos[i]
            for k, i in enumerate(cyc)
            if i in rest_by_pos and cyc[(k + 1) % m] == inst._nxt2[i] != active[i]
        ]
        if not p2:
            raise UnsafeRound("active-only cycle in a supposedly forest state")
        constraints.append((frozenset(p2), tuple(inst.nodes[i] for i in cyc)))
    return units, constraints


def _exact_masp(state: RoundState, limits: SolverLimits) -> ExactResult:
    """Exact strong-mode maximum via cycle enumeration and hitting sets.

    Dropping a minimum hitting set of the cycle constraints (on top of the
    solo-unsafe nodes) is exactly optimal.  The hitting-set branching is
    deterministic but, unlike the small-state search, the result is not
    certified to be the lexicographically smallest maximum.
    """
    units, constraints = masp_cycle_analysis(state, limits)
    fam = sorted({p2 for p2, _ in constraints}, key=sorted)
    drop = frozenset(_min_hitting_set(fam, frozenset(), None) or ())
    out = state.pending - frozenset(units) - drop
    if not slf_safe(state, out).safe:
        raise UnsafeRound("cycle-hitting optimum failed re-verification")
    return ExactResult(out)


def exact_max_round(
    state: RoundState, mode: str, limits: SolverLimits | None = None
) -> ExactResult:
    """Maximum-cardinality safe subset of the pending nodes.

    Branch-and-bound under ``exact_node_cap``; above the cap, strong-mode
    forest states fall back to the exact cycle-hitting route.  Ties are
    broken toward the lexicographically smallest position set (certified
    on the branch-and-bound path; the cycle route is deterministic).
    """
    limits = limits or DEFAULT_LIMITS
    if not state.pending:
        return ExactResult(frozenset())
    if len(state.pending) <= limits.exact_node_cap:
        return _bnb_max(state, mode, limits)
    if mode == SLF and is_forest(state):
        return _exact_masp(state, limits)
    raise CapExceeded(
        f"{len(state.pending)} pending nodes exceed the exact cap "
        f"{limits.exact_node_cap} and no cycle route applies for mode {mode!r}"
    )


# ---------------------------------------------------------------------------
# two-leaf optima


class _TreeView:
    """Active forest plus pending edges, possibly with virtual nodes.

    The relaxed-mode reduction inserts virtual nodes into the source path,
    so the two-leaf machinery works on this view instead of a RoundState.
    """

    def __init__(
        self,
        order: list[str],
        active: dict[str, str | None],
        pending: dict[str, str],
    ):
        self.order = order
        self.pos = {v: i for i, v in enumerate(order)}
        self.active = active
        self.pending = pending
        self._walks: dict[str, frozenset[str]] = {}

    def walk_set(self, v: str) -> frozenset[str]:
        cached = self._walks.get(v)
        if cached is not None:
            return cached
        seen: set[str] = set()
        cur: str | None = v
        while cur is not None and cur not in seen:
            seen.add(cur)
            cur = self.active.get(cur)
        result = frozenset(seen)
        self._walks[v] = result
        return result

    def branch_tags(self) -> dict[str, int]:
        indeg = {v: 0 for v in self.order}
        for v in self.order:
            w = self.active.get(v)
            if w is not None:
                indeg[w] += 1
        tags: dict[str, int] = {}
        for leaf in self.order:
            if indeg[leaf] != 0:
                continue
            tag = self.pos[leaf]
            cur: str | None = leaf
            while cur is not None:
                if cur in tags and tags[cur] <= tag:
                    break
                tags[cur] = min(tags.get(cur, tag), tag)
                cur = self.active.get(cur)
        return tags


def _two_leaf_core(view: _TreeView) -> frozenset[str]:
    """Maximum strong-mode update set on a two-leaf view.

    Forward edges always go in, backward edges never do, and among the
    horizontal edges a minimum set to leave out is a minimum vertex cover
    of the crossing graph, obtained from a maximum bipartite matching.
    """
    order_pos = view.pos
    forwards: list[str] = []
    horizontals: list[tuple[str, str]] = []
    for v in sorted(view.pending, key=order_pos.__getitem__):
        w = view.pending[v]
        if w in view.walk_set(v):
            forwards.append(v)
        elif v in view.walk_set(w):
            continue  # backward: never updatable in strong mode
        else:
            horizontals.append((v, w))

    if not horizontals:
        return frozenset(forwards)

    tags = view.branch_tags()
    lefts: list[int] = []
    rights: list[int] = []
    for k, (v, w) in enumerate(horizontals):
        if tags[v] == tags[w]:
            raise TooManyLeaves("horizontal edge within a single branch")
        (lefts if tags[v] < tags[w] else rights).append(k)

    def crossing(e1: tuple[str, str], e2: tuple[str, str]) -> bool:
        a, b = e1
        c, e = e2
        return c in view.walk_set(b) and a in view.walk_set(e)

    conflict: dict[int, list[int]] = {k: [] for k in lefts}
    for k in lefts:
        for j in rights:
            if crossing(horizontals[k], horizontals[j]):
                conflict[k].append(j)

    # Maximum matching (augmenting paths), then a König vertex cover.
    match_right: dict[int, int] = {}
    match_left: dict[int, int] = {}

    def augment(l: int, visited: set[int]) -> bool:
        for r in conflict[l]:
            if r in visited:
                continue
            visited.add(r)
            if r not in match_right or augment(match_right[r], visited):
                match_right[r] = l
                match_left[l] = r
                return True
        return False

    for l in lefts:
        augment(l, set())

    z_left = {l for l in lefts if l not in match_left}
    z_right: set[int] = set()
    frontier = list(sorted(z_left))
    while frontier:
        nxt: list[int] = []
        for l in frontier:
            for r in conflict[l]:
                if r in z_right or match_left.get(l) == r:
                    continue
                z_right.add(r)
                owner = match_right.get(r)
                if owner is not None and owner not in z_left:
                    z_left.add(owner)
                    nxt.append(owner)
        frontier = nxt

    cover = {k for k in lefts if k not in z_left} | (z_right & set(rights))
    chosen = [horizontals[k][0] for k in range(len(horizontals)) if k not in cover]
    return frozenset(forwards) | frozenset(chosen)


def _view_from_state(state: RoundState) -> _TreeView:
    inst = state.instance
    order = list(inst.nodes)
    active = {v: state.active_out(v) for v in inst.nodes}
    pending = {v: inst.out2(v) for v in state.pending}  # type: ignore[misc]
    return _TreeView(order, active, pending)


def two_leaf_slf(state: RoundState) -> frozenset[str]:
    """Exact strong-mode maximum on states whose active forest has <= 2 leaves."""
    if leaf_count(state) > 2:
        raise TooManyLeaves("strong two-leaf solver needs at most two leaves")
    out = _two_leaf_core(_view_from_state(state))
    if not slf_safe(state, out).safe:
        raise UnsafeRound("two-leaf strong output failed re-verification")
    return out


def two_leaf_rlf(state: RoundState) -> frozenset[str]:
    """Exact relaxed-mode maximum on two-leaf tree states.

    Backward edges whose induced loop meets the source walk can never be
    applied and are dropped.  Every other backward edge is simulated by a
    horizontal edge onto a fresh virtual node; the virtual nodes form a
    chain feeding *into* the source, so a walk from a virtual node
    continues along the source walk and loops of the auxiliary graph
    correspond one-to-one to loops reachable from the source.  The strong
    two-leaf algorithm then decides; chosen virtual edges map back to
    their backward originals.
    """
    if not is_forest(state):
        raise NotAForest("relaxed two-leaf solver needs a tree-shaped state")
    if leaf_count(state) > 2:
        raise TooManyLeaves("relaxed two-leaf solver needs at most two leaves")
    inst = state.instance
    walk_s = frozenset(active_walk(state, inst.s).nodes)

    pending: dict[str, str] = {}
    virtual: list[str] = []
    for v, cls in classify_pending(state).items():
        w = inst.out2(v)
        assert w is not None
        if cls is not EdgeClass.BACKWARD:
            pending[v] = w
            continue
        seg: set[str] = set()
        cur: str | None = w
        while cur is not None and cur != v and cur not in seg:
            seg.add(cur)
            cur = state.active_out(cur)
        seg.add(v)
        if seg & walk_s:
            continue  # the loop would sit on the source walk: frozen
        virtual.append(v)

    # The chain sits first in the order so the whole source branch shares
    # one branch tag, keeping the crossing graph bipartite.
    names = [f"virtual.{i}" for i in range(len(virtual))]
    order = names + list(inst.nodes)
    active: dict[str, str | None] = {v: state.active_out(v) for v in inst.nodes}
    chain: str = inst.s
    for name in reversed(names):
        active[name] = chain
        chain = name
    for v, name in zip(virtual, names):
        pending[v] = name

    out = _two_leaf_core(_TreeView(order, active, pending))
    if not rlf_safe(state, out).safe:
        raise UnsafeRound("two-leaf relaxed output failed re-verification")
    return out


# ---------------------------------------------------------------------------
# approximations


def _majority_split(state: RoundState, hs: list[str]) -> list[str]:
    """The larger direction class of the horizontal edges.

    Direction compares the branch tags of an edge's endpoints.  Ties pick
    the class containing the earliest tail.  On non-forest states there is
    no branch geometry; the caller's safety guard does all the work then.
    """
    if not hs or not is_forest(state):
        return hs
    inst = state.instance
    tags = branch_tags(state)
    low_hi = [v for v in hs if tags[v] <= tags[inst.out2(v)]]
    hi_low = [v for v in hs if tags[v] > tags[inst.out2(v)]]
    if len(low_hi) != len(hi_low):
        return low_hi if len(low_hi) > len(hi_low) else hi_low
    if not low_hi:
        return []
    first = min(inst.position(low_hi[0]), inst.position(hi_low[0]))
    return low_hi if inst.position(low_hi[0]) == first else hi_low


def majority_approx(state: RoundState, mode: str) -> frozenset[str]:
    """Forward nodes plus the majority direction class, safety-guarded.

    Every addition is re-checked and dropped if it fails the mode's check,
    so the output is unconditionally safe; on two-leaf states the guard
    never fires and at least half of the horizontal edges survive.
    """
    inst = state.instance
    if not state.pending:
        return frozenset()
    chosen: list[str] = []

    def guarded(vs: list[str]) -> None:
        for v in vs:
            chosen.append(v)
            if not mode_safe(state, chosen, mode).safe:
                chosen.pop()

    cls = classify_pending(state)
    order = sorted(state.pending, key=inst.position)
    if mode == RLF:
        walk = frozenset(active_walk(state, inst.s).nodes)
        off = [v for v in order if v not in walk and inst.out2(v) not in walk]
        guarded(off)
        offset = frozenset(off)
    else:
        offset = frozenset()
    forwards = [v for v in order if v not in offset and cls[v] is EdgeClass.FORWARD]
    hs = [v for v in order if v not in offset and cls[v] is EdgeClass.HORIZONTAL]
    guarded(forwards)
    guarded(_majority_split(state, hs))
    return frozenset(chosen)


def cycle_hitting_approx(
    state: RoundState, mode: str, limits: SolverLimits | None = None
) -> frozenset[str]:
    """Cycle-enumeration / hitting-set pipeline for few-leaf forest states.

    Enumerates the simple cycles of the union graph over all forward and
    horizontal candidates, hits each cycle's horizontal-edge set (exactly
    while the universe is small, greedily beyond that), and keeps the
    rest.  In relaxed mode, nodes that can never be reached from the
    source go in unconditionally and only source-reachable cycles
    constrain the rest.
    """
    limits = limits or DEFAULT_LIMITS
    inst = state.instance
    if not state.pending:
        return frozenset()
    if not is_forest(state):
        raise NotAForest("cycle-hitting pipeline needs a forest-shaped state")
    cls = classify_pending(state)
    order = sorted(state.pending, key=inst.position)

    free: list[str] = []
    reach_mask: list[bool] | None = None
    if mode == RLF:
        adj_all = _candidate_adjacency(state, state.pending)
        reach_mask = _reachable(adj_all, inst.position(inst.s))
        free = [v for v in order if not reach_mask[inst.position(v)]]
    free_set = frozenset(free)
    cand_f = [v for v in order if v not in free_set and cls[v] is EdgeClass.FORWARD]
    cand_h = [v for v in order if v not in free_set and cls[v] is EdgeClass.HORIZONTAL]

    candidates = free_set | frozenset(cand_f) | frozenset(cand_h)
    adj = _candidate_adjacency(state, candidates)
    active = state.active_indices()
    h_by_pos = {inst.position(v): v for v in cand_h}
    sets: list[frozenset[str]] = []
    for cyc in simple_cycles_indices(adj, limits.cycle_cap):
        if reach_mask is not None and not any(reach_mask[i] for i in cyc):
            continue
        m = len(cyc)
        hset = []
        for k, i in enumerate(cyc):
            if i in h_by_pos and cyc[(k + 1) % m] == inst._nxt2[i] != active[i]:
                hset.append(h_by_pos[i])
        if not hset:
            raise UnsafeRound("constraining cycle without a horizontal candidate")
        sets.append(frozenset(hset))

    drop: frozenset[str] = frozenset()
    if sets:
        hs_instance = HittingSetInstance(tuple(cand_h), tuple(set(sets)))
        hs_mode = "exact" if len(cand_h) <= EXACT_UNIVERSE_CAP else "greedy"
        drop = frozenset(solve_hitting_set(hs_instance, hs_mode))

    out = free_set | frozenset(cand_f) | (frozenset(cand_h) - drop)
    if not mode_safe(state, out, mode).safe:
        raise UnsafeRound("cycle-hitting output failed re-verification")
    return out


def _candidate_adjacency(state: RoundState, candidates: frozenset[str]) -> list[list[int]]:
    inst = state.instance
    active = state.active_indices()
    adj: list[list[int]] = [[] for _ in inst.nodes]
    for i in range(len(inst.nodes)):
        if active[i] >= 0:
            adj[i].append(active[i])
    for v in candidates:
        i = inst.position(v)
        adj[i].append(inst._nxt2[i])
    return adj


def _reachable(adj: list[list[int]], src: int) -> list[bool]:
    seen = [False] * len(adj)
    seen[src] = True
    stack = [src]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w >= 0 and not seen[w]:
                seen[w] = True
                stack.append(w)
    return seen


# ---------------------------------------------------------------------------
# driver


def fallback_single(state: RoundState, mode: str) -> str:
    """The pending node latest in new-policy order; always safe to apply.

    All of its new-policy successors are already updated, so the walk from
    its new target follows the new policy straight to the destination.
    """
    if not state.pending:
        raise ValueError("fallback_single needs a nonempty pending set")
    v = max(state.pending, key=state.instance.position_pi2)
    if not mode_safe(state, (v,), mode).safe:
        raise NoSafeNode(f"latest pending node {v!r} is unsafe; state invariant broken")
    return v


def _dispatch(state: RoundState, mode: str, solver: str, limits: SolverLimits) -> frozenset[str]:
    if solver == "exact":
        return exact_max_round(state, mode, limits).nodes
    if solver == "two-leaf":
        return two_leaf_slf(state) if mode == SLF else two_leaf_rlf(state)
    if solver == "majority":
        return majority_approx(state, mode)
    if solver == "hitting-set":
        return cycle_hitting_approx(state, mode, limits)
    if solver == "auto":
        if len(state.pending) <= limits.exact_node_cap:
            return exact_max_round(state, mode, limits).nodes
        if is_forest(state) and leaf_count(state) <= 2:
            return two_leaf_slf(state) if mode == SLF else two_leaf_rlf(state)
        try:
            return cycle_hitting_approx(state, mode, limits)
        except (CapExceeded, NotAForest):
            return majority_approx(state, mode)
    raise ValueError(f"unknown solver {solver!r}")


def full_schedule(
    instance: UpdateInstance,
    mode: str,
    solver: str = "auto",
    limits: SolverLimits | None = None,
) -> UpdateSchedule:
    """Compute a complete update schedule for the instance.

    Round 1 is always the forward class; later rounds come from the
    selected solver, with a guaranteed-safe single-node fallback whenever
    a solver returns nothing.  Every round is re-verified before being
    committed, so a buggy solver trips :class:`UnsafeRound` rather than
    emitting an unsafe schedule.
    """
    if mode not in (SLF, RLF):
        raise ValueError(f"unknown mode {mode!r}")
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    limits = limits or DEFAULT_LIMITS
    state = instance.initial_state()
    rounds: list[frozenset[str]] = []
    if state.pending:
        r1 = first_round(state)
        if not r1:
            r1 = frozenset((fallback_single(state, mode),))
        _commit_check(state, r1, mode)
        rounds.append(r1)
        state = apply_round(state, r1)
    while state.pending:
        chosen = _dispatch(state, mode, solver, limits)
        if not chosen:
            chosen = frozenset((fallback_single(state, mode),))
        _commit_check(state, chosen, mode)
        rounds.append(chosen)
        state = apply_round(state, chosen)
    return UpdateSchedule(mode=mode, rounds=tuple(rounds))


def _commit_check(state: RoundState, chosen: frozenset[str], mode: str) -> None:
    verdict = mode_safe(state, chosen, mode)
    if not verdict.safe:
        raise UnsafeRound(
            f"round {state.round_index} candidate {sorted(chosen)} is unsafe: "
            f"cycle {verdict.witness_cycle} with X={sorted(verdict.witness_x or ())}"
        )
