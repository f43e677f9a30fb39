"""Hardness gadget: update instances whose round-2 optimum encodes hitting sets.

:func:`generate_gadget` turns a hitting-set instance into a two-policy
update instance.  After the greedy first round (all forward edges), the
active forest splits into one *out* and one *in* branch per element, plus
a source branch in relaxed mode.  The pending edges then realize:

* set edges (SE): for consecutive element pairs of each set, a bundle of
  m+1 parallel edges from the out branch of the earlier element to the in
  branch of the later one; wrap-around pairs route through relay nodes in
  the *temp* segment, which turns a left-to-right edge into one that stays
  pending until round 2;
* anti-selector edges (AE): one edge per element from near the top of its
  in branch to the bottom of its out branch — leaving it out of the update
  puts the element into the hitting set;
* relaxed edges (WE): m(m+1) edges from the source branch to the low part
  of every in branch (relaxed mode only), making every branch
  source-reachable so the relaxed optimum behaves like the strong one;
* zigzag returns and connectors: never-updatable backward edges and
  always-updatable helpers that keep the new policy one simple path.

Updating every AE of a set closes a loop through the set's SE bundles and
any loop needs one edge per bundle of a full chain; a bundle holds m+1
parallel edges while there are only m AEs in total, so a maximum round-2
update always keeps the bundles intact and excludes exactly a minimum
hitting set worth of AEs.  :func:`verify_correspondence` checks the shape
and that correspondence against the exhaustive round-2 optimum and a
brute-forced minimum hitting set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import CorrespondenceViolation
from .hitting import HittingSetInstance, _min_hitting_set, solve_hitting_set
from .model import (
    EdgeClass,
    UpdateInstance,
    apply_round,
    classify_pending,
    make_instance,
)
from .safety import RLF, SLF, rlf_safe, slf_safe
from .schedulers import (
    DEFAULT_LIMITS,
    SolverLimits,
    exact_max_round,
    first_round,
    masp_cycle_analysis,
)

SE = "se"
AE = "ae"
WE = "we"
CONNECTOR = "connector"  # updatable path completion
HELPER = "helper"  # delayer leg into the temp segment
RETURN = "return"  # never-updatable backward structure
BRANCHING = "branching"  # forward edge, applied in round 1
TRIVIAL = "trivial"  # old rule kept (non-interesting node)

PENDING_CATEGORIES = (SE, AE, WE, CONNECTOR, HELPER, RETURN)


@dataclass(frozen=True)
class GadgetEdge:
    category: str
    tail: str
    head: str
    element: object | None = None  # AE/WE/SE: owning element (SE: pair source)
    set_index: int | None = None
    pair: tuple | None = None  # SE: (elem_from, elem_to)


@dataclass(frozen=True)
class GadgetLayout:
    """Registry of segments and categorized edges for a generated gadget."""

    mode: str
    elements: tuple
    segments: tuple[tuple[str, int, int], ...]  # (name, first, last) positions
    edges: tuple[GadgetEdge, ...]

    def by_category(self, category: str) -> tuple[GadgetEdge, ...]:
        return tuple(e for e in self.edges if e.category == category)

    def segment_range(self, name: str) -> tuple[int, int]:
        for seg, lo, hi in self.segments:
            if seg == name:
                return lo, hi
        raise KeyError(name)

    def segment_of(self, position: int) -> str | None:
        for seg, lo, hi in self.segments:
            if lo <= position <= hi:
                return seg
        return None


class _Weaver:
    """Accumulates the new-policy path while tagging every edge."""

    def __init__(self):
        self.temp: list[str] = []
        self.pi2: list[str] = ["s"]
        self.edges: list[GadgetEdge] = []

    @property
    def cursor(self) -> str:
        return self.pi2[-1]

    def link(self, head: str, category: str, **meta) -> None:
        self.edges.append(GadgetEdge(category=category, tail=self.cursor, head=head, **meta))
        self.pi2.append(head)

    def via_stub(self, target: str, leg_category: str, **meta) -> None:
        """Backward leg into a fresh temp relay, which forwards to ``target``.

        The relay is applied in round 1, so the pending leg effectively
        points at ``target`` from round 2 on.
        """
        relay = f"t{len(self.temp)}"
        self.temp.append(relay)
        self.link(relay, leg_category, **meta)
        self.link(target, BRANCHING)


def _pairs(hs: HittingSetInstance) -> list[tuple[int, int, int]]:
    """Deduplicated consecutive pairs (rank_from, rank_to, first set index).

    Ranks are 1-based positions in the element order; each sorted set
    contributes its neighbour pairs plus the wrap-around pair, a singleton
    its self-pair.  Equivalent pairs from different sets are kept once.
    """
    rank = {e: i + 1 for i, e in enumerate(hs.elements)}
    seen: dict[tuple[int, int], int] = {}
    for si, group in enumerate(hs.sets):
        ranks = sorted(rank[e] for e in group)
        chain = list(zip(ranks, ranks[1:]))
        chain.append((ranks[-1], ranks[0]))
        for a, b in chain:
            if (a, b) not in seen:
                seen[(a, b)] = si
    return sorted((a, b, si) for (a, b), si in seen.items())


def generate_gadget(
    hs: HittingSetInstance, mode: str
) -> tuple[UpdateInstance, GadgetLayout]:
    """Emit the two-policy instance and its layout registry for ``hs``."""
    if mode not in (SLF, RLF):
        raise ValueError(f"unknown mode {mode!r}")
    m = hs.m
    if m < 1:
        raise ValueError("gadget needs at least one element")
    if any(not s for s in hs.sets):
        raise ValueError("gadget needs nonempty sets")

    pairs = _pairs(hs)
    out_bundles: dict[int, list[tuple[int, int, int]]] = {r: [] for r in range(1, m + 1)}
    in_bundles: dict[int, list[tuple[int, int, int]]] = {r: [] for r in range(1, m + 1)}
    for a, b, si in pairs:
        out_bundles[a].append((a, b, si))
        in_bundles[b].append((a, b, si))

    width = m + 1  # edges per SE bundle
    # Cutting a branch's WEs must never pay: it could save at most the
    # branch's zigzag returns (<= m bundles of m+1 edges), its top spacer
    # and its anti-selector edge, so strictly exceed m(m+1) + 2.
    wes_per_branch = m * (m + 1) + 3
    element = {r: hs.elements[r - 1] for r in range(1, m + 1)}

    tails = {(a, b): [f"o{a}.t{b}.{j}" for j in range(width)] for a, b, _ in pairs}
    heads = {(a, b): [f"i{b}.h{a}.{j}" for j in range(width)] for a, b, _ in pairs}
    vrets = {(a, b): [f"i{b}.v{a}.{j}" for j in range(width)] for a, b, _ in pairs}
    wheads = {r: [f"i{r}.w{j}" for j in range(wes_per_branch)] for r in range(1, m + 1)}
    a_node = {r: f"o{r}.A" for r in range(1, m + 1)}
    xp_node = {r: f"i{r}.ax" for r in range(1, m + 1)}
    x_node = {r: f"i{r}.top" for r in range(1, m + 1)}
    relax = [f"r{j}" for j in range(m * wes_per_branch)] if mode == RLF else []

    w = _Weaver()

    # Entry: merge the source into a branch bottom (strong mode) or lay the
    # relaxed branch with its WE bundles (relaxed mode), then reach the top
    # of the first in branch to start the element chain.
    if mode == SLF:
        w.link("o1.E", BRANCHING)
        w.via_stub(x_node[1], CONNECTOR)
    else:
        w.link(relax[0], BRANCHING)
        idx = 1
        for r in range(1, m + 1):
            for j in range(wes_per_branch):
                w.link(wheads[r][j], WE, element=element[r])
                if idx < len(relax):
                    w.via_stub(relax[idx], HELPER)
                    idx += 1
                else:
                    w.via_stub("rtop", HELPER)
        w.link(x_node[1], CONNECTOR)

    # Element chain: for each rank, the short-back at the in-branch top, the
    # AE into the out-branch bottom, then that out branch's SE bundles.
    for r in range(1, m + 1):
        if w.cursor != x_node[r]:
            raise AssertionError("weave lost its position at an in-branch top")
        w.link(xp_node[r], RETURN)
        w.link(a_node[r], AE, element=element[r])
        bundles = out_bundles[r]
        after = x_node[r + 1] if r < m else "b0"
        if not bundles:
            if r < m:
                w.link(after, CONNECTOR)
            else:
                w.via_stub(after, CONNECTOR)
            continue
        w.link(tails[bundles[0][:2]][0], TRIVIAL)
        for bi, (a, b, si) in enumerate(bundles):
            for j in range(width):
                t, h, v = tails[(a, b)][j], heads[(a, b)][j], vrets[(a, b)][j]
                if w.cursor != t:
                    raise AssertionError("weave lost its position at a bundle tail")
                meta = dict(element=element[a], set_index=si, pair=(element[a], element[b]))
                if a < b:
                    w.link(h, SE, **meta)
                else:  # wrap-around pair: delay the left-to-right edge
                    w.via_stub(h, SE, **meta)
                w.link(v, RETURN)
                if j + 1 < width:
                    w.via_stub(tails[(a, b)][j + 1], HELPER)
                elif bi + 1 < len(bundles):
                    w.via_stub(tails[bundles[bi + 1][:2]][0], HELPER)
                else:
                    w.via_stub(after, HELPER)

    # Boundary chain to the destination.
    boundary_count = 2 * m + (1 if mode == RLF else 0)
    if w.cursor != "b0":
        raise AssertionError("weave did not end at the first boundary node")
    for k in range(1, boundary_count):
        w.link(f"b{k}", BRANCHING)
    w.link("d", BRANCHING)

    # Old policy: the line, segment by segment, boundaries in between.
    pi1: list[str] = ["s"] + list(w.temp)
    segments: list[tuple[str, int, int]] = []
    if w.temp:
        segments.append(("temp", 1, len(w.temp)))

    def add_segment(name: str, nodes: list[str]) -> None:
        start = len(pi1)
        pi1.extend(nodes)
        segments.append((name, start, len(pi1) - 1))

    boundary = iter(range(boundary_count))
    for r in range(m, 0, -1):
        out_nodes: list[str] = []
        if r == 1 and mode == SLF:
            out_nodes.append("o1.E")
        out_nodes.append(a_node[r])
        for a, b, _ in out_bundles[r]:
            out_nodes.extend(tails[(a, b)])
        add_segment(f"out{r}", out_nodes)
        pi1.append(f"b{next(boundary)}")
        in_nodes: list[str] = []
        for a, b, _ in in_bundles[r]:
            in_nodes.extend(vrets[(a, b)])
        if mode == RLF:
            in_nodes.extend(wheads[r])
        for a, b, _ in in_bundles[r]:
            in_nodes.extend(heads[(a, b)])
        in_nodes.extend([xp_node[r], x_node[r]])
        add_segment(f"in{r}", in_nodes)
        pi1.append(f"b{next(boundary)}")
    if mode == RLF:
        add_segment("relaxed", relax + ["rtop"])
        pi1.append(f"b{next(boundary)}")
    pi1.append("d")

    instance = make_instance(pi1, w.pi2)
    layout = GadgetLayout(
        mode=mode,
        elements=tuple(hs.elements),
        segments=tuple(segments),
        edges=tuple(w.edges),
    )
    return instance, layout


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class CorrespondenceReport:
    mode: str
    pending_count: int
    optimum_size: int
    excluded_elements: tuple
    min_hitting_set_size: int
    cycles_seen: int


def _expected_forward(layout: GadgetLayout, instance: UpdateInstance) -> frozenset[str]:
    interesting = instance.interesting
    return frozenset(
        e.tail for e in layout.by_category(BRANCHING) if e.tail in interesting
    )


def _fail(message: str, details: Iterable[str] = ()) -> CorrespondenceViolation:
    body = message
    extra = "; ".join(details)
    if extra:
        body = f"{message} ({extra})"
    return CorrespondenceViolation(body)


def verify_correspondence(
    hs: HittingSetInstance,
    instance: UpdateInstance,
    layout: GadgetLayout,
    limits: SolverLimits | None = None,
) -> CorrespondenceReport:
    """Check shape and hitting-set correspondence of a generated gadget.

    Asserts that the first greedy round is exactly the intended forward
    class, that round 2 exposes the registered branch structure, and that
    the exhaustive round-2 optimum keeps every SE/WE/connector/helper edge,
    rejects every structural return edge, and excludes a set of AEs that is
    a hitting set of exactly the brute-forced minimum size.  Raises
    :class:`CorrespondenceViolation` on the first discrepancy.
    """
    limits = limits or DEFAULT_LIMITS
    mode = layout.mode
    state0 = instance.initial_state()

    r1 = first_round(state0)
    expect = _expected_forward(layout, instance)
    if r1 != expect:
        raise _fail(
            "round-1 forward class mismatch",
            [f"missing {sorted(expect - r1)}", f"extra {sorted(r1 - expect)}"],
        )
    state = apply_round(state0, r1)

    _check_shape(instance, layout, state)

    by_tail = {e.tail: e for e in layout.edges if e.category in PENDING_CATEGORIES}
    if frozenset(by_tail) != state.pending:
        raise _fail(
            "pending set does not match the registry",
            [f"diff {sorted(frozenset(by_tail) ^ state.pending)}"],
        )
    classes = classify_pending(state)
    for v, cls in classes.items():
        want = EdgeClass.BACKWARD if by_tail[v].category == RETURN else EdgeClass.HORIZONTAL
        if cls is not want:
            raise _fail(f"edge of {v} classified {cls.value}, expected {want.value}")

    min_hs = solve_hitting_set(hs, "exact")
    if mode == SLF:
        optimum = frozenset(exact_max_round(state, SLF, limits).nodes)
        cycles_seen = -1
    else:
        optimum, cycles_seen = _relaxed_certified_optimum(state, layout, limits)

    ae_excluded = tuple(
        e.element for e in layout.by_category(AE) if e.tail not in optimum
    )
    details = []
    for cat in (SE, WE, CONNECTOR, HELPER):
        missing = [e.tail for e in layout.by_category(cat) if e.tail not in optimum]
        if missing:
            details.append(f"{cat} edges excluded: {missing[:5]}")
    kept_returns = [e.tail for e in layout.by_category(RETURN) if e.tail in optimum]
    if kept_returns:
        details.append(f"return edges kept: {kept_returns[:5]}")
    if details:
        raise _fail("optimum has the wrong structure", details)
    if len(ae_excluded) != len(min_hs):
        raise _fail(
            f"excluded AEs ({sorted(map(str, ae_excluded))}) do not match the "
            f"minimum hitting set size {len(min_hs)}"
        )
    uncovered = [s for s in hs.sets if not (s & set(ae_excluded))]
    if uncovered:
        raise _fail(f"excluded AEs miss sets {uncovered}")

    return CorrespondenceReport(
        mode=mode,
        pending_count=len(state.pending),
        optimum_size=len(optimum),
        excluded_elements=ae_excluded,
        min_hitting_set_size=len(min_hs),
        cycles_seen=cycles_seen,
    )


def _check_shape(instance: UpdateInstance, layout: GadgetLayout, state) -> None:
    """Branches must be intact line chains; leaves must be the known bottoms."""
    pos = instance.position
    temp_nodes: frozenset[str] = frozenset()
    if layout.segments and layout.segments[0][0] == "temp":
        lo, hi = layout.segment_range("temp")
        temp_nodes = frozenset(instance.nodes[lo : hi + 1])

    for name, lo, hi in layout.segments:
        if name == "temp":
            continue
        for i in range(lo, hi):
            v = instance.nodes[i]
            if state.active_out(v) != instance.nodes[i + 1]:
                raise _fail(f"segment {name} broken at {v}")

    indeg: dict[str, int] = {v: 0 for v in instance.nodes}
    for v in instance.nodes:
        w = state.active_out(v)
        if w is not None:
            indeg[w] += 1
    leaves = {v for v, dgr in indeg.items() if dgr == 0}
    branch_leaves = leaves - temp_nodes
    m = len(layout.elements)
    want = 2 * m + (1 if layout.mode == RLF else 0)
    if len(branch_leaves) != want:
        raise _fail(
            f"expected {want} branch leaves, found {len(branch_leaves)}",
            [f"leaves {sorted(branch_leaves, key=pos)[:8]}"],
        )
    if instance.s not in branch_leaves:
        raise _fail("source is not a branch leaf")


def _relaxed_certified_optimum(
    state, layout: GadgetLayout, limits: SolverLimits
) -> tuple[frozenset[str], int]:
    """Exhaustive relaxed round-2 optimum with a matching upper bound.

    The candidate keeps everything except the structural returns and a
    minimum hitting set of AEs (the strong-mode optimum); it is relaxed-safe
    by construction.  A valid upper bound comes from hitting the loop
    constraints: every surviving loop needs its new-edge set hit, or else
    every WE feeding a branch the loop visits must be dropped (each single
    WE gives a true source-to-loop path).  When the bound meets the
    candidate size the candidate is a certified maximum.
    """
    units, constraints = masp_cycle_analysis(state, limits)
    fam = sorted({p2 for p2, _ in constraints}, key=sorted)
    inst = state.instance
    drop = frozenset(_min_hitting_set(fam, frozenset(), None) or ())
    candidate = state.pending - frozenset(units) - drop
    verdict = rlf_safe(state, candidate)
    if not verdict.safe:
        raise _fail("relaxed candidate failed its safety check")

    we_by_segment: dict[str, list[str]] = {}
    for e in layout.by_category(WE):
        seg = layout.segment_of(inst.position(e.head))
        we_by_segment.setdefault(seg or "?", []).append(e.tail)

    groups: list[tuple[frozenset[str], frozenset[str]]] = []
    seen: set[tuple[frozenset[str], frozenset[str]]] = set()

    def add_group(p2: frozenset[str], cycle_nodes: Iterable[str]) -> None:
        segs = {layout.segment_of(inst.position(v)) for v in cycle_nodes}
        wes: set[str] = set()
        for seg in segs:
            if seg and seg.startswith("in"):
                wes.update(we_by_segment.get(seg, ()))
        key = (p2, frozenset(wes))
        if key not in seen:
            seen.add(key)
            groups.append((p2, frozenset(wes)))

    for p2, cycle in constraints:
        add_group(p2, cycle)
    for u in units:
        wit = slf_safe(state, (u,))
        if wit.safe or not wit.witness_cycle:
            raise _fail(f"unit node {u} lost its witness cycle")
        add_group(frozenset((u,)), wit.witness_cycle)

    bound = _bulk_min_hs_size(groups, order=inst.position)
    if len(state.pending) - bound != len(candidate):
        raise _fail(
            "relaxed optimum not certified",
            [f"candidate {len(candidate)}", f"bound {len(state.pending) - bound}"],
        )
    return candidate, len(constraints)


def _bulk_min_hs_size(
    groups: list[tuple[frozenset[str], frozenset[str]]], order
) -> int:
    """Minimum |D| with, per group, D hitting p2 or containing the whole bulk."""
    if not groups:
        return 0
    groups = sorted(set(groups), key=lambda g: (len(g[0]), sorted(map(order, g[0]))))
    best = [sum(len(p) for p, _ in groups) + sum(len(b) for _, b in groups) + 1]

    def satisfied(group: tuple[frozenset[str], frozenset[str]], chosen: set[str]) -> bool:
        p2, bulk = group
        return bool(p2 & chosen) or (bool(bulk) and bulk <= chosen)

    def lower_bound(chosen: set[str], budget: int) -> int:
        used: set[str] = set()
        count = 0
        for p2, bulk in groups:
            if satisfied((p2, bulk), chosen):
                continue
            options = p2 | (bulk if bulk and len(bulk - chosen) <= budget else frozenset())
            if not (options & used):
                count += 1
                used |= options
        return count

    def search(chosen: set[str]) -> None:
        if len(chosen) >= best[0]:
            return
        pending_groups = [g for g in groups if not satisfied(g, chosen)]
        if not pending_groups:
            best[0] = len(chosen)
            return
        if len(chosen) + lower_bound(chosen, best[0] - len(chosen) - 1) >= best[0]:
            return
        p2, bulk = pending_groups[0]
        for e in sorted(p2, key=order):
            chosen.add(e)
            search(chosen)
            chosen.discard(e)
        if bulk:
            extra = bulk - chosen
            if len(chosen) + len(extra) < best[0]:
                chosen |= extra
                search(chosen)
                chosen -= extra

    search(set())
    return best[0]


# ---------------------------------------------------------------------------
# layout sidecar


def render_layout(layout: GadgetLayout) -> str:
    """Line-based sidecar: segments plus the AE/SE/WE edge registry."""
    lines = [f"# gadget layout, mode {layout.mode}"]
    for name, lo, hi in layout.segments:
        lines.append(f"SEG {name} {lo} {hi}")
    for e in layout.edges:
        if e.category == AE:
            lines.append(f"AE {e.element} {e.tail} {e.head}")
        elif e.category == SE:
            lines.append(f"SE {e.set_index} {e.tail} {e.head}")
        elif e.category == WE:
            lines.append(f"WE {e.tail} {e.head}")
    return "\n".join(lines) + "\n"


def parse_layout_categories(text: str) -> dict[tuple[str, str], str]:
    """Edge categories from a sidecar, keyed by (tail, head)."""
    out: dict[tuple[str, str], str] = {}
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#") or parts[0] == "SEG":
            continue
        if parts[0] == "AE" and len(parts) == 4:
            out[(parts[2], parts[3])] = AE
        elif parts[0] == "SE" and len(parts) == 4:
            out[(parts[2], parts[3])] = SE
        elif parts[0] == "WE" and len(parts) == 3:
            out[(parts[1], parts[2])] = WE
    return out
