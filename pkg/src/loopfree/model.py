"""Core domain types: update instances, round states, edge classification.

An instance holds two simple paths over the same node set: the installed
policy ``pi1`` and the target policy ``pi2``.  Every other module works on
:class:`RoundState` values derived from an instance, so everything here is
immutable and the hot accessors are backed by integer arrays indexed by
position on ``pi1``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .errors import (
    EndpointMismatch,
    InstanceSyntaxError,
    NodeSetMismatch,
    NonSimplePath,
    NotAForest,
    NotPending,
)

_TOKEN_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


class EdgeClass(enum.Enum):
    """Classification of a pending new edge against the active forest."""

    FORWARD = "forward"
    BACKWARD = "backward"
    HORIZONTAL = "horizontal"


@dataclass(frozen=True)
class UpdateInstance:
    """Two policies over a shared node set, with derived successor maps.

    ``nodes`` is ``pi1`` in path order; the index of a node in it is the
    canonical position used wherever "closer to the destination" matters.
    """

    nodes: tuple[str, ...]
    pi2: tuple[str, ...]
    s: str
    d: str

    def __post_init__(self):
        object.__setattr__(self, "_pos", {v: i for i, v in enumerate(self.nodes)})
        object.__setattr__(self, "_pos2", {v: i for i, v in enumerate(self.pi2)})
        n = len(self.nodes)
        nxt1 = [-1] * n
        nxt2 = [-1] * n
        for i in range(n - 1):
            nxt1[i] = i + 1
        pos = self._pos
        for a, b in zip(self.pi2, self.pi2[1:]):
            nxt2[pos[a]] = pos[b]
        object.__setattr__(self, "_nxt1", tuple(nxt1))
        object.__setattr__(self, "_nxt2", tuple(nxt2))

    # -- basic accessors -------------------------------------------------

    @property
    def pi1(self) -> tuple[str, ...]:
        return self.nodes

    @property
    def ell(self) -> int:
        """Number of nodes on pi1."""
        return len(self.nodes)

    def position(self, v: str) -> int:
        return self._pos[v]

    def position_pi2(self, v: str) -> int:
        return self._pos2[v]

    def out1(self, v: str) -> str | None:
        i = self._nxt1[self._pos[v]]
        return None if i < 0 else self.nodes[i]

    def out2(self, v: str) -> str | None:
        i = self._nxt2[self._pos[v]]
        return None if i < 0 else self.nodes[i]

    @cached_property
    def interesting(self) -> frozenset[str]:
        """Nodes whose old and new successors differ (the set U)."""
        return frozenset(
            self.nodes[i]
            for i in range(len(self.nodes))
            if self._nxt1[i] != self._nxt2[i]
        )

    def initial_state(self) -> "RoundState":
        return RoundState(instance=self, updated=frozenset(), round_index=1)


@dataclass(frozen=True)
class RoundState:
    """Which interesting nodes have switched to their new rule.

    ``updated`` and the remaining pending nodes partition the interesting
    set; every node forwards via ``out2`` once updated and via ``out1``
    before that.  States are immutable; :func:`apply_round` returns a new
    one.
    """

    instance: UpdateInstance
    updated: frozenset[str]
    round_index: int = 1

    def __post_init__(self):
        inst = self.instance
        active = [
            inst._nxt2[i] if inst.nodes[i] in self.updated else inst._nxt1[i]
            for i in range(len(inst.nodes))
        ]
        object.__setattr__(self, "_active", tuple(active))

    @property
    def pending(self) -> frozenset[str]:
        return self.instance.interesting - self.updated

    def active_out(self, v: str) -> str | None:
        i = self._active[self.instance.position(v)]
        return None if i < 0 else self.instance.nodes[i]

    def active_indices(self) -> tuple[int, ...]:
        """Successor index per position, -1 for the destination."""
        return self._active


@dataclass(frozen=True)
class WalkResult:
    """Visited node sequence of a forwarding walk.

    ``loop_node`` is the first repeated node when the walk never reaches
    the destination; the sequence then ends just before the repeat.
    """

    nodes: tuple[str, ...]
    loop_node: str | None = None

    @property
    def looped(self) -> bool:
        return self.loop_node is not None


@dataclass(frozen=True)
class UpdateSchedule:
    """Ordered partition of the interesting nodes, tagged with its mode."""

    mode: str  # "slf" | "rlf"
    rounds: tuple[frozenset[str], ...] = field(default_factory=tuple)

    def all_nodes(self) -> frozenset[str]:
        out: set[str] = set()
        for r in self.rounds:
            out |= r
        return frozenset(out)


# ---------------------------------------------------------------------------
# parsing and rendering


def parse_instance(text: str) -> UpdateInstance:
    """Parse the line-based instance format into a validated instance.

    The format allows ``#`` comment lines and requires exactly one
    ``pi1:`` and one ``pi2:`` line of whitespace-separated node tokens.
    """
    paths: dict[str, tuple[str, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep or key not in ("pi1", "pi2"):
            raise InstanceSyntaxError(f"expected 'pi1:' or 'pi2:' line, got {line!r}", lineno)
        if key in paths:
            raise InstanceSyntaxError(f"duplicate {key} line", lineno)
        tokens = tuple(rest.split())
        if len(tokens) < 2:
            raise InstanceSyntaxError(f"{key} needs at least two nodes", lineno)
        for t in tokens:
            if not _TOKEN_RE.match(t):
                raise InstanceSyntaxError(f"invalid node token {t!r}", lineno)
        paths[key] = tokens
    if "pi1" not in paths or "pi2" not in paths:
        raise InstanceSyntaxError("missing pi1 or pi2 line")
    return make_instance(paths["pi1"], paths["pi2"])


def make_instance(pi1: Iterable[str], pi2: Iterable[str]) -> UpdateInstance:
    """Validate two node sequences and build an instance from them."""
    p1 = tuple(pi1)
    p2 = tuple(pi2)
    if len(set(p1)) != len(p1):
        raise NonSimplePath("pi1 repeats a node")
    if len(set(p2)) != len(p2):
        raise NonSimplePath("pi2 repeats a node")
    if set(p1) != set(p2):
        raise NodeSetMismatch("pi1 and pi2 cover different node sets")
    if p1[0] != p2[0] or p1[-1] != p2[-1]:
        raise EndpointMismatch("pi1 and pi2 must share their first and last node")
    return UpdateInstance(nodes=p1, pi2=p2, s=p1[0], d=p1[-1])


def render_instance(instance: UpdateInstance) -> str:
    """Canonical text form; ``parse_instance`` round-trips it."""
    return "pi1: {}\npi2: {}\n".format(" ".join(instance.pi1), " ".join(instance.pi2))


def render_schedule(schedule: UpdateSchedule) -> str:
    lines = [f"mode: {schedule.mode}"]
    for t, nodes in enumerate(schedule.rounds, start=1):
        lines.append(f"round {t}: " + " ".join(sorted(nodes)))
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> UpdateSchedule:
    mode: str | None = None
    rounds: list[frozenset[str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if key == "mode":
            mode = rest.strip()
            if mode not in ("slf", "rlf"):
                raise InstanceSyntaxError(f"unknown mode {mode!r}", lineno)
        elif key.startswith("round"):
            rounds.append(frozenset(rest.split()))
        else:
            raise InstanceSyntaxError(f"unexpected schedule line {line!r}", lineno)
    if mode is None:
        raise InstanceSyntaxError("schedule is missing its mode header")
    return UpdateSchedule(mode=mode, rounds=tuple(rounds))


# ---------------------------------------------------------------------------
# state operations


def interesting_nodes(instance: UpdateInstance) -> frozenset[str]:
    """The set U of nodes whose forwarding rule actually changes."""
    return instance.interesting


def apply_round(state: RoundState, nodes: Iterable[str]) -> RoundState:
    """Commit a round: switch every node in ``nodes`` to its new rule."""
    ns = frozenset(nodes)
    not_pending = ns - state.pending
    if not_pending:
        raise NotPending(f"not pending: {sorted(not_pending)}")
    return RoundState(
        instance=state.instance,
        updated=state.updated | ns,
        round_index=state.round_index + 1,
    )


def active_walk(state: RoundState, v: str) -> WalkResult:
    """Follow active successors from ``v`` until the destination or a repeat."""
    inst = state.instance
    active = state._active
    i = inst.position(v)
    seen: set[int] = set()
    seq: list[str] = []
    while i >= 0:
        if i in seen:
            return WalkResult(tuple(seq), loop_node=inst.nodes[i])
        seen.add(i)
        seq.append(inst.nodes[i])
        i = active[i]
    return WalkResult(tuple(seq))


def _walk_positions(state: RoundState, v: str) -> set[int]:
    """Position set of the active walk from ``v`` (loop-tolerant)."""
    active = state._active
    i = state.instance.position(v)
    seen: set[int] = set()
    while i >= 0 and i not in seen:
        seen.add(i)
        i = active[i]
    return seen


def classify_edge(state: RoundState, v: str) -> EdgeClass:
    """Classify the pending new edge of ``v`` against the active forest.

    Forward if the new target already lies on v's own walk to the
    destination, backward if v lies on the walk from the new target, and
    horizontal otherwise (the target sits on another branch).
    """
    if v not in state.pending:
        raise NotPending(f"{v!r} is not pending")
    inst = state.instance
    w = inst.out2(v)
    assert w is not None
    if inst.position(w) in _walk_positions(state, v):
        return EdgeClass.FORWARD
    if inst.position(v) in _walk_positions(state, w):
        return EdgeClass.BACKWARD
    return EdgeClass.HORIZONTAL


def classify_pending(state: RoundState) -> dict[str, EdgeClass]:
    """Classification for every pending node, in one pass."""
    return {v: classify_edge(state, v) for v in sorted(state.pending, key=state.instance.position)}


def is_forest(state: RoundState) -> bool:
    """True when every active walk terminates at the destination."""
    inst = state.instance
    active = state.active_indices()
    n = len(inst.nodes)
    status = [0] * n  # 0 unknown, 1 on current path, 2 reaches d
    for start in range(n):
        path = []
        i = start
        while i >= 0 and status[i] == 0:
            status[i] = 1
            path.append(i)
            i = active[i]
        if i >= 0 and status[i] == 1:
            return False
        for j in path:
            status[j] = 2
    return True


def leaf_count(state: RoundState) -> int:
    """Number of active in-degree-0 nodes of the (forest-shaped) state."""
    if not is_forest(state):
        raise NotAForest("active graph contains a cycle")
    inst = state.instance
    indeg = [0] * len(inst.nodes)
    for i, j in enumerate(state.active_indices()):
        if j >= 0:
            indeg[j] += 1
    return sum(1 for x in indeg if x == 0)


def branch_tags(state: RoundState) -> dict[str, int]:
    """Tag every node with the smallest position among leaves below it.

    The tag gives a total, deterministic branch order: two nodes share a
    tag exactly when the same lowest-position leaf feeds both.  Requires a
    forest-shaped state.
    """
    if not is_forest(state):
        raise NotAForest("active graph contains a cycle")
    inst = state.instance
    active = state.active_indices()
    n = len(inst.nodes)
    indeg = [0] * n
    for j in active:
        if j >= 0:
            indeg[j] += 1
    tags: dict[int, int] = {}
    for leaf in range(n):
        if indeg[leaf] != 0:
            continue
        i = leaf
        while i >= 0:
            if i in tags and tags[i] <= leaf:
                break
            tags[i] = min(tags.get(i, leaf), leaf)
            i = active[i]
    return {inst.nodes[i]: tag for i, tag in tags.items()}
