"""Asynchronous replay of update schedules with loop probes.

Each trial applies every round one switch at a time in a random order and
probes the forwarding state after every atomic event: from every node in
strong mode, from the source only in relaxed mode.  Rounds are gated — the
next round starts only after all switches of the current one applied — so
a violation always names the offending round and the applied prefix.

Randomness comes from a splitmix64 generator implemented here so that
reports are bit-reproducible for a fixed seed regardless of platform or
Python version (the algorithm is documented in the README).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .errors import InvalidSchedule
from .model import RoundState, UpdateInstance, UpdateSchedule, apply_round
from .safety import RLF, SLF

_MASK = (1 << 64) - 1


class SplitMix64:
    """splitmix64: 64-bit state, golden-gamma increment, two xor-shifts."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform draw from [0, n) by rejection, no modulo bias."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        threshold = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < threshold:
                return r % n

    def shuffle(self, items: list) -> None:
        """Fisher–Yates, drawing indices high-to-low."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class DelayModel:
    """How the per-round application order is drawn.

    ``uniform`` draws a uniformly random permutation.  ``weights`` draws an
    integer delay per switch from the given discrete distribution (weight k
    at index k-1) and applies in (delay, position) order.
    """

    kind: str = "uniform"
    weights: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "weights"):
            raise ValueError(f"unknown delay model {self.kind!r}")
        if self.kind == "weights" and (not self.weights or min(self.weights) < 0 or sum(self.weights) <= 0):
            raise ValueError("weights model needs nonnegative weights summing > 0")


@dataclass(frozen=True)
class SimulationConfig:
    trials: int = 1000
    seed: int = 0
    delay_model: DelayModel = field(default_factory=DelayModel)
    probe_mode: str = SLF

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.probe_mode not in (SLF, RLF):
            raise ValueError(f"unknown probe mode {self.probe_mode!r}")


@dataclass(frozen=True)
class Violation:
    trial: int
    round_index: int
    applied: tuple[str, ...]  # the prefix X that had taken effect
    origin: str
    loop: tuple[str, ...]


@dataclass(frozen=True)
class SimulationReport:
    trials_run: int
    events_processed: int
    seed: int
    probe_mode: str
    violations: tuple[Violation, ...] = ()

    @property
    def max_loop_free_confirmed(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class TraceResult:
    """Outcome of a packet trace: the destination or a loop."""

    reached: bool
    nodes: tuple[str, ...]

    @property
    def loop(self) -> tuple[str, ...]:
        return () if self.reached else self.nodes


def trace_packet(snapshot: dict[str, str | None], origin: str) -> TraceResult:
    """Follow out-edges from ``origin``; at most |snapshot|+1 hops decide."""
    seen: dict[str, int] = {}
    seq: list[str] = []
    cur: str | None = origin
    while cur is not None:
        if cur in seen:
            return TraceResult(False, tuple(seq[seen[cur]:]))
        seen[cur] = len(seq)
        seq.append(cur)
        nxt = snapshot.get(cur)
        cur = nxt
    return TraceResult(True, tuple(seq))


def validate_schedule(instance: UpdateInstance, schedule: UpdateSchedule) -> None:
    """Rounds must be nonempty and partition the interesting node set."""
    seen: set[str] = set()
    for t, r in enumerate(schedule.rounds, start=1):
        if not r:
            raise InvalidSchedule(f"round {t} is empty")
        dup = r & seen
        if dup:
            raise InvalidSchedule(f"round {t} repeats nodes {sorted(dup)}")
        seen |= r
    if seen != instance.interesting:
        missing = instance.interesting - seen
        extra = seen - instance.interesting
        raise InvalidSchedule(
            f"schedule is not a partition of the interesting set "
            f"(missing {sorted(missing)}, extra {sorted(extra)})"
        )


def _probe_origins(instance: UpdateInstance, probe_mode: str) -> tuple[str, ...]:
    if probe_mode == RLF:
        return (instance.s,)
    return instance.nodes[:-1]  # no point probing from the destination


def _int_trace(active: list[int], origin: int, stamp: list[int], trial: int) -> list[int] | None:
    """Loop segment of the walk from origin, or None if it reaches the end."""
    seq: list[int] = []
    i = origin
    while i >= 0:
        if stamp[i] == trial:
            k = seq.index(i)
            return seq[k:]
        stamp[i] = trial
        seq.append(i)
        i = active[i]
    return None


def simulate(
    instance: UpdateInstance, schedule: UpdateSchedule, config: SimulationConfig
) -> SimulationReport:
    """Replay the schedule ``config.trials`` times under random orderings."""
    validate_schedule(instance, schedule)
    rng = SplitMix64(config.seed)
    n = len(instance.nodes)
    nxt1, nxt2 = instance._nxt1, instance._nxt2
    pos = instance.position
    origins = [pos(v) for v in _probe_origins(instance, config.probe_mode)]
    rounds = [sorted(r, key=pos) for r in schedule.rounds]

    violations: list[Violation] = []
    events = 0
    stamp = [0] * n
    stamp_trial = 0

    for trial in range(1, config.trials + 1):
        active = list(nxt1)
        for round_index, round_nodes in enumerate(rounds, start=1):
            order = list(round_nodes)
            if config.delay_model.kind == "uniform":
                rng.shuffle(order)
            else:
                weights = config.delay_model.weights
                total = sum(weights)
                draws = []
                for v in order:
                    pick = rng.below(total)
                    delay = 0
                    while pick >= weights[delay]:
                        pick -= weights[delay]
                        delay += 1
                    draws.append((delay, pos(v), v))
                order = [v for _, _, v in sorted(draws)]
            applied: list[str] = []
            for v in order:
                active[pos(v)] = nxt2[pos(v)]
                applied.append(v)
                events += 1
                for origin in origins:
                    stamp_trial += 1
                    loop = _int_trace(active, origin, stamp, stamp_trial)
                    if loop is not None:
                        violations.append(
                            Violation(
                                trial=trial,
                                round_index=round_index,
                                applied=tuple(applied),
                                origin=instance.nodes[origin],
                                loop=tuple(instance.nodes[i] for i in loop),
                            )
                        )
                        break
    return SimulationReport(
        trials_run=config.trials,
        events_processed=events,
        seed=config.seed,
        probe_mode=config.probe_mode,
        violations=tuple(violations),
    )


def exhaustive_round_violation(
    state: RoundState, round_nodes: frozenset[str], probe_mode: str
) -> Violation | None:
    """Complete check of one round: every application order, every prefix.

    The probe outcome depends only on the set of switches already applied,
    and the prefixes of all permutations range over exactly the subsets,
    so subsets are enumerated directly (smallest first, then positionally).
    Returns the first violation or None; complete rather than sampled.
    """
    inst = state.instance
    nodes = sorted(round_nodes, key=inst.position)
    active0 = list(state.active_indices())
    origins = [inst.position(v) for v in _probe_origins(inst, probe_mode)]
    stamp = [0] * len(inst.nodes)
    trial = 0
    for size in range(1, len(nodes) + 1):
        for combo in combinations(nodes, size):
            active = active0.copy()
            for v in combo:
                active[inst.position(v)] = inst._nxt2[inst.position(v)]
            for origin in origins:
                trial += 1
                loop = _int_trace(active, origin, stamp, trial)
                if loop is not None:
                    return Violation(
                        trial=0,
                        round_index=state.round_index,
                        applied=tuple(combo),
                        origin=inst.nodes[origin],
                        loop=tuple(inst.nodes[i] for i in loop),
                    )
    return None


def render_report(report: SimulationReport, summary: bool = False) -> str:
    """Line-based text form; ``summary`` collapses to the machine-readable core."""
    lines = [
        f"trials: {report.trials_run}",
        f"events: {report.events_processed}",
        f"seed: {report.seed}",
        f"probe: {report.probe_mode}",
        f"violations: {len(report.violations)}",
        f"loop-free: {'yes' if report.max_loop_free_confirmed else 'no'}",
    ]
    if summary:
        if report.violations:
            v = report.violations[0]
            lines.append(
                f"first-violation: trial={v.trial} round={v.round_index} "
                f"origin={v.origin} loop={'>'.join(v.loop)} applied={','.join(v.applied)}"
            )
        return "\n".join(lines) + "\n"
    for v in report.violations:
        lines.append(
            f"violation: trial={v.trial} round={v.round_index} origin={v.origin} "
            f"loop={'>'.join(v.loop)} applied={','.join(v.applied)}"
        )
    return "\n".join(lines) + "\n"
