"""Hitting-set instances and solvers.

The exact solver is a branch-and-bound that branches on the elements of a
smallest unhit set, with unit propagation and a disjoint-set lower bound.
It returns the minimum size first and then rebuilds the lexicographically
first optimum by repeated budgeted feasibility queries, so ties are broken
reproducibly.  The greedy solver picks the element covering the most unhit
sets; no ratio is claimed for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

from .errors import CapExceeded, InfeasibleInstance

Element = Hashable

EXACT_UNIVERSE_CAP = 64
EXACT_DEPTH_CAP = 12


@dataclass(frozen=True)
class HittingSetInstance:
    """A universe with a family of subsets to hit.

    ``elements`` fixes the total element order used for tie-breaking.
    """

    elements: tuple[Element, ...]
    sets: tuple[frozenset, ...]

    def __post_init__(self):
        universe = set(self.elements)
        if len(self.elements) != len(universe):
            raise ValueError("duplicate elements in universe")
        for s in self.sets:
            if not s <= universe:
                raise ValueError(f"set {sorted(s, key=repr)} not within universe")

    @property
    def m(self) -> int:
        return len(self.elements)


def _min_hitting_set(
    family: Sequence[frozenset],
    banned: frozenset,
    budget: int | None,
) -> list | None:
    """Minimum hitting set over sortable elements, or None if over budget.

    Elements in ``banned`` may not be used.  ``budget`` bounds the size of
    an acceptable solution (inclusive); None means unbounded.  Branching
    order is deterministic, so the result is reproducible.
    """
    sets = [frozenset(s - banned) for s in family]
    if any(not s for s in sets):
        return None
    # Deduplicate and drop supersets of other sets; they are implied.
    sets = sorted(set(sets), key=lambda s: (len(s), sorted(s)))
    kept: list[frozenset[int]] = []
    for s in sets:
        if not any(k <= s for k in kept):
            kept.append(s)
    sets = kept

    element_sets: dict[int, list[int]] = {}
    for i, s in enumerate(sets):
        for e in s:
            element_sets.setdefault(e, []).append(i)

    best: list[int] | None = None
    best_size = (budget + 1) if budget is not None else (len(sets) + 1)

    def disjoint_bound(unhit: list[int]) -> int:
        used: set[int] = set()
        count = 0
        for i in unhit:
            s = sets[i]
            if not (s & used):
                count += 1
                used |= s
        return count

    def search(chosen: list[int], hit: list[int]) -> None:
        nonlocal best, best_size
        unhit = [i for i in range(len(sets)) if hit[i] == 0]
        if not unhit:
            if len(chosen) < best_size:
                best = chosen.copy()
                best_size = len(chosen)
            return
        if len(chosen) + disjoint_bound(unhit) >= best_size:
            return
        pivot = min(unhit, key=lambda i: (len(sets[i]), sorted(sets[i])))
        for e in sorted(sets[pivot]):
            chosen.append(e)
            for i in element_sets.get(e, ()):
                hit[i] += 1
            search(chosen, hit)
            chosen.pop()
            for i in element_sets.get(e, ()):
                hit[i] -= 1

    search([], [0] * len(sets))
    return best


def solve_hitting_set(instance: HittingSetInstance, mode: str = "exact") -> frozenset:
    """Hitting set over the instance; ``mode`` is "exact" or "greedy".

    Exact mode returns a minimum hitting set, ties broken by taking the
    lexicographically first element tuple.  Greedy mode repeatedly takes
    the element covering the most unhit sets.
    """
    if any(not s for s in instance.sets):
        raise InfeasibleInstance("family contains an empty set")
    if not instance.sets:
        return frozenset()
    order = {e: i for i, e in enumerate(instance.elements)}
    family = [frozenset(order[e] for e in s) for s in instance.sets]

    if mode == "greedy":
        chosen: set[int] = set()
        unhit = set(range(len(family)))
        while unhit:
            counts: dict[int, int] = {}
            for i in unhit:
                for e in family[i]:
                    counts[e] = counts.get(e, 0) + 1
            e = min(counts, key=lambda x: (-counts[x], x))
            chosen.add(e)
            unhit = {i for i in unhit if e not in family[i]}
        return frozenset(instance.elements[e] for e in chosen)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")

    depth_cap = None if instance.m <= EXACT_UNIVERSE_CAP else EXACT_DEPTH_CAP
    base = _min_hitting_set(family, frozenset(), depth_cap)
    if base is None:
        raise CapExceeded(
            f"exact hitting set capped (universe {instance.m} > {EXACT_UNIVERSE_CAP}, "
            f"no solution within depth {EXACT_DEPTH_CAP})"
        )
    k = len(base)

    # Rebuild the lexicographically first optimum: grow the solution in
    # element order, keeping each element only if a k-sized completion
    # using strictly later elements still exists.
    chosen_idx: list[int] = []
    lo = 0
    while len(chosen_idx) < k:
        for e in range(lo, instance.m):
            banned = frozenset(range(e + 1)) - frozenset(chosen_idx + [e])
            residual = [s for s in family if not (s & set(chosen_idx)) and e not in s]
            fill = _min_hitting_set(residual, banned, k - len(chosen_idx) - 1)
            if fill is not None:
                chosen_idx.append(e)
                lo = e + 1
                break
        else:  # pragma: no cover - k came from a feasible solution
            raise AssertionError("lex reconstruction lost feasibility")
    return frozenset(instance.elements[e] for e in chosen_idx)
