"""Shared generators and fixtures for the test suite.

All randomness is seeded so every run sees the same corpus.  Instances are
drawn from four permutation families (full shuffle, segment reversal,
transpositions, segment rotation) because they produce different branch
shapes after the first round.
"""

from __future__ import annotations

import random

import pytest

from loopfree import apply_round, first_round, leaf_count, make_instance
from loopfree.model import UpdateInstance

FAMILIES = ("perm", "reversal", "transp", "rotate")


def random_instance(rng: random.Random, n_mid: int, family: str = "perm") -> UpdateInstance:
    mid = [f"v{i}" for i in range(n_mid)]
    if family == "perm":
        mid2 = rng.sample(mid, len(mid))
    elif family == "reversal":
        i = rng.randrange(n_mid)
        j = rng.randrange(i, n_mid)
        mid2 = mid[:i] + mid[i : j + 1][::-1] + mid[j + 1 :]
    elif family == "transp":
        mid2 = mid[:]
        for _ in range(rng.randrange(1, 4)):
            i, j = rng.randrange(n_mid), rng.randrange(n_mid)
            mid2[i], mid2[j] = mid2[j], mid2[i]
    elif family == "rotate":
        i = rng.randrange(n_mid)
        j = rng.randrange(i, n_mid)
        seg = mid[i : j + 1]
        mid2 = mid[:i] + seg[1:] + seg[:1] + mid[j + 1 :]
    else:
        raise ValueError(family)
    return make_instance(["s"] + mid + ["d"], ["s"] + mid2 + ["d"])


def round2_states(
    seed: int,
    count: int,
    *,
    n_mid=(3, 10),
    leaves: int | None = None,
    max_pending: int | None = None,
):
    """Round-2 states with nonempty pending, filtered by shape.

    Yields (instance, state) pairs; generation is deterministic in ``seed``.
    """
    rng = random.Random(seed)
    produced = 0
    attempts = 0
    while produced < count:
        attempts += 1
        if attempts > 1000 * count:
            raise RuntimeError("round2_states filter too strict")
        family = rng.choice(FAMILIES)
        inst = random_instance(rng, rng.randrange(n_mid[0], n_mid[1]), family)
        state = inst.initial_state()
        if not state.pending:
            continue
        state2 = apply_round(state, first_round(state))
        if not state2.pending:
            continue
        if max_pending is not None and len(state2.pending) > max_pending:
            continue
        if leaves is not None and leaf_count(state2) != leaves:
            continue
        produced += 1
        yield inst, state2


@pytest.fixture(scope="session")
def small_instances():
    """A mixed bag of instances with nonempty interesting sets."""
    rng = random.Random(2024)
    out = []
    while len(out) < 60:
        inst = random_instance(rng, rng.randrange(2, 9), rng.choice(FAMILIES))
        if inst.interesting:
            out.append(inst)
    return out


@pytest.fixture(scope="session")
def separation_instance():
    """Instance whose relaxed schedule loops transiently off the source walk.

    After round 1 the source walk is s - v3 - d while v1 - v2 hang on a
    separate branch; updating v2 alone closes the loop v1 - v2, which only
    relaxed mode tolerates.
    """
    return make_instance(
        ["s", "v0", "v1", "v2", "v3", "d"],
        ["s", "v3", "v2", "v1", "v0", "d"],
    )
