import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopfree import (
    EdgeClass,
    active_walk,
    apply_round,
    branch_tags,
    classify_edge,
    classify_pending,
    first_round,
    interesting_nodes,
    is_forest,
    leaf_count,
    make_instance,
    parse_instance,
    parse_schedule,
    render_instance,
    render_schedule,
)
from loopfree.errors import (
    EndpointMismatch,
    InstanceSyntaxError,
    NodeSetMismatch,
    NonSimplePath,
    NotPending,
)
from loopfree.model import UpdateSchedule

from conftest import random_instance

import random


def line_instance():
    return make_instance(["s", "a", "b", "d"], ["s", "b", "a", "d"])


class TestParsing:
    def test_basic(self):
        inst = parse_instance("pi1: s a b d\npi2: s b a d\n")
        assert inst.ell == 4
        assert inst.out2("s") == "b"
        assert inst.s == "s" and inst.d == "d"

    def test_comments_and_blank_lines(self):
        inst = parse_instance("# comment\n\npi1: s a d\n# more\npi2: s a d\n")
        assert interesting_nodes(inst) == frozenset()

    def test_non_simple_path(self):
        with pytest.raises(NonSimplePath):
            parse_instance("pi1: s a b d\npi2: s a a d")

    def test_node_set_mismatch(self):
        with pytest.raises(NodeSetMismatch):
            parse_instance("pi1: s a b d\npi2: s c a d")

    def test_endpoint_mismatch(self):
        with pytest.raises(EndpointMismatch):
            parse_instance("pi1: s a b d\npi2: a s b d")

    def test_syntax_error_carries_line(self):
        with pytest.raises(InstanceSyntaxError) as exc:
            parse_instance("pi1: s a b d\nbogus line here")
        assert exc.value.line == 2

    def test_bad_token(self):
        with pytest.raises(InstanceSyntaxError):
            parse_instance("pi1: s a$ d\npi2: s a$ d")

    def test_duplicate_line(self):
        with pytest.raises(InstanceSyntaxError):
            parse_instance("pi1: s a d\npi1: s a d\npi2: s a d")

    def test_round_trip(self):
        inst = line_instance()
        assert parse_instance(render_instance(inst)) == inst

    def test_schedule_round_trip(self):
        sched = UpdateSchedule("slf", (frozenset({"a", "s"}), frozenset({"b"})))
        assert parse_schedule(render_schedule(sched)) == sched


class TestInterestingNodes:
    def test_swap_example(self):
        assert interesting_nodes(line_instance()) == {"s", "a", "b"}

    def test_identity(self):
        inst = make_instance(["s", "a", "d"], ["s", "a", "d"])
        assert interesting_nodes(inst) == frozenset()

    def test_middle_swap(self):
        inst = make_instance(["s", "a", "b", "c", "d"], ["s", "a", "c", "b", "d"])
        assert interesting_nodes(inst) == {"a", "b", "c"}


class TestClassify:
    def test_initial_line_positions(self):
        state = line_instance().initial_state()
        assert classify_edge(state, "s") is EdgeClass.FORWARD
        assert classify_edge(state, "a") is EdgeClass.FORWARD
        assert classify_edge(state, "b") is EdgeClass.BACKWARD

    def test_horizontal_after_branching(self):
        # Two branches after round 1; v1's edge lands on the other branch
        # at a node off both walks.
        inst = make_instance(
            ["s", "v0", "v1", "v2", "v3", "d"], ["s", "v3", "v2", "v1", "v0", "d"]
        )
        state = apply_round(inst.initial_state(), first_round(inst.initial_state()))
        assert classify_edge(state, "v1") is EdgeClass.HORIZONTAL

    def test_not_pending(self):
        state = line_instance().initial_state()
        state2 = apply_round(state, {"s", "a"})
        with pytest.raises(NotPending):
            classify_edge(state2, "a")

    def test_initial_matches_position_comparison(self):
        rng = random.Random(11)
        for _ in range(50):
            inst = random_instance(rng, rng.randrange(2, 9))
            state = inst.initial_state()
            for v in state.pending:
                expected = (
                    EdgeClass.FORWARD
                    if inst.position(inst.out2(v)) > inst.position(v)
                    else EdgeClass.BACKWARD
                )
                assert classify_edge(state, v) is expected


class TestApplyRound:
    def test_recomputes_active(self):
        state = line_instance().initial_state()
        state2 = apply_round(state, {"s", "a"})
        assert state2.active_out("s") == "b"
        assert state2.active_out("a") == "d"
        assert state2.active_out("b") == "d"
        assert state2.round_index == 2

    def test_empty_round_only_bumps_index(self):
        state = line_instance().initial_state()
        state2 = apply_round(state, ())
        assert state2.updated == state.updated
        assert state2.round_index == 2

    def test_not_pending(self):
        state = apply_round(line_instance().initial_state(), {"b"})
        with pytest.raises(NotPending):
            apply_round(state, {"b"})

    def test_union_commutes(self):
        rng = random.Random(3)
        for _ in range(30):
            inst = random_instance(rng, 6)
            u = sorted(inst.interesting)
            if len(u) < 2:
                continue
            s1 = set(rng.sample(u, len(u) // 2))
            s2 = set(u) - s1
            a = apply_round(apply_round(inst.initial_state(), s1), s2)
            b = apply_round(inst.initial_state(), s1 | s2)
            assert a.updated == b.updated
            assert a.active_indices() == b.active_indices()


class TestWalks:
    def test_old_path(self):
        state = line_instance().initial_state()
        assert active_walk(state, "s").nodes == ("s", "a", "b", "d")

    def test_two_cycle(self):
        inst = make_instance(["s", "a", "d"], ["s", "a", "d"])
        # force a loop by hand-building a state is not possible through the
        # public API; a swapped instance after a bad update shows one.
        swapped = make_instance(["s", "a", "b", "d"], ["s", "b", "a", "d"])
        state = apply_round(swapped.initial_state(), {"b"})
        walk = active_walk(state, "a")
        assert walk.looped and walk.loop_node == "a"
        assert walk.nodes == ("a", "b")
        assert not is_forest(state)

    def test_post_round_walk(self):
        state = apply_round(line_instance().initial_state(), {"s", "a"})
        assert active_walk(state, "s").nodes == ("s", "b", "d")


class TestLeafCount:
    def test_line_has_one_leaf(self):
        assert leaf_count(line_instance().initial_state()) == 1

    def test_branches_after_greedy_round(self):
        # s jumps to b, orphaning a: one branch per greedy-created split.
        inst = make_instance(["s", "a", "b", "c", "d"], ["s", "b", "a", "c", "d"])
        state = apply_round(inst.initial_state(), first_round(inst.initial_state()))
        assert leaf_count(state) == 2

    def test_full_reversal_grows_one_leaf_per_branch(self):
        inst = make_instance(
            ["s", "v0", "v1", "v2", "v3", "d"], ["s", "v3", "v2", "v1", "v0", "d"]
        )
        state = apply_round(inst.initial_state(), first_round(inst.initial_state()))
        assert leaf_count(state) == 3  # s, v0 and v1 each head a branch

    def test_branch_tags_are_lowest_leaf(self):
        inst = make_instance(
            ["s", "v0", "v1", "v2", "v3", "d"], ["s", "v3", "v2", "v1", "v0", "d"]
        )
        state = apply_round(inst.initial_state(), first_round(inst.initial_state()))
        tags = branch_tags(state)
        # s keeps its own branch; v1/v2 hang off an orphaned branch.
        assert tags["s"] == inst.position("s")
        assert tags["v1"] == tags["v2"]
        assert tags["v1"] != tags["s"]


@settings(max_examples=60, deadline=None)
@given(st.permutations(list(range(6))), st.data())
def test_walks_terminate_on_forward_updates(perm, data):
    mid = [f"v{i}" for i in range(6)]
    inst = make_instance(
        ["s"] + mid + ["d"], ["s"] + [mid[i] for i in perm] + ["d"]
    )
    state = inst.initial_state()
    if state.pending:
        state = apply_round(state, first_round(state))
    for v in inst.nodes:
        walk = active_walk(state, v)
        assert not walk.looped
        assert walk.nodes[-1] == "d"


@settings(max_examples=60, deadline=None)
@given(st.permutations(list(range(5))))
def test_classify_is_total_on_pending(perm):
    mid = [f"v{i}" for i in range(5)]
    inst = make_instance(["s"] + mid + ["d"], ["s"] + [mid[i] for i in perm] + ["d"])
    state = inst.initial_state()
    classes = classify_pending(state)
    assert set(classes) == set(state.pending)
