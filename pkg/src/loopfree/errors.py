"""Exception hierarchy for the loopfree toolkit."""

from __future__ import annotations


class LoopfreeError(Exception):
    """Base class for all toolkit errors."""


class InstanceSyntaxError(LoopfreeError):
    """Instance file is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonSimplePath(LoopfreeError):
    """A policy path repeats a node."""


class NodeSetMismatch(LoopfreeError):
    """The two policy paths do not cover the same node set."""


class EndpointMismatch(LoopfreeError):
    """The two policy paths start or end at different nodes."""


class NotPending(LoopfreeError):
    """A node scheduled for update is not pending in this round."""


class NotAForest(LoopfreeError):
    """The active graph contains a cycle where a forest was required."""


class NotInitialState(LoopfreeError):
    """Operation requires the round-1 (two-path) configuration."""


class TooManyLeaves(LoopfreeError):
    """Two-leaf algorithm invoked on a state with more than two leaves."""


class CapExceeded(LoopfreeError):
    """A configured solver or oracle limit was exceeded."""


class TimeBudgetExceeded(LoopfreeError):
    """Wall-clock budget for a solver ran out before completion."""


class InfeasibleInstance(LoopfreeError):
    """Hitting-set instance contains an empty set and cannot be hit."""


class NoSafeNode(LoopfreeError):
    """Fallback could not find a safe single node; state invariant is broken."""


class InvalidSchedule(LoopfreeError):
    """Schedule rounds do not partition the interesting node set."""


class UnsafeRound(LoopfreeError):
    """Internal verification of an emitted round failed; indicates a bug."""


class CorrespondenceViolation(LoopfreeError):
    """Gadget round-2 optimum does not match the hitting-set structure."""
