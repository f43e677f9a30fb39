"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 safety or verification failure,
3 solver limit exceeded, 4 internal invariant violation.  All randomness
enters through ``--seed``; repeated runs with the same arguments produce
byte-identical output.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dot import export_dot
from .errors import (
    CapExceeded,
    CorrespondenceViolation,
    LoopfreeError,
    NoSafeNode,
    TimeBudgetExceeded,
    UnsafeRound,
)
from .gadgets import generate_gadget, render_layout, parse_layout_categories, verify_correspondence
from .hitting import HittingSetInstance
from .model import (
    apply_round,
    classify_pending,
    parse_instance,
    parse_schedule,
    render_instance,
    render_schedule,
)
from .safety import mode_safe
from .schedulers import SOLVERS, SolverLimits, full_schedule
from .simulate import (
    DelayModel,
    SimulationConfig,
    render_report,
    simulate,
    validate_schedule,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_UNSAFE = 2
EXIT_LIMIT = 3
EXIT_INTERNAL = 4


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse's exit code out of our table
        raise _CliError(message)


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise _CliError(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _write_out(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _limits(args) -> SolverLimits:
    return SolverLimits(
        exact_node_cap=args.exact_cap,
        cycle_cap=args.cycle_cap,
        time_budget=args.time_budget,
    )


def _add_limit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--exact-cap", type=int, default=24, help="max pending nodes for exhaustive search")
    p.add_argument("--cycle-cap", type=int, default=1_000_000, help="max enumerated simple cycles")
    p.add_argument("--time-budget", type=float, default=None, help="seconds per round for the exact solver")


def _delay_model(spec: str) -> DelayModel:
    if spec == "uniform":
        return DelayModel()
    try:
        weights = tuple(int(x) for x in spec.split(","))
        return DelayModel(kind="weights", weights=weights)
    except ValueError as exc:
        raise _CliError(f"bad delay model {spec!r}: use 'uniform' or comma-separated weights") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loopfree", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="print the edge class of every pending node")
    p.add_argument("instance")

    p = sub.add_parser("schedule", help="compute a full update schedule")
    p.add_argument("instance")
    p.add_argument("--mode", choices=["slf", "rlf"], required=True)
    p.add_argument("--solver", choices=list(SOLVERS), default="auto")
    p.add_argument("--output", default=None)
    _add_limit_flags(p)

    p = sub.add_parser("verify", help="check a schedule: partition, per-round safety, simulation")
    p.add_argument("instance")
    p.add_argument("schedule")
    p.add_argument("--mode", choices=["slf", "rlf"], required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="replay a schedule under random orderings")
    p.add_argument("instance")
    p.add_argument("schedule")
    p.add_argument("--mode", choices=["slf", "rlf"], required=True, help="probe mode")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delay-model", default="uniform", help="'uniform' or comma-separated weights")
    p.add_argument("--summary", action="store_true", help="machine-readable summary only")

    p = sub.add_parser("gen-hs", help="generate a hardness gadget from a hitting-set instance")
    p.add_argument("--elements", type=int, required=True, help="universe size m (elements 1..m)")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="A,B,...",
                   help="one subset as comma-separated elements; repeatable")
    p.add_argument("--mode", choices=["slf", "rlf"], required=True)
    p.add_argument("--output", default=None, help="instance file (default stdout)")
    p.add_argument("--layout", default=None, help="layout sidecar file")
    p.add_argument("--verify", action="store_true", help="run the correspondence check")
    _add_limit_flags(p)

    p = sub.add_parser("export-dot", help="emit a DOT drawing of a round state")
    p.add_argument("instance")
    p.add_argument("--schedule", default=None, help="apply the first ROUNDS rounds of this schedule")
    p.add_argument("--rounds", type=int, default=0)
    p.add_argument("--layout", default=None, help="gadget sidecar for edge labels")
    p.add_argument("--output", default=None)

    return parser


def _cmd_classify(args) -> int:
    state = parse_instance(_read(args.instance)).initial_state()
    for v, cls in classify_pending(state).items():
        sys.stdout.write(f"{v} {cls.value}\n")
    return EXIT_OK


def _cmd_schedule(args) -> int:
    instance = parse_instance(_read(args.instance))
    schedule = full_schedule(instance, args.mode, solver=args.solver, limits=_limits(args))
    _write_out(render_schedule(schedule), args.output)
    return EXIT_OK


def _cmd_verify(args) -> int:
    instance = parse_instance(_read(args.instance))
    schedule = parse_schedule(_read(args.schedule))
    validate_schedule(instance, schedule)
    state = instance.initial_state()
    for t, round_nodes in enumerate(schedule.rounds, start=1):
        verdict = mode_safe(state, round_nodes, args.mode)
        if not verdict.safe:
            sys.stdout.write(
                f"round {t}: UNSAFE with X={sorted(verdict.witness_x or ())} "
                f"loop={'>'.join(verdict.witness_cycle or ())}\n"
            )
            return EXIT_UNSAFE
        sys.stdout.write(f"round {t}: safe ({len(round_nodes)} nodes)\n")
        state = apply_round(state, round_nodes)
    config = SimulationConfig(trials=args.trials, seed=args.seed, probe_mode=args.mode)
    report = simulate(instance, schedule, config)
    sys.stdout.write(render_report(report, summary=True))
    return EXIT_OK if report.max_loop_free_confirmed else EXIT_UNSAFE


def _cmd_simulate(args) -> int:
    instance = parse_instance(_read(args.instance))
    schedule = parse_schedule(_read(args.schedule))
    config = SimulationConfig(
        trials=args.trials,
        seed=args.seed,
        delay_model=_delay_model(args.delay_model),
        probe_mode=args.mode,
    )
    report = simulate(instance, schedule, config)
    sys.stdout.write(render_report(report, summary=args.summary))
    return EXIT_OK if report.max_loop_free_confirmed else EXIT_UNSAFE


def _parse_sets(m: int, specs: list[str]) -> HittingSetInstance:
    elements = tuple(range(1, m + 1))
    sets = []
    for spec in specs:
        try:
            group = frozenset(int(x) for x in spec.split(","))
        except ValueError as exc:
            raise _CliError(f"bad set spec {spec!r}") from exc
        if not group or not group <= set(elements):
            raise _CliError(f"set {spec!r} is empty or outside 1..{m}")
        sets.append(group)
    return HittingSetInstance(elements, tuple(sets))


def _cmd_gen_hs(args) -> int:
    hs = _parse_sets(args.elements, args.sets)
    instance, layout = generate_gadget(hs, args.mode)
    _write_out(render_instance(instance), args.output)
    if args.layout:
        Path(args.layout).write_text(render_layout(layout), encoding="utf-8")
    if args.verify:
        report = verify_correspondence(hs, instance, layout, _limits(args))
        sys.stderr.write(
            f"correspondence ok: optimum {report.optimum_size}, excluded "
            f"{sorted(map(str, report.excluded_elements))}, "
            f"minimum hitting set {report.min_hitting_set_size}\n"
        )
    return EXIT_OK


def _cmd_export_dot(args) -> int:
    instance = parse_instance(_read(args.instance))
    state = instance.initial_state()
    if args.schedule:
        schedule = parse_schedule(_read(args.schedule))
        for round_nodes in schedule.rounds[: args.rounds]:
            state = apply_round(state, round_nodes)
    labels = None
    if args.layout:
        labels = {k: v.upper() for k, v in parse_layout_categories(_read(args.layout)).items()}
    _write_out(export_dot(state, labels), args.output)
    return EXIT_OK


_COMMANDS = {
    "classify": _cmd_classify,
    "schedule": _cmd_schedule,
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "gen-hs": _cmd_gen_hs,
    "export-dot": _cmd_export_dot,
}


def run_cli(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except _CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except (CapExceeded, TimeBudgetExceeded) as exc:
        sys.stderr.write(f"limit exceeded: {exc}\n")
        return EXIT_LIMIT
    except CorrespondenceViolation as exc:
        sys.stderr.write(f"correspondence violation: {exc}\n")
        return EXIT_UNSAFE
    except (UnsafeRound, NoSafeNode, AssertionError) as exc:
        sys.stderr.write(f"internal invariant violated: {exc}\n")
        return EXIT_INTERNAL
    except (LoopfreeError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


def main() -> None:
    raise SystemExit(run_cli())
