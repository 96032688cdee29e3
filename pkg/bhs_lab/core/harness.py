"""
Harness - Oracles, trace audits and the verification manager

Trace audits replay a finished trace and evaluate named checks. Oracles run
whole families of simulations (adversary strategies, exhaustive adversary
enumeration, every emergence point) and merge the audits into one report.
The verification manager fans oracle jobs out over a worker pool.
"""

import asyncio
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import networkx as nx

from .adversary import ForcedAdversary, enumerate_decisions, parse_adversary, strategy_set
from .ebhs_chain import (
    Emergence,
    UxsLibrary,
    exploration_period,
    make_backend_factory,
    run_ebhs,
)
from .graph import Footprint, from_networkx, from_port_edges, generate
from .rooted import RootedBhs
from .runtime import (
    Algorithm,
    ConfigurationError,
    EventKind,
    SimOutcome,
    Trace,
    Verdict,
    build_world,
    default_agent_count,
    default_horizon,
    evaluate,
    rooted_placement,
    run,
    scatter_placement,
    step,
)
from .scattered import ScatteredBhs
from .trace_writer import TraceFormatError
from ..data.config import LabConfig

logger = logging.getLogger(__name__)


CHECK_DESCRIPTIONS = {
    "single_travel_writer": "at most one travel write per node per round",
    "marked_slot_capacity": "marked entries only go to free slots, slot 2 only after slot 1",
    "whiteboard_occupancy": "a whiteboard never holds more than one travel, two marked and one group entry",
    "smallest_never_follows": "the smallest agent never follows another agent before joining a group",
    "movement_budget": "each agent makes at most 12*l*m successful moves before any group forms",
    "even_round_moves": "move attempts happen only in even rounds",
    "blocking_forms_group": "more than 16 blocked agents in a round force a group by the next even round",
    "declarations_correct": "every declared port leads to the black hole",
    "death_bound": "at most 2*delta_bh agents die",
    "no_group_round_bound": "without a group the run ends within 152*m*delta_bh rounds",
    "survivor": "at least one agent survives",
    "latency_bound": "the black hole is declared within the latency bound after it emerges",
    "control_silent": "nothing is declared when no black hole emerges",
}

DYNAMIC_CHECKS = [
    "single_travel_writer",
    "marked_slot_capacity",
    "whiteboard_occupancy",
    "smallest_never_follows",
    "movement_budget",
    "even_round_moves",
    "blocking_forms_group",
    "declarations_correct",
    "death_bound",
    "no_group_round_bound",
]

EBHS_CHECKS = ["declarations_correct", "survivor", "latency_bound", "control_silent"]


@dataclass
class CheckResult:
    name: str
    passed: bool = True
    detail: str = ""
    event_index: Optional[int] = None


@dataclass
class AuditReport:
    """Per-check results with the first counterexample and aggregate stats"""
    label: str = ""
    checks: Dict[str, CheckResult] = field(default_factory=dict)
    runs: int = 0
    leaves: int = 0
    stalled: int = 0
    max_deaths: int = 0
    max_rounds: int = 0
    max_wb_occupancy: int = 0
    complete: bool = True
    counterexample: Optional[Dict[str, Any]] = None
    errors: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.complete and not self.errors and all(c.passed for c in self.checks.values())

    def record(self, result: CheckResult, context: Optional[Dict[str, Any]] = None):
        """Keep the first failure per check; remember the first counterexample overall"""
        current = self.checks.get(result.name)
        if current is None or (current.passed and not result.passed):
            self.checks[result.name] = result
        if not result.passed and self.counterexample is None and context is not None:
            self.counterexample = dict(context, check=result.name, detail=result.detail)

    def merge(self, other: "AuditReport", context: Optional[Dict[str, Any]] = None):
        for result in other.checks.values():
            self.record(result, context)
        self.runs += max(other.runs, 1)
        self.leaves += other.leaves
        self.stalled += other.stalled
        self.max_deaths = max(self.max_deaths, other.max_deaths)
        self.max_rounds = max(self.max_rounds, other.max_rounds)
        self.max_wb_occupancy = max(self.max_wb_occupancy, other.max_wb_occupancy)
        self.complete = self.complete and other.complete
        self.errors.extend(other.errors)
        if self.counterexample is None and other.counterexample is not None:
            self.counterexample = other.counterexample

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "ok": self.ok,
            "complete": self.complete,
            "runs": self.runs,
            "leaves": self.leaves,
            "stalled": self.stalled,
            "max_deaths": self.max_deaths,
            "max_rounds": self.max_rounds,
            "max_wb_occupancy": self.max_wb_occupancy,
            "checks": {
                name: {
                    "passed": c.passed,
                    "description": CHECK_DESCRIPTIONS.get(name, ""),
                    "detail": c.detail,
                    "event_index": c.event_index,
                }
                for name, c in sorted(self.checks.items())
            },
            "counterexample": self.counterexample,
            "errors": list(self.errors),
        }

    def summary(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        failed = [name for name, c in sorted(self.checks.items()) if not c.passed]
        line = f"[{status}] {self.label}: {self.runs} runs, max deaths {self.max_deaths}, max rounds {self.max_rounds}"
        if self.stalled:
            line += f", {self.stalled} stalled leaves"
        if not self.complete:
            line += " (incomplete: state budget exhausted)"
        if failed:
            line += f"; failed: {', '.join(failed)}"
        return line


# Trace audit

class _TraceContext:
    """Header facts and parsed events shared by the checks"""

    def __init__(self, trace: Trace, outcome: Optional[SimOutcome]):
        header = trace.header
        try:
            self.model = header["model"]
            self.m = int(header["m"])
            self.agents = list(header["agents"])
            self.footprint = from_port_edges(int(header["n"]), header["edges"], header.get("graph", ""))
        except (KeyError, TypeError, ValueError) as e:
            raise TraceFormatError(f"bad trace header: {e}") from e
        self.header = header
        self.events = trace.events
        self.outcome = outcome
        self.delta_bh = int(header.get("delta_bh", 0))
        self.group_round: Optional[int] = None
        for event in self.events:
            if event.kind == EventKind.GROUP_FORMED:
                self.group_round = event.round
                break

    def before_group(self, round_no: int) -> bool:
        return self.group_round is None or round_no < self.group_round

    @property
    def rounds(self) -> int:
        if self.outcome is not None:
            return self.outcome.rounds_elapsed
        return max((e.round for e in self.events), default=-1) + 1


def _parse_board(detail: str) -> Tuple[str, List[str]]:
    head, *rest = detail.split(":")
    return head, rest


def _check_single_travel_writer(ctx: _TraceContext) -> CheckResult:
    seen: Counter = Counter()
    for index, event in enumerate(ctx.events):
        if event.kind == EventKind.WROTE_WB and event.detail.startswith("travel:"):
            seen[(event.round, event.at)] += 1
            if seen[(event.round, event.at)] > 1:
                return CheckResult(
                    "single_travel_writer", False,
                    f"second travel write at node {event.at} in round {event.round}", index,
                )
    return CheckResult("single_travel_writer")


def _replay_boards(ctx: _TraceContext) -> List[Tuple[str, int, str]]:
    """
    Replay whiteboard events per node, erasures before writes in each round.

    Returns (kind, event index, message) issues where kind is "slot" for
    marked-slot misuse and "occupancy" for overfull boards.
    """
    slots: Dict[int, Dict[int, Optional[str]]] = defaultdict(lambda: {1: None, 2: None})
    travel: Dict[int, str] = {}
    stamped: Dict[int, int] = {}
    issues: List[Tuple[str, int, str]] = []
    by_round: Dict[int, List[Tuple[int, Any]]] = defaultdict(list)
    for index, event in enumerate(ctx.events):
        if event.kind in (EventKind.WROTE_WB, EventKind.ERASED_WB):
            by_round[event.round].append((index, event))
    for round_no in sorted(by_round):
        batch = by_round[round_no]
        stamps_this_round: Counter = Counter()
        for index, event in batch:
            if event.kind != EventKind.ERASED_WB:
                continue
            head, _ = _parse_board(event.detail)
            slot = int(head[len("marked"):])
            if slots[event.at][slot] is None:
                issues.append(("slot", index, f"erase of empty {head} at node {event.at}"))
            slots[event.at][slot] = None
        for index, event in batch:
            if event.kind != EventKind.WROTE_WB:
                continue
            head, rest = _parse_board(event.detail)
            if head.startswith("marked"):
                slot = int(head[len("marked"):])
                if slot not in (1, 2):
                    issues.append(("slot", index, f"unknown slot {head}"))
                    continue
                if slots[event.at][slot] is not None:
                    issues.append(("slot", index, f"write to occupied {head} at node {event.at}"))
                if slot == 2 and slots[event.at][1] is None:
                    issues.append(("slot", index, f"marked2 written while marked1 empty at node {event.at}"))
                slots[event.at][slot] = event.detail
            elif head == "travel":
                travel[event.at] = event.detail
            elif head == "grp":
                stamps_this_round[event.at] += 1
                if stamps_this_round[event.at] > 1:
                    issues.append(("occupancy", index, f"two group stamps at node {event.at}"))
                stamped[event.at] = int(rest[0])
            occupancy = (
                (event.at in travel)
                + sum(1 for s in slots[event.at].values() if s is not None)
                + (event.at in stamped)
            )
            if occupancy > 4:
                issues.append(("occupancy", index, f"{occupancy} entries at node {event.at}"))
    return issues


def _board_check(name: str, kind: str) -> Callable[[_TraceContext], CheckResult]:
    def check(ctx: _TraceContext) -> CheckResult:
        for issue_kind, index, message in _replay_boards(ctx):
            if issue_kind == kind:
                return CheckResult(name, False, message, index)
        return CheckResult(name)
    return check


def _check_smallest_never_follows(ctx: _TraceContext) -> CheckResult:
    """
    The smallest agent still alive never follows.

    Taking over a smaller agent's leftovers after it died (its second mark
    on the same port, or its trail) is allowed; group members are exempt.
    """
    dead: set = set()
    grouped: set = set()
    for index, event in enumerate(ctx.events):
        if event.kind == EventKind.DIED:
            dead.add(event.agent)
        elif event.kind == EventKind.GROUP_FORMED:
            grouped.update(int(a) for a in event.detail.split("roster=")[-1].split(","))
        elif event.kind == EventKind.FOLLOWED and event.agent not in grouped:
            alive = [a for a in ctx.agents if a not in dead]
            if not alive or event.agent != min(alive):
                continue
            leader = int(event.detail.split("leader=")[-1])
            if leader not in dead or leader > event.agent:
                return CheckResult("smallest_never_follows", False, f"agent {event.agent} followed ({event.detail})", index)
    return CheckResult("smallest_never_follows")


def _check_movement_budget(ctx: _TraceContext) -> CheckResult:
    budget = 12 * len(ctx.agents) * ctx.m
    moves: Counter = Counter()
    for index, event in enumerate(ctx.events):
        if event.kind == EventKind.MOVE_OK and ctx.before_group(event.round):
            moves[event.agent] += 1
            if moves[event.agent] > budget:
                return CheckResult("movement_budget", False, f"agent {event.agent} exceeded {budget} moves", index)
    return CheckResult("movement_budget")


def _check_even_round_moves(ctx: _TraceContext) -> CheckResult:
    for index, event in enumerate(ctx.events):
        if event.kind in (EventKind.MOVE_OK, EventKind.MOVE_BLOCKED) and event.round % 2 == 1:
            return CheckResult("even_round_moves", False, f"agent {event.agent} moved in odd round {event.round}", index)
    return CheckResult("even_round_moves")


def _check_blocking_forms_group(ctx: _TraceContext) -> CheckResult:
    blocked: Dict[int, set] = defaultdict(set)
    first_index: Dict[int, int] = {}
    for index, event in enumerate(ctx.events):
        if event.kind == EventKind.MOVE_BLOCKED and ctx.before_group(event.round):
            blocked[event.round].add(event.agent)
            first_index.setdefault(event.round, index)
    last_round = ctx.rounds - 1
    for round_no in sorted(blocked):
        if len(blocked[round_no]) <= 16 or last_round < round_no + 2:
            continue
        if ctx.group_round is None or ctx.group_round > round_no + 2:
            return CheckResult(
                "blocking_forms_group", False,
                f"{len(blocked[round_no])} agents blocked in round {round_no} and no group by round {round_no + 2}",
                first_index[round_no],
            )
    return CheckResult("blocking_forms_group")


def _black_hole_for(ctx: _TraceContext, index: int) -> Optional[int]:
    if ctx.model != "ebhs":
        return ctx.header.get("black_hole")
    for event in ctx.events[:index]:
        if event.kind == EventKind.EMERGED:
            return event.at
    return None


def _check_declarations_correct(ctx: _TraceContext) -> CheckResult:
    for index, event in enumerate(ctx.events):
        if event.kind != EventKind.DECLARED_BH:
            continue
        try:
            port = int(event.detail)
            target, _ = ctx.footprint.neighbor_via_port(event.at, port)
        except (ValueError, KeyError, IndexError) as e:
            raise TraceFormatError(f"event {index}: bad declaration {event.detail!r}") from e
        black_hole = _black_hole_for(ctx, index)
        if black_hole is None or target != black_hole:
            return CheckResult(
                "declarations_correct", False,
                f"agent {event.agent} declared port {port} at node {event.at} (leads to {target})", index,
            )
    return CheckResult("declarations_correct")


def _deaths(ctx: _TraceContext) -> List[Tuple[int, Any]]:
    return [(i, e) for i, e in enumerate(ctx.events) if e.kind == EventKind.DIED]


def _check_death_bound(ctx: _TraceContext) -> CheckResult:
    deaths = _deaths(ctx)
    limit = 2 * ctx.delta_bh
    if len(deaths) > limit:
        index, event = deaths[limit]
        return CheckResult("death_bound", False, f"{len(deaths)} deaths, bound {limit}", index)
    return CheckResult("death_bound")


def _check_no_group_round_bound(ctx: _TraceContext) -> CheckResult:
    if ctx.group_round is not None:
        return CheckResult("no_group_round_bound")
    bound = 152 * ctx.m * ctx.delta_bh
    if ctx.rounds > bound:
        return CheckResult("no_group_round_bound", False, f"{ctx.rounds} rounds without a group, bound {bound}")
    return CheckResult("no_group_round_bound")


def _check_survivor(ctx: _TraceContext) -> CheckResult:
    deaths = _deaths(ctx)
    if len(deaths) >= len(ctx.agents):
        return CheckResult("survivor", False, "every agent died", deaths[-1][0])
    return CheckResult("survivor")


def _event_tick(ctx: _TraceContext, event) -> int:
    starts = ctx.header.get("round_starts") or []
    if event.round >= len(starts):
        raise TraceFormatError(f"no start tick for round {event.round}")
    return starts[event.round] + (event.sub_round or 1) - 1


def _check_latency_bound(ctx: _TraceContext) -> CheckResult:
    emergence = ctx.header.get("emergence")
    if emergence is None:
        return CheckResult("latency_bound")
    bound = int(ctx.header["latency_bound_ticks"])
    for index, event in enumerate(ctx.events):
        if event.kind == EventKind.DECLARED_BH:
            latency = _event_tick(ctx, event) - emergence[1]
            if latency > bound:
                return CheckResult("latency_bound", False, f"declared after {latency} ticks, bound {bound}", index)
            return CheckResult("latency_bound")
    return CheckResult("latency_bound", False, f"no declaration after emergence at node {emergence[0]} tick {emergence[1]}")


def _check_control_silent(ctx: _TraceContext) -> CheckResult:
    if ctx.header.get("emergence") is not None:
        return CheckResult("control_silent")
    for index, event in enumerate(ctx.events):
        if event.kind == EventKind.DECLARED_BH:
            return CheckResult("control_silent", False, f"agent {event.agent} declared without a black hole", index)
    return CheckResult("control_silent")


CHECKS: Dict[str, Callable[[_TraceContext], CheckResult]] = {
    "single_travel_writer": _check_single_travel_writer,
    "marked_slot_capacity": _board_check("marked_slot_capacity", "slot"),
    "whiteboard_occupancy": _board_check("whiteboard_occupancy", "occupancy"),
    "smallest_never_follows": _check_smallest_never_follows,
    "movement_budget": _check_movement_budget,
    "even_round_moves": _check_even_round_moves,
    "blocking_forms_group": _check_blocking_forms_group,
    "declarations_correct": _check_declarations_correct,
    "death_bound": _check_death_bound,
    "no_group_round_bound": _check_no_group_round_bound,
    "survivor": _check_survivor,
    "latency_bound": _check_latency_bound,
    "control_silent": _check_control_silent,
}


def audit_trace(trace: Trace, checks: Optional[List[str]] = None, outcome: Optional[SimOutcome] = None) -> AuditReport:
    """
    Replay a trace and evaluate the named checks.

    Args:
        trace: Header plus events
        checks: Check names (defaults to the model's full set)
        outcome: Run outcome, used for the elapsed round count when given

    Raises:
        TraceFormatError: Malformed header or event details
    """
    ctx = _TraceContext(trace, outcome)
    names = checks or (EBHS_CHECKS if ctx.model == "ebhs" else DYNAMIC_CHECKS)
    report = AuditReport(label=trace.header.get("graph", ""), runs=1)
    for name in names:
        if name not in CHECKS:
            raise ConfigurationError(f"unknown check {name!r}")
        try:
            report.record(CHECKS[name](ctx))
        except (ValueError, IndexError, KeyError) as e:
            if isinstance(e, TraceFormatError):
                raise
            raise TraceFormatError(f"check {name}: {e}") from e
    report.max_deaths = len(_deaths(ctx))
    report.max_rounds = ctx.rounds
    if outcome is not None:
        report.max_wb_occupancy = outcome.max_wb_occupancy
    return report


# Oracle jobs

@dataclass
class DynamicScenario:
    """Dynamic-model runs: strategies over placements, or exhaustive adversary search"""
    black_hole: int
    algorithm: str = "scattered"
    adversaries: List[str] = field(default_factory=lambda: ["none"])
    placement_seeds: List[int] = field(default_factory=lambda: [1])
    placements: List[Dict[int, int]] = field(default_factory=list)
    agent_count: Optional[int] = None
    home: int = 0
    horizon: Optional[int] = None
    exhaustive: bool = False
    max_states: int = 20000
    require_liveness: bool = False


@dataclass
class EbhsScenario:
    """Every emergence (node, tick) within `periods` exploration periods, plus the control run"""
    home: int = 0
    backend: str = "dfs"
    nodes: Optional[List[int]] = None
    max_tick: Optional[int] = None
    periods: int = 2
    uxs_max_n: int = 6


@dataclass
class OracleJob:
    label: str
    footprint: Footprint
    scenario: Union[DynamicScenario, EbhsScenario]
    checks: List[str] = field(default_factory=list)


def make_algorithm(name: str) -> Algorithm:
    if name == "scattered":
        return ScatteredBhs()
    if name == "rooted":
        return RootedBhs()
    raise ConfigurationError(f"unknown dynamic algorithm {name!r}")


def _placements(fp: Footprint, scenario: DynamicScenario, exponent: int) -> List[Dict[int, int]]:
    if scenario.placements:
        return list(scenario.placements)
    count = scenario.agent_count or default_agent_count(fp, scenario.black_hole)
    if scenario.algorithm == "rooted":
        return [rooted_placement(fp, scenario.home, count, seed, exponent) for seed in scenario.placement_seeds]
    return [scatter_placement(fp, scenario.black_hole, count, seed, exponent) for seed in scenario.placement_seeds]


def oracle_dynamic(job: OracleJob, config: Optional[LabConfig] = None) -> AuditReport:
    """
    Run the dynamic-model oracle for one footprint and black hole.

    Strategy mode runs every placement against every adversary spec and
    audits each trace. Exhaustive mode branches over every legal missing edge
    in every even round, memoizing on the world state.
    """
    scenario: DynamicScenario = job.scenario
    fp = job.footprint
    exponent = config.id_exponent if config else 2
    slack = config.horizon_slack if config else 200
    report = AuditReport(label=job.label, runs=0)
    for placement in _placements(fp, scenario, exponent):
        if scenario.exhaustive:
            report.merge(_exhaustive(job, placement), None)
            continue
        for spec in scenario.adversaries:
            adversary = parse_adversary(spec, fp)
            result = run(
                fp, scenario.black_hole, placement, make_algorithm(scenario.algorithm), adversary,
                horizon=scenario.horizon, horizon_slack=slack,
            )
            audit = audit_trace(result.trace, job.checks or None, result.outcome)
            context = {
                "graph": fp.name,
                "black_hole": scenario.black_hole,
                "placement": {str(k): v for k, v in sorted(placement.items())},
                "adversary": spec,
                "script": {str(r): [e.u, e.v] for r, e in sorted(result.world.script.items())},
                "verdict": result.outcome.verdict.value,
            }
            audit.record(CheckResult(
                "solved", result.outcome.solved, result.outcome.violation or result.outcome.verdict.value,
            ))
            report.merge(audit, context)
    logger.info(report.summary())
    return report


def _exhaustive(job: OracleJob, placement: Dict[int, int]) -> AuditReport:
    scenario: DynamicScenario = job.scenario
    fp = job.footprint
    bh = scenario.black_hole
    horizon = scenario.horizon if scenario.horizon is not None else default_horizon(fp, bh)
    decisions = enumerate_decisions(fp)
    report = AuditReport(label=job.label, runs=1)
    report.record(CheckResult("declarations_correct"))
    report.record(CheckResult("death_bound"))
    if scenario.require_liveness:
        report.record(CheckResult("liveness"))
    memo: Dict[tuple, str] = {}
    limit = 2 * fp.degree(bh)

    def leaf(world, horizon_reached: bool, on_path: bool = False) -> str:
        report.leaves += 1
        outcome = evaluate(world, horizon_reached)
        report.max_deaths = max(report.max_deaths, outcome.deaths)
        report.max_rounds = max(report.max_rounds, outcome.rounds_elapsed)
        report.max_wb_occupancy = max(report.max_wb_occupancy, outcome.max_wb_occupancy)
        context = {
            "graph": fp.name,
            "black_hole": bh,
            "placement": {str(k): v for k, v in sorted(placement.items())},
            "adversary": "exhaustive",
            "script": {str(r): [e.u, e.v] for r, e in sorted(world.script.items())},
            "round": world.round_no,
        }
        if outcome.deaths > limit:
            report.record(CheckResult("death_bound", False, f"{outcome.deaths} deaths, bound {limit}"), context)
            return "fail"
        if outcome.verdict == Verdict.VIOLATION and not (on_path or horizon_reached):
            report.record(CheckResult("declarations_correct", False, outcome.violation or "violation"), context)
            return "fail"
        if outcome.verdict == Verdict.SOLVED:
            return "ok"
        report.stalled += 1
        if scenario.require_liveness:
            report.record(CheckResult("liveness", False, "stalled without a declaration"), context)
        return "stalled"

    def explore(world, path: set) -> str:
        if world.finished:
            return leaf(world, False)
        if world.round_no >= horizon:
            return leaf(world, True)
        key = world.state_key()
        if key in path:
            return leaf(world, False, on_path=True)
        if key in memo:
            return memo[key]
        if len(memo) >= scenario.max_states:
            report.complete = False
            return "budget"
        choices = decisions if world.round_no % 2 == 0 else decisions[:1]
        path.add(key)
        result = "ok"
        for decision in choices:
            child = world.clone()
            child.adversary.next_missing = decision.missing
            step(child)
            outcome = explore(child, path)
            if outcome == "fail":
                result = "fail"
                break
            if outcome in ("stalled", "budget") and result == "ok":
                result = outcome
            if not report.complete:
                break
        path.discard(key)
        memo[key] = result
        return result

    world = build_world(fp, bh, placement, make_algorithm(scenario.algorithm), ForcedAdversary())
    explore(world, set())
    return report


def oracle_ebhs(job: OracleJob, config: Optional[LabConfig] = None, library: Optional[UxsLibrary] = None) -> AuditReport:
    """Chain simulation for every emergence point in the sampled periods, plus the control run"""
    scenario: EbhsScenario = job.scenario
    fp = job.footprint
    factory = make_backend_factory(scenario.backend, fp, library, max_n=scenario.uxs_max_n)
    period = exploration_period(fp, scenario.home, factory)
    last_tick = scenario.periods * period
    if scenario.max_tick is not None:
        last_tick = min(last_tick, scenario.max_tick + 1)
    checks = job.checks or EBHS_CHECKS
    report = AuditReport(label=job.label, runs=0)

    control = run_ebhs(fp, scenario.home, factory)
    report.merge(audit_trace(control.trace, checks, control.outcome), {"graph": fp.name, "emergence": None})

    nodes = scenario.nodes if scenario.nodes is not None else list(range(fp.node_count))
    for node in nodes:
        for tick in range(last_tick):
            if node == scenario.home and tick == 0:
                continue
            result = run_ebhs(fp, scenario.home, factory, Emergence(node, tick))
            context = {"graph": fp.name, "backend": scenario.backend, "emergence": [node, tick]}
            report.merge(audit_trace(result.trace, checks, result.outcome), context)
    logger.info(report.summary())
    return report


def run_job(job: OracleJob, config: Optional[LabConfig] = None, library: Optional[UxsLibrary] = None) -> AuditReport:
    if isinstance(job.scenario, EbhsScenario):
        return oracle_ebhs(job, config, library)
    return oracle_dynamic(job, config)


# Suites

def corpus_specs(quick: bool = False) -> List[str]:
    """Rings 4-10, paths 4-8, ten random graphs on 8 nodes, K4 and the 3x3 torus"""
    if quick:
        return ["ring:4", "ring:5", "path:4", "complete:4", "random:6,8,1"]
    return (
        [f"ring:{n}" for n in range(4, 11)]
        + [f"path:{n}" for n in range(4, 9)]
        + [f"random:8,12,{seed}" for seed in range(1, 11)]
        + ["complete:4", "torus:3x3"]
    )


def dynamic_corpus(kind: str, quick: bool = False) -> List[Tuple[Footprint, int]]:
    """(footprint, black hole) pairs for the dynamic suites, every black hole position"""
    pairs = []
    for fp in map(generate, corpus_specs(quick)):
        for bh in range(fp.node_count):
            if kind == "rooted" and bh == 0:
                continue
            pairs.append((fp, bh))
    return pairs


def _small_graphs(n_max: int) -> List[Footprint]:
    """Every connected graph with 2..n_max nodes"""
    return [
        from_networkx(g, name=f"atlas{index}")
        for index, g in enumerate(nx.graph_atlas_g())
        if 2 <= g.number_of_nodes() <= n_max and nx.is_connected(g)
    ]


def _spread_placement(fp: Footprint, black_hole: int) -> Dict[int, int]:
    safe = [v for v in range(fp.node_count) if v != black_hole]
    return {aid: safe[aid % len(safe)] for aid in range(1, default_agent_count(fp, black_hole) + 1)}


def ebhs_corpus(quick: bool = False) -> List[Tuple[str, str]]:
    """(generator spec, backend) pairs: every corpus graph with dfs, small graphs with uxs"""
    if quick:
        return [("ring:5", "dfs"), ("path:4", "dfs"), ("complete:4", "dfs"), ("ring:4", "uxs")]
    return [(spec, "dfs") for spec in corpus_specs()] + [("ring:4", "uxs"), ("path:3", "uxs")]


def build_suite(name: str, config: Optional[LabConfig] = None, quick: bool = False) -> List[OracleJob]:
    """
    Oracle jobs for `scattered`, `rooted`, `ebhs` or `all`.

    Quick suites use a smaller graph set, the first two random seeds, one
    placement seed, graphs of at most 3 nodes for exhaustive search, and
    emergence ticks up to 60.
    """
    config = config or LabConfig()
    random_seeds = config.random_seeds[:2] if quick else config.random_seeds
    placement_seeds = config.placement_seeds[:1] if quick else config.placement_seeds
    jobs: List[OracleJob] = []
    if name in ("scattered", "all"):
        for fp, bh in dynamic_corpus("scattered", quick):
            jobs.append(OracleJob(
                f"scattered/{fp.name}/bh{bh}", fp,
                DynamicScenario(bh, "scattered", strategy_set(fp, random_seeds), placement_seeds),
                DYNAMIC_CHECKS,
            ))
        for fp in _small_graphs(3 if quick else 4):
            for bh in range(fp.node_count):
                jobs.append(OracleJob(
                    f"scattered/{fp.name}/bh{bh}/exhaustive", fp,
                    DynamicScenario(
                        bh, "scattered",
                        placements=[_spread_placement(fp, bh)],
                        horizon=config.exhaustive_horizon,
                        exhaustive=True,
                        max_states=config.exhaustive_max_states // (10 if quick else 1),
                    ),
                ))
    if name in ("rooted", "all"):
        for fp, bh in dynamic_corpus("rooted", quick):
            jobs.append(OracleJob(
                f"rooted/{fp.name}/bh{bh}", fp,
                DynamicScenario(bh, "rooted", strategy_set(fp, random_seeds), placement_seeds, agent_count=9),
                [c for c in DYNAMIC_CHECKS if c != "blocking_forms_group"],
            ))
    if name in ("ebhs", "all"):
        for spec, backend in ebhs_corpus(quick):
            fp = generate(spec)
            jobs.append(OracleJob(
                f"ebhs/{fp.name}/{backend}", fp,
                EbhsScenario(backend=backend, uxs_max_n=4, max_tick=60 if quick else (300 if backend == "uxs" else None)),
                EBHS_CHECKS,
            ))
    if not jobs:
        raise ConfigurationError(f"unknown suite {name!r}")
    return jobs


class VerificationManager:
    """
    Runs oracle jobs (and any other blocking work) on a bounded worker pool.

    Features:
    - Concurrency limited by config.max_concurrent_jobs
    - Results returned in submission order
    - Progress and completion callbacks
    """

    def __init__(
        self,
        config: Optional[LabConfig] = None,
        database=None,
        progress_callback: Optional[Callable[[int, int], None]] = None,
        completion_callback: Optional[Callable[[AuditReport], None]] = None,
    ):
        """
        Initialize the verification manager.

        Args:
            config: Configuration object
            database: Database holding the exploration sequence cache
            progress_callback: Called with (finished, total) after every job
            completion_callback: Called with each finished report
        """
        self.config = config or LabConfig()
        self.database = database
        self.progress_callback = progress_callback
        self.completion_callback = completion_callback
        self.library = UxsLibrary(database)
        self.queue: List[OracleJob] = []
        self._finished = 0

    def add_job(self, job: OracleJob):
        self.queue.append(job)

    async def map(self, func: Callable[[Any], Any], items: List[Any]) -> List[Any]:
        """Apply a blocking function to every item on the worker pool, keeping item order"""
        semaphore = asyncio.Semaphore(max(1, self.config.max_concurrent_jobs))
        total = len(items)
        self._finished = 0

        async def worker(item):
            async with semaphore:
                result = await asyncio.to_thread(func, item)
            self._finished += 1
            if self.progress_callback:
                self.progress_callback(self._finished, total)
            return result

        return await asyncio.gather(*(worker(item) for item in items), return_exceptions=True)

    async def run_jobs(self, jobs: Optional[List[OracleJob]] = None) -> List[AuditReport]:
        """Run the given jobs (or the queued ones); failures become failed reports"""
        jobs = list(jobs) if jobs is not None else self.queue
        self.queue = []
        results = await self.map(lambda job: run_job(job, self.config, self.library), jobs)
        reports: List[AuditReport] = []
        for job, result in zip(jobs, results):
            if isinstance(result, BaseException):
                logger.error("job %s failed: %s", job.label, result)
                result = AuditReport(label=job.label, errors=[f"{type(result).__name__}: {result}"])
            reports.append(result)
            if self.completion_callback:
                self.completion_callback(result)
        return reports
