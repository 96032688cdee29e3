"""
Runtime - Synchronous round engine for the dynamic-graph model

Runs Look-Compute-Move rounds: every alive agent reads its node's whiteboard
and the co-located agents, the algorithm returns an action, whiteboard writes
are arbitrated per node, and all moves commit together against the snapshot
chosen by the adversary. Agents entering the black hole die without a trace.
"""

import copy
import dataclasses
import logging
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple, Union

from .graph import EdgeId, Footprint, NodeId, Port

if TYPE_CHECKING:
    from .adversary import AdversaryStrategy

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ConfigurationError(ValueError):
    """Raised for inconsistent run configurations"""


class WhiteboardConflict(RuntimeError):
    """Raised when co-located agents request incompatible whiteboard writes"""


class ExploreState(Enum):
    EXPLORE = "explore"
    BACKTRACK = "backtrack"


class IcmPhase(Enum):
    """Individual cautious movement: mark and move, return, delete and move"""
    IDLE = "idle"
    MARKED_AND_MOVING = "marked_and_moving"
    VERIFY_ALIVE = "verify_alive"
    RETURNING = "returning"
    DELETING = "deleting"
    FINAL_MOVE = "final_move"


class AgentMode(Enum):
    OWN_DFS = "own_dfs"
    FOLLOWER = "follower"
    GROUP_MEMBER = "group_member"
    TERMINATED = "terminated"


class PendingMove(Enum):
    """Kind of the last move attempt, kept so a blocked move can be retried"""
    NONE = "none"
    PLAIN = "plain"
    ICM = "icm"


class EventKind(Enum):
    MOVE_OK = "move_ok"
    MOVE_BLOCKED = "move_blocked"
    DIED = "died"
    WROTE_WB = "wrote_wb"
    ERASED_WB = "erased_wb"
    DECLARED_BH = "declared_bh"
    TERMINATED = "terminated"
    GROUP_FORMED = "group_formed"
    FOLLOWED = "followed"
    INFORMED = "informed"
    EMERGED = "emerged"


class Verdict(Enum):
    SOLVED = "solved"
    UNSOLVED_HORIZON = "unsolved_horizon"
    VIOLATION = "violation"


@dataclass(frozen=True)
class IcmState:
    phase: IcmPhase = IcmPhase.IDLE
    target_port: Port = -1
    slot: int = 0
    origin: NodeId = -1

    @property
    def complete(self) -> bool:
        return self.phase == IcmPhase.IDLE


@dataclass
class AgentState:
    """
    Public variables of one agent.

    position, alive, pin and moved are owned by the engine; everything else is
    the agent's own memory and is replaced by the action the algorithm returns.
    """
    id: int
    position: NodeId
    state: ExploreState = ExploreState.EXPLORE
    success: bool = True
    pout: Port = -1
    pin: Port = -1
    grp: bool = False
    grp_id: Optional[int] = None
    alive: bool = True
    icm: IcmState = field(default_factory=IcmState)
    mode: AgentMode = AgentMode.OWN_DFS
    leader: Optional[int] = None
    pending: PendingMove = PendingMove.NONE
    moved: Optional[bool] = None
    group: Optional[Any] = None

    @property
    def active(self) -> bool:
        return self.alive and self.mode != AgentMode.TERMINATED


@dataclass(frozen=True)
class TravelInfo:
    owner: int
    parent: Port
    recent: Port
    pass_no: int = 0


@dataclass(frozen=True)
class MarkedPort:
    port: Port
    owner: int


@dataclass(frozen=True)
class Whiteboard:
    travel: Optional[TravelInfo] = None
    marked1: Optional[MarkedPort] = None
    marked2: Optional[MarkedPort] = None
    grp: bool = False
    grp_id: Optional[int] = None

    def mark(self, slot: int) -> Optional[MarkedPort]:
        return self.marked1 if slot == 1 else self.marked2

    @property
    def marks(self) -> List[Tuple[int, MarkedPort]]:
        return [(slot, m) for slot, m in ((1, self.marked1), (2, self.marked2)) if m is not None]

    @property
    def occupancy(self) -> int:
        """Travel entries plus marked entries currently stored"""
        return int(self.travel is not None) + len(self.marks)


class WbOpKind(Enum):
    WRITE_TRAVEL = "write_travel"
    WRITE_MARK = "write_mark"
    ERASE_MARK = "erase_mark"
    STAMP_GROUP = "stamp_group"


@dataclass(frozen=True)
class WbOp:
    kind: WbOpKind
    slot: int = 0
    travel: Optional[TravelInfo] = None
    mark: Optional[MarkedPort] = None
    grp_id: Optional[int] = None


@dataclass(frozen=True)
class LocalView:
    """What an agent sees in its Look phase. Node indices are never exposed."""
    degree: int
    whiteboard: Whiteboard
    others: Tuple[AgentState, ...]
    moved: Optional[bool]
    round_no: int

    def other(self, agent_id: int) -> Optional[AgentState]:
        for agent in self.others:
            if agent.id == agent_id:
                return agent
        return None


@dataclass
class Action:
    agent: AgentState
    ops: List[WbOp] = field(default_factory=list)
    move: Optional[Port] = None
    declare: Optional[Port] = None
    terminate: bool = False
    notes: List[Tuple[EventKind, str]] = field(default_factory=list)


class Algorithm(ABC):
    """Per-agent decision function: (agent copy, view, round) -> action"""

    name: str = "algorithm"

    @abstractmethod
    def compute(self, agent: AgentState, view: LocalView, round_no: int) -> Action:
        ...


@dataclass(frozen=True)
class TraceEvent:
    round: int
    sub_round: Optional[int]
    agent: int
    kind: EventKind
    at: NodeId
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "sub_round": self.sub_round,
            "agent": self.agent,
            "kind": self.kind.value,
            "at": self.at,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceEvent":
        return cls(
            round=int(data["round"]),
            sub_round=data.get("sub_round"),
            agent=int(data["agent"]),
            kind=EventKind(data["kind"]),
            at=int(data["at"]),
            detail=data.get("detail", ""),
        )


@dataclass
class Trace:
    header: dict
    events: List[TraceEvent] = field(default_factory=list)


@dataclass(frozen=True)
class Detection:
    declarer: int
    node: NodeId
    port: Port
    sub_round: Optional[int] = None


@dataclass
class SimOutcome:
    detected: List[Detection]
    deaths: int
    dead_ids: List[int]
    rounds_elapsed: int
    blocked_rounds: int
    verdict: Verdict
    violation: Optional[str] = None
    group_formed: bool = False
    max_wb_occupancy: int = 0
    moves: Dict[int, int] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.verdict == Verdict.SOLVED

    def to_dict(self) -> dict:
        data = {
            "schema": SCHEMA_VERSION,
            "verdict": self.verdict.value,
            "violation": self.violation,
            "detected": [dataclasses.asdict(d) for d in self.detected],
            "deaths": self.deaths,
            "dead_ids": list(self.dead_ids),
            "rounds_elapsed": self.rounds_elapsed,
            "blocked_rounds": self.blocked_rounds,
            "group_formed": self.group_formed,
            "max_wb_occupancy": self.max_wb_occupancy,
            "moves": {str(k): v for k, v in sorted(self.moves.items())},
        }
        data.update(self.extra)
        return data


# Event detail encoding, parsed back by the trace auditor

def board_detail(op: WbOp) -> str:
    if op.kind == WbOpKind.WRITE_TRAVEL:
        t = op.travel
        return f"travel:{t.owner}:{t.parent}:{t.recent}:{t.pass_no}"
    if op.kind in (WbOpKind.WRITE_MARK, WbOpKind.ERASE_MARK):
        return f"marked{op.slot}:{op.mark.port}:{op.mark.owner}"
    return f"grp:{op.grp_id}"


def resolve_wb_writes(board: Whiteboard, requests: List[Tuple[int, WbOp]]) -> Whiteboard:
    """
    Apply one round of whiteboard requests at a node.

    Erasures apply first, then writes. The algorithm is responsible for
    uniqueness; this only checks it and raises WhiteboardConflict.
    """
    erasures = [(aid, op) for aid, op in requests if op.kind == WbOpKind.ERASE_MARK]
    travels = [(aid, op) for aid, op in requests if op.kind == WbOpKind.WRITE_TRAVEL]
    marks = [(aid, op) for aid, op in requests if op.kind == WbOpKind.WRITE_MARK]
    stamps = [(aid, op) for aid, op in requests if op.kind == WbOpKind.STAMP_GROUP]

    slots = {1: board.marked1, 2: board.marked2}
    for aid, op in erasures:
        current = slots.get(op.slot)
        if current is None or current.owner != aid:
            raise WhiteboardConflict(f"agent {aid} erased marked{op.slot} it does not own")
        slots[op.slot] = None

    if len(travels) > 1:
        writers = ", ".join(str(aid) for aid, _ in travels)
        raise WhiteboardConflict(f"more than one travel write in one round (agents {writers})")
    travel = travels[0][1].travel if travels else board.travel

    if len(marks) > 1:
        writers = ", ".join(str(aid) for aid, _ in marks)
        raise WhiteboardConflict(f"more than one marked write in one round (agents {writers})")
    for aid, op in marks:
        if op.slot not in (1, 2):
            raise WhiteboardConflict(f"agent {aid} wrote unknown slot {op.slot}")
        if slots[op.slot] is not None:
            raise WhiteboardConflict(f"agent {aid} wrote occupied marked{op.slot}")
        if op.slot == 2 and slots[1] is None:
            raise WhiteboardConflict(f"agent {aid} wrote marked2 while marked1 is empty")
        slots[op.slot] = op.mark

    grp, grp_id = board.grp, board.grp_id
    if len(stamps) > 1:
        raise WhiteboardConflict("more than one group stamp in one round")
    for _, op in stamps:
        grp, grp_id = True, op.grp_id

    return Whiteboard(travel=travel, marked1=slots[1], marked2=slots[2], grp=grp, grp_id=grp_id)


class World:
    """
    Complete simulation state of one dynamic-graph run.

    Args:
        footprint: Static graph
        black_hole: Black hole node
        agents: Initial agent states
        algorithm: Decision function shared by all agents
        adversary: Strategy choosing the missing edge each round
    """

    def __init__(
        self,
        footprint: Footprint,
        black_hole: NodeId,
        agents: List[AgentState],
        algorithm: Algorithm,
        adversary: "AdversaryStrategy",
    ):
        self.footprint = footprint
        self.black_hole = black_hole
        self.agents: Dict[int, AgentState] = {a.id: a for a in sorted(agents, key=lambda a: a.id)}
        self.algorithm = algorithm
        self.adversary = adversary
        self.whiteboards: List[Whiteboard] = [Whiteboard() for _ in range(footprint.node_count)]
        self.round_no = 0
        self.missing: Optional[EdgeId] = None
        self.events: List[TraceEvent] = []
        self.declarations: List[Detection] = []
        self.violation: Optional[str] = None
        self.blocked_rounds = 0
        self.group_formed = False
        self.max_wb_occupancy = 0
        self.moves: Dict[int, int] = {aid: 0 for aid in self.agents}
        self.script: Dict[int, EdgeId] = {}

    @property
    def delta_bh(self) -> int:
        return self.footprint.degree(self.black_hole)

    @property
    def alive_agents(self) -> List[AgentState]:
        return [a for a in self.agents.values() if a.alive]

    @property
    def actors(self) -> List[AgentState]:
        return [a for a in self.agents.values() if a.active]

    @property
    def deaths(self) -> List[int]:
        return [aid for aid, a in self.agents.items() if not a.alive]

    @property
    def finished(self) -> bool:
        return bool(self.declarations) or self.violation is not None or not self.actors

    def view_for(self, agent: AgentState) -> LocalView:
        others = tuple(
            copy.deepcopy(a)
            for a in self.agents.values()
            if a.alive and a.position == agent.position and a.id != agent.id
        )
        return LocalView(
            degree=self.footprint.degree(agent.position),
            whiteboard=self.whiteboards[agent.position],
            others=others,
            moved=agent.moved,
            round_no=self.round_no,
        )

    def clone(self) -> "World":
        return copy.deepcopy(self)

    def state_key(self) -> tuple:
        """Hashable key of everything that influences future rounds"""
        agents = tuple(dataclasses.astuple(a) for a in self.agents.values())
        return (self.round_no % 2, agents, tuple(self.whiteboards), self.adversary.state_key())

    def header(self) -> dict:
        fp = self.footprint
        edges = [
            [e.u, e.v, fp.port_towards(e.u, e.v), fp.port_towards(e.v, e.u)]
            for e in fp.edges
        ]
        return {
            "schema": SCHEMA_VERSION,
            "kind": "header",
            "model": "dynamic",
            "graph": fp.name,
            "n": fp.node_count,
            "m": fp.edge_count,
            "edges": edges,
            "black_hole": self.black_hole,
            "delta_bh": self.delta_bh,
            "agents": sorted(self.agents),
            "algorithm": self.algorithm.name,
            "adversary": self.adversary.name,
        }

    def emit(self, agent: int, kind: EventKind, at: NodeId, detail: str = ""):
        self.events.append(TraceEvent(self.round_no, None, agent, kind, at, detail))


def step(world: World) -> World:
    """Advance the world by one synchronous round"""
    from .adversary import AdversaryView, decide

    fp = world.footprint
    r = world.round_no
    first_event = len(world.events)
    actors = world.actors

    # Look + Compute against start-of-round state
    actions: Dict[int, Action] = {}
    for agent in actors:
        view = world.view_for(agent)
        actions[agent.id] = world.algorithm.compute(copy.deepcopy(agent), view, r)

    for aid, action in actions.items():
        degree = fp.degree(world.agents[aid].position)
        for label, port in (("move", action.move), ("declare", action.declare)):
            if port is not None and not 0 <= port < degree:
                world.violation = f"agent {aid} chose {label} port {port} at a node of degree {degree}"
                logger.warning("round %d: %s", r, world.violation)
                world.round_no += 1
                return world

    intents = tuple(
        (aid, world.agents[aid].position, action.move)
        for aid, action in actions.items()
        if action.move is not None
    )
    view = AdversaryView(
        round_no=r,
        footprint=fp,
        agents=tuple(copy.deepcopy(a) for a in world.agents.values()),
        whiteboards=tuple(world.whiteboards),
        intents=intents,
    )
    decision = decide(world.adversary, view)
    world.missing = decision.missing
    if decision.missing is not None:
        world.script[r] = decision.missing

    # Whiteboard arbitration per node
    requests: Dict[NodeId, List[Tuple[int, WbOp]]] = {}
    for aid, action in actions.items():
        for op in action.ops:
            requests.setdefault(world.agents[aid].position, []).append((aid, op))
    for node, node_requests in sorted(requests.items()):
        try:
            world.whiteboards[node] = resolve_wb_writes(world.whiteboards[node], node_requests)
        except WhiteboardConflict as e:
            world.violation = f"node {node}: {e}"
            logger.warning("round %d: %s", r, world.violation)
            world.round_no += 1
            return world
        for aid, op in node_requests:
            kind = EventKind.ERASED_WB if op.kind == WbOpKind.ERASE_MARK else EventKind.WROTE_WB
            world.emit(aid, kind, node, board_detail(op))
        world.max_wb_occupancy = max(world.max_wb_occupancy, world.whiteboards[node].occupancy)

    # Commit agent memory; engine-owned fields survive
    for aid, action in actions.items():
        old = world.agents[aid]
        new = action.agent
        new.id, new.position, new.alive, new.pin = old.id, old.position, old.alive, old.pin
        if new.icm.phase == IcmPhase.MARKED_AND_MOVING and old.icm.phase != IcmPhase.MARKED_AND_MOVING:
            new.icm = dataclasses.replace(new.icm, origin=old.position)
        new.moved = None
        world.agents[aid] = new
        for kind, detail in action.notes:
            world.emit(aid, kind, old.position, detail)
            if kind == EventKind.GROUP_FORMED:
                world.group_formed = True
                logger.info("round %d: group formed at node %d (%s)", r, old.position, detail)

    # Simultaneous moves
    starts = {aid: world.agents[aid].position for aid in actions}
    blocked_any = False
    for aid, action in actions.items():
        if action.move is None:
            continue
        agent = world.agents[aid]
        origin = agent.position
        edge = fp.edge_via_port(origin, action.move)
        if world.missing is not None and edge == world.missing:
            agent.moved = False
            blocked_any = True
            world.emit(aid, EventKind.MOVE_BLOCKED, origin, f"port {action.move} edge {edge}")
            continue
        dest, entry = fp.neighbor_via_port(origin, action.move)
        agent.position, agent.pin, agent.moved = dest, entry, True
        world.moves[aid] += 1
        world.emit(aid, EventKind.MOVE_OK, origin, f"port {action.move} to {dest}")
        if dest == world.black_hole:
            agent.alive = False
            world.emit(aid, EventKind.DIED, dest)
            logger.debug("round %d: agent %d entered the black hole", r, aid)
    if blocked_any:
        world.blocked_rounds += 1

    for aid, action in actions.items():
        agent = world.agents[aid]
        if action.declare is not None and agent.alive:
            node = starts[aid]
            world.declarations.append(Detection(aid, node, action.declare))
            world.emit(aid, EventKind.DECLARED_BH, node, str(action.declare))
            logger.info("round %d: agent %d declares port %d at node %d", r, aid, action.declare, node)
        if action.terminate and agent.alive:
            agent.mode = AgentMode.TERMINATED
            world.emit(aid, EventKind.TERMINATED, agent.position)

    world.events[first_event:] = sorted(world.events[first_event:], key=lambda e: e.agent)
    world.round_no += 1
    return world


@dataclass
class SimResult:
    outcome: SimOutcome
    trace: Trace
    world: World


def evaluate(world: World, horizon_reached: bool) -> SimOutcome:
    """Compare declarations with ground truth and build the outcome"""
    fp = world.footprint
    verdict, violation = Verdict.SOLVED, world.violation
    if violation is not None:
        verdict = Verdict.VIOLATION
    elif world.declarations:
        for d in world.declarations:
            target, _ = fp.neighbor_via_port(d.node, d.port)
            if target != world.black_hole:
                verdict = Verdict.VIOLATION
                violation = f"false declaration by agent {d.declarer}: node {d.node} port {d.port}"
                break
    elif horizon_reached:
        verdict = Verdict.UNSOLVED_HORIZON
    elif not world.alive_agents:
        verdict, violation = Verdict.VIOLATION, "all agents died without a declaration"
    else:
        verdict, violation = Verdict.VIOLATION, "all agents terminated without a declaration"
    return SimOutcome(
        detected=list(world.declarations),
        deaths=len(world.deaths),
        dead_ids=world.deaths,
        rounds_elapsed=world.round_no,
        blocked_rounds=world.blocked_rounds,
        verdict=verdict,
        violation=violation,
        group_formed=world.group_formed,
        max_wb_occupancy=world.max_wb_occupancy,
        moves=dict(world.moves),
    )


def default_horizon(fp: Footprint, black_hole: NodeId, slack: int = 200) -> int:
    m = fp.edge_count
    return 4 * 152 * m * fp.degree(black_hole) + slack * m * m


def default_agent_count(fp: Footprint, black_hole: NodeId) -> int:
    return 2 * fp.degree(black_hole) + 17


def build_world(
    fp: Footprint,
    black_hole: NodeId,
    placement: Dict[int, NodeId],
    algorithm: Algorithm,
    adversary: "AdversaryStrategy",
) -> World:
    validate_placement(fp, black_hole, placement)
    agents = [AgentState(id=aid, position=node) for aid, node in placement.items()]
    return World(fp, black_hole, agents, algorithm, adversary)


def run(
    fp: Footprint,
    black_hole: NodeId,
    placement: Dict[int, NodeId],
    algorithm: Algorithm,
    adversary: "AdversaryStrategy",
    horizon: Optional[int] = None,
    horizon_slack: int = 200,
) -> SimResult:
    """
    Run one dynamic-graph simulation to a declaration, all-dead, or horizon.

    Args:
        fp: Footprint
        black_hole: Black hole node, present from round 0
        placement: Agent id -> start node (safe nodes only)
        algorithm: Algorithm instance
        adversary: Adversary strategy
        horizon: Round limit (defaults to the dynamic horizon)
        horizon_slack: Constant C of the default horizon
    """
    world = build_world(fp, black_hole, placement, algorithm, adversary)
    limit = horizon if horizon is not None else default_horizon(fp, black_hole, horizon_slack)
    header = world.header()
    while not world.finished and world.round_no < limit:
        step(world)
    outcome = evaluate(world, horizon_reached=not world.finished)
    logger.info(
        "%s on %s: %s after %d rounds, %d deaths",
        algorithm.name, fp.name, outcome.verdict.value, outcome.rounds_elapsed, outcome.deaths,
    )
    return SimResult(outcome=outcome, trace=Trace(header, list(world.events)), world=world)


def validate_placement(fp: Footprint, black_hole: NodeId, placement: Dict[int, NodeId]):
    if fp.node_count < 2:
        raise ConfigurationError("a black hole search needs at least two nodes")
    if not 0 <= black_hole < fp.node_count:
        raise ConfigurationError(f"black hole {black_hole} is not a node")
    if not placement:
        raise ConfigurationError("no agents placed")
    for aid, node in placement.items():
        if aid <= 0:
            raise ConfigurationError(f"agent ids must be positive, got {aid}")
        if not 0 <= node < fp.node_count:
            raise ConfigurationError(f"agent {aid} placed on unknown node {node}")
        if node == black_hole:
            raise ConfigurationError(f"agent {aid} placed on the black hole")


def draw_ids(count: int, n: int, seed: int, exponent: int = 2) -> List[int]:
    """Distinct ids from [1, max(n^c, 4*count)]"""
    upper = max(n ** exponent, 4 * count)
    return sorted(random.Random(seed).sample(range(1, upper + 1), count))


def scatter_placement(
    fp: Footprint, black_hole: NodeId, count: int, seed: int, exponent: int = 2
) -> Dict[int, NodeId]:
    """Place `count` agents on random safe nodes"""
    rng = random.Random(seed * 7919 + 1)
    safe = [v for v in range(fp.node_count) if v != black_hole]
    ids = draw_ids(count, fp.node_count, seed, exponent)
    rng.shuffle(ids)
    return {aid: rng.choice(safe) for aid in ids}


def rooted_placement(
    fp: Footprint, node: NodeId, count: int, seed: int = 1, exponent: int = 2
) -> Dict[int, NodeId]:
    return {aid: node for aid in draw_ids(count, fp.node_count, seed, exponent)}


def read_placement_file(path: Union[str, Path]) -> Dict[int, NodeId]:
    """Parse `node_id agent_id` lines"""
    placement: Dict[int, NodeId] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        try:
            node, aid = (int(x) for x in line.split())
        except ValueError as e:
            raise ConfigurationError(f"bad placement line {line!r}") from e
        if aid in placement:
            raise ConfigurationError(f"agent {aid} placed twice")
        placement[aid] = node
    return placement
