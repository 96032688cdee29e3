"""
Rooted Group Search - Nine co-located agents exploring with cautious walks

Once nine agents stand together they act as one group: triple T1 (leader,
first helper, second helper) tests every edge with a cautious walk while
triples T2 and T3 travel with the leader. The group runs a whiteboard DFS of
the footprint. An edge found missing while the first helper scouts it is
skipped for the current pass; passes repeat until the black hole is found.

Every co-located member evaluates the same plan from the leader's public
memory, so the group acts consistently without messages. Only the leader
writes whiteboards.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from .graph import Port
from .runtime import (
    Action,
    AgentMode,
    AgentState,
    Algorithm,
    EventKind,
    ExploreState,
    LocalView,
    TravelInfo,
    WbOp,
    WbOpKind,
    Whiteboard,
)

logger = logging.getLogger(__name__)

GROUP_SIZE = 9

# scattered travel entries always carry pass 0
FIRST_GROUP_PASS = 1


class WalkPhase(Enum):
    """Where the group stands in its current edge test or relocation"""
    DECIDE = "decide"
    SCOUT = "scout"
    CONFIRM = "confirm"
    COMMIT = "commit"
    RELOCATE = "relocate"


@dataclass(frozen=True)
class GroupMemory:
    """Group bookkeeping carried by every member; the leader's copy is authoritative"""
    grp_id: int
    roster: Tuple[int, ...]
    phase: WalkPhase = WalkPhase.DECIDE
    port: Port = -1
    entry: Port = -1
    state: ExploreState = ExploreState.EXPLORE
    pass_no: int = FIRST_GROUP_PASS
    proxy: Optional[int] = None

    @property
    def leader(self) -> int:
        return self.roster[0]

    @property
    def first_helper(self) -> int:
        return self.roster[1]

    @property
    def second_helper(self) -> int:
        return self.roster[2]

    @property
    def triples(self) -> List[Tuple[int, ...]]:
        return [self.roster[i:i + 3] for i in range(0, len(self.roster), 3)]


@dataclass
class GroupPlan:
    memory: GroupMemory
    moves: Dict[int, Port] = field(default_factory=dict)
    ops: List[WbOp] = field(default_factory=list)
    declare: Optional[Port] = None
    terminate: bool = False


@dataclass(frozen=True)
class DfsDecision:
    kind: str
    port: Port = -1
    parent: Port = -1


def group_dfs_next(memory: GroupMemory, travel: Optional[TravelInfo], degree: int) -> DfsDecision:
    """
    Next step of the group's whiteboard DFS at the current node.

    Only an entry with the group's id and current pass counts as visited.
    Without an entry port there is nothing to bounce back through, so such a
    node is explored as if fresh.
    """
    mine = travel is not None and travel.owner == memory.grp_id and travel.pass_no == memory.pass_no
    if mine and memory.state == ExploreState.EXPLORE and memory.entry < 0:
        mine = False
    if not mine:
        parent = memory.entry
        for p in range(degree):
            if p != parent:
                return DfsDecision("explore", p, parent)
        if parent != -1:
            return DfsDecision("backtrack", parent, parent)
        return DfsDecision("finished")
    if memory.state == ExploreState.EXPLORE:
        return DfsDecision("bounce", memory.entry, travel.parent)
    parent = travel.parent
    if travel.recent != parent:
        for p in range(travel.recent + 1, degree):
            if p != parent:
                return DfsDecision("explore", p, parent)
    if parent != -1:
        return DfsDecision("backtrack", parent, parent)
    return DfsDecision("finished")


def cautious_walk_step(memory: GroupMemory, present: Set[int]) -> GroupPlan:
    """
    Advance the edge test of triple T1 across memory.port.

    SCOUT: the first helper crossed last round. Still here means the edge
    was missing and the port is skipped. CONFIRM: the second helper crossed
    while the first returned; only the second helper missing means the edge
    is safe, both missing means the port leads to the black hole. A second
    helper still here found the edge missing too: the port is skipped unless
    our own first helper is stranded on the far side, in which case both
    retry the crossing.
    When a scattered agent's mark already named the port, its owner stands
    in for the first helper.
    """
    h1 = memory.proxy if memory.proxy is not None else memory.first_helper
    h2 = memory.second_helper
    skip = dataclasses.replace(memory, phase=WalkPhase.DECIDE, state=ExploreState.BACKTRACK, proxy=None)
    if memory.phase == WalkPhase.SCOUT:
        if h1 in present:
            return GroupPlan(skip)
        return GroupPlan(
            dataclasses.replace(memory, phase=WalkPhase.CONFIRM),
            moves={h2: memory.port},
        )
    h1_here, h2_here = h1 in present, h2 in present
    if not h1_here and not h2_here:
        return GroupPlan(memory, declare=memory.port)
    if h1_here and not h2_here:
        movers = [aid for aid in memory.roster if aid != h2]
        return GroupPlan(
            dataclasses.replace(memory, phase=WalkPhase.COMMIT, proxy=None),
            moves={aid: memory.port for aid in movers},
        )
    if h1_here or memory.proxy is not None:
        return GroupPlan(skip)
    return GroupPlan(memory, moves={h2: memory.port})


def group_plan(
    leader: AgentState,
    present: Set[int],
    board: Whiteboard,
    degree: int,
    smaller_group_here: bool = False,
) -> GroupPlan:
    """
    The round's plan for the group whose leader is `leader`, as seen at its node.

    The group stops when the node carries a smaller group stamp or a member
    of a smaller group stands here.
    """
    memory: GroupMemory = leader.group
    if smaller_group_here or (board.grp_id is not None and board.grp_id < memory.grp_id):
        return GroupPlan(memory, terminate=True)

    if memory.phase in (WalkPhase.SCOUT, WalkPhase.CONFIRM):
        plan = cautious_walk_step(memory, present)
        if plan.memory.phase != WalkPhase.DECIDE:
            return plan
        memory = plan.memory
    elif memory.phase in (WalkPhase.COMMIT, WalkPhase.RELOCATE):
        if not leader.success:
            return GroupPlan(memory, moves=_all_members(memory, memory.port, present))
        state = ExploreState.EXPLORE if memory.phase == WalkPhase.COMMIT else ExploreState.BACKTRACK
        memory = dataclasses.replace(memory, phase=WalkPhase.DECIDE, entry=leader.pin, state=state)

    ops: List[WbOp] = []
    if board.grp_id is None or board.grp_id > memory.grp_id:
        ops.append(WbOp(WbOpKind.STAMP_GROUP, grp_id=memory.grp_id))
    decision = group_dfs_next(memory, board.travel, degree)
    if decision.kind == "finished":
        memory = dataclasses.replace(memory, pass_no=memory.pass_no + 1, entry=-1, state=ExploreState.EXPLORE)
        decision = group_dfs_next(memory, board.travel, degree)

    if decision.kind == "explore":
        absent = [m.owner for _, m in board.marks if m.port == decision.port and m.owner not in present]
        if len(absent) == 2:
            return GroupPlan(memory, ops=ops, declare=decision.port)
        ops.append(WbOp(
            WbOpKind.WRITE_TRAVEL,
            travel=TravelInfo(memory.grp_id, decision.parent, decision.port, memory.pass_no),
        ))
        if absent:
            memory = dataclasses.replace(
                memory, phase=WalkPhase.CONFIRM, port=decision.port,
                state=ExploreState.EXPLORE, proxy=absent[0],
            )
            return GroupPlan(memory, moves={memory.second_helper: decision.port}, ops=ops)
        memory = dataclasses.replace(memory, phase=WalkPhase.SCOUT, port=decision.port, state=ExploreState.EXPLORE)
        return GroupPlan(memory, moves={memory.first_helper: decision.port}, ops=ops)
    if decision.kind == "backtrack":
        ops.append(WbOp(
            WbOpKind.WRITE_TRAVEL,
            travel=TravelInfo(memory.grp_id, decision.parent, decision.parent, memory.pass_no),
        ))
    if decision.kind in ("backtrack", "bounce") and decision.port >= 0:
        memory = dataclasses.replace(memory, phase=WalkPhase.RELOCATE, port=decision.port)
        return GroupPlan(memory, moves=_all_members(memory, decision.port, present), ops=ops)
    # nothing to explore, or nowhere to go back to
    return GroupPlan(memory, ops=ops)


def _all_members(memory: GroupMemory, port: Port, present: Set[int]) -> Dict[int, Port]:
    return {aid: port for aid in memory.roster if aid in present}


def form_group(agent: AgentState, members: List[int]) -> Action:
    """Turn `agent` into a member of the group `members`; the leader stamps the node"""
    roster = tuple(sorted(members))
    agent.grp = True
    agent.grp_id = roster[0]
    agent.mode = AgentMode.GROUP_MEMBER
    agent.leader = roster[0]
    agent.group = GroupMemory(grp_id=roster[0], roster=roster)
    action = Action(agent)
    if agent.id == roster[0]:
        action.ops.append(WbOp(WbOpKind.STAMP_GROUP, grp_id=roster[0]))
        action.notes.append((EventKind.GROUP_FORMED, f"grp_id={roster[0]} roster={','.join(map(str, roster))}"))
    return action


def compute_member(agent: AgentState, view: LocalView, round_no: int) -> Action:
    """Decision of one group member"""
    if round_no % 2 == 1:
        if view.moved is not None:
            agent.success = view.moved
        return Action(agent)

    memory: GroupMemory = agent.group
    board = view.whiteboard
    present = {agent.id} | {o.id for o in view.others}
    smaller = any(
        o.alive and o.grp and o.grp_id is not None and o.grp_id < memory.grp_id
        for o in view.others
    )

    if agent.id == memory.leader:
        plan = group_plan(agent, present, board, view.degree, smaller)
        agent.group = plan.memory
        if agent.id in plan.moves:
            agent.pout = plan.moves[agent.id]
        return Action(
            agent,
            ops=plan.ops,
            move=plan.moves.get(agent.id),
            declare=plan.declare,
            terminate=plan.terminate,
        )

    leader = view.other(memory.leader)
    if leader is None:
        if agent.id == memory.first_helper and agent.pin >= 0:
            return Action(agent, move=agent.pin)
        return Action(agent)
    if leader.mode == AgentMode.TERMINATED:
        return Action(agent, terminate=True)
    plan = group_plan(leader, present, board, view.degree, smaller)
    if plan.terminate:
        return Action(agent, terminate=True)
    return Action(agent, move=plan.moves.get(agent.id))


class RootedBhs(Algorithm):
    """
    Rooted search: all agents start at one node and the nine smallest form a group
    in the first round. Extra agents terminate once the node is stamped.
    """

    name = "rooted"

    def compute(self, agent: AgentState, view: LocalView, round_no: int) -> Action:
        if agent.grp:
            return compute_member(agent, view, round_no)
        if round_no % 2 == 1:
            return Action(agent)
        if view.whiteboard.grp or any(o.grp for o in view.others):
            return Action(agent, terminate=True)
        candidates = [agent.id] + [o.id for o in view.others if o.active and not o.grp]
        if len(candidates) < GROUP_SIZE:
            return Action(agent)
        members = sorted(candidates)[:GROUP_SIZE]
        if agent.id in members:
            return form_group(agent, members)
        return Action(agent)
