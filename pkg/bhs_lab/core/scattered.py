"""
Scattered Search - Black hole search from a scattered start on a dynamic graph

Agents move only in even rounds. Each explore step is an individual cautious
move (ICM): write a marked port, cross, verify, come back, delete the mark and
cross again. A dead agent's mark stays forever, so two surviving marks naming
the same port at a node show that the port leads to the black hole.

Among the agents that completed their ICM at a node, the smallest id explores
on its own DFS while larger ids follow smaller ones. Nine such agents at one
node form a group and hand over to the rooted search.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Optional

from .graph import Port
from .rooted import GROUP_SIZE, DfsDecision, compute_member, form_group
from .runtime import (
    Action,
    AgentMode,
    AgentState,
    Algorithm,
    EventKind,
    ExploreState,
    IcmPhase,
    IcmState,
    LocalView,
    MarkedPort,
    PendingMove,
    TravelInfo,
    WbOp,
    WbOpKind,
    Whiteboard,
)

logger = logging.getLogger(__name__)


def _eligible(agent: AgentState) -> bool:
    return agent.alive and not agent.grp and agent.mode != AgentMode.TERMINATED


@dataclass
class NodeContext:
    """Arbitration facts derived from one Look view"""
    agent: AgentState
    view: LocalView
    complete: List[AgentState] = field(default_factory=list)
    returning: List[AgentState] = field(default_factory=list)

    def __post_init__(self):
        peers = [o for o in self.view.others if _eligible(o)]
        self.complete = [self.agent] + [o for o in peers if o.icm.complete]
        self.returning = [
            o for o in peers
            if o.icm.phase in (IcmPhase.VERIFY_ALIVE, IcmPhase.RETURNING)
        ]

    @property
    def board(self) -> Whiteboard:
        return self.view.whiteboard

    @property
    def min_complete(self) -> int:
        return min(a.id for a in self.complete)

    @property
    def is_min(self) -> bool:
        return self.agent.id == self.min_complete

    def owner_present(self, mark: MarkedPort) -> Optional[AgentState]:
        """Mark owner back at the node; it deletes its mark this round"""
        owner = self.view.other(mark.owner)
        if owner is not None and owner.alive and owner.icm.phase == IcmPhase.DELETING:
            return owner
        return None

    def free_slot(self) -> Optional[int]:
        """Slot a new mark may use this round, after this round's erasures"""
        free = {
            slot for slot, mark in ((1, self.board.marked1), (2, self.board.marked2))
            if mark is None or self.owner_present(mark) is not None
        }
        if 1 in free:
            return 1
        if 2 in free:
            return 2
        return None

    def travel_leader(self) -> Optional[TravelInfo]:
        """Travel entry of a smaller agent whose recent port is already verified"""
        travel = self.board.travel
        if travel is None or travel.owner >= self.min_complete:
            return None
        for _, mark in self.board.marks:
            if mark.owner == travel.owner and self.owner_present(mark) is None:
                return None
        return travel


def detect(view: LocalView) -> Optional[Port]:
    """Port named by both marks when neither owner is at the node"""
    board = view.whiteboard
    if board.marked1 is None or board.marked2 is None:
        return None
    if board.marked1.port != board.marked2.port:
        return None
    if view.other(board.marked1.owner) is not None or view.other(board.marked2.owner) is not None:
        return None
    return board.marked1.port


def dfs_next(agent: AgentState, view: LocalView) -> DfsDecision:
    """
    Next step of the agent's own whiteboard DFS.

    Ports are tried in ascending order. A node whose travel entry belongs to
    someone else counts as unvisited; arriving in explore state at a node
    already carrying our entry means a non-tree edge, so we bounce back.
    """
    travel = view.whiteboard.travel
    degree = view.degree
    if travel is None or travel.owner != agent.id:
        parent = agent.pin
        for p in range(degree):
            if p != parent:
                return DfsDecision("explore", p, parent)
        if parent != -1:
            return DfsDecision("backtrack", parent, parent)
        return DfsDecision("finished")
    if agent.state == ExploreState.EXPLORE:
        return DfsDecision("bounce", agent.pin, travel.parent)
    parent = travel.parent
    if travel.recent != parent:
        for p in range(travel.recent + 1, degree):
            if p != parent:
                return DfsDecision("explore", p, parent)
    if parent != -1:
        return DfsDecision("backtrack", parent, parent)
    return DfsDecision("finished")


def icm_advance(
    agent: AgentState,
    view: LocalView,
    desired_port: Optional[Port] = None,
    slot: int = 1,
    travel: Optional[TravelInfo] = None,
) -> Action:
    """
    Drive the cautious-move phase machine by one round.

    From idle with a desired port: write the mark (and travel entry) and
    cross. Odd rounds settle the last crossing; even rounds return, delete
    and cross again.
    """
    icm = agent.icm
    if icm.phase == IcmPhase.IDLE:
        mark = MarkedPort(desired_port, agent.id)
        ops = [WbOp(WbOpKind.WRITE_MARK, slot=slot, mark=mark)]
        if travel is not None:
            ops.append(WbOp(WbOpKind.WRITE_TRAVEL, travel=travel))
        agent.icm = IcmState(IcmPhase.MARKED_AND_MOVING, desired_port, slot)
        agent.pout = desired_port
        agent.pending = PendingMove.ICM
        return Action(agent, ops=ops, move=desired_port)

    if view.round_no % 2 == 1:
        moved = view.moved
        if icm.phase == IcmPhase.MARKED_AND_MOVING:
            if moved:
                agent.icm = dataclasses.replace(icm, phase=IcmPhase.VERIFY_ALIVE)
                return Action(agent)
            erase = WbOp(WbOpKind.ERASE_MARK, slot=icm.slot, mark=MarkedPort(icm.target_port, agent.id))
            agent.icm = IcmState()
            return Action(agent, ops=[erase])
        if icm.phase == IcmPhase.RETURNING and moved:
            agent.icm = dataclasses.replace(icm, phase=IcmPhase.DELETING)
        elif icm.phase == IcmPhase.FINAL_MOVE and moved:
            agent.icm = IcmState()
            agent.pending = PendingMove.NONE
        return Action(agent)

    if icm.phase in (IcmPhase.VERIFY_ALIVE, IcmPhase.RETURNING):
        agent.icm = dataclasses.replace(icm, phase=IcmPhase.RETURNING)
        return Action(agent, move=agent.pin)
    if icm.phase == IcmPhase.DELETING:
        erase = WbOp(WbOpKind.ERASE_MARK, slot=icm.slot, mark=MarkedPort(icm.target_port, agent.id))
        agent.icm = dataclasses.replace(icm, phase=IcmPhase.FINAL_MOVE)
        return Action(agent, ops=[erase], move=icm.target_port)
    if icm.phase == IcmPhase.FINAL_MOVE:
        return Action(agent, move=icm.target_port)
    return Action(agent)


class ScatteredBhs(Algorithm):
    """Scattered black hole search with hand-off to the rooted group search"""

    name = "scattered"

    def compute(self, agent: AgentState, view: LocalView, round_no: int) -> Action:
        if agent.grp:
            return compute_member(agent, view, round_no)
        if round_no % 2 == 1:
            return self.compute_odd(agent, view)
        return self.compute_even(agent, view)

    def compute_odd(self, agent: AgentState, view: LocalView) -> Action:
        if view.moved is not None:
            agent.success = view.moved
        if not agent.icm.complete:
            return icm_advance(agent, view)
        if view.moved:
            agent.pending = PendingMove.NONE
        return Action(agent)

    def compute_even(self, agent: AgentState, view: LocalView) -> Action:
        if not agent.icm.complete:
            return icm_advance(agent, view)

        board = view.whiteboard
        if board.grp or any(o.alive and o.grp for o in view.others):
            return Action(agent, terminate=True)

        ctx = NodeContext(agent, view)
        if len(ctx.complete) >= GROUP_SIZE:
            members = sorted(a.id for a in ctx.complete)[:GROUP_SIZE]
            if agent.id in members:
                return form_group(agent, members)
            return Action(agent)
        if len(ctx.complete) + len(ctx.returning) >= GROUP_SIZE:
            # hold until the agents still returning complete their moves
            return Action(agent)

        if not agent.success and agent.pending != PendingMove.NONE:
            return self._blocked(ctx)
        marks = board.marks
        if not marks:
            return self._no_marks(ctx)
        if len(marks) == 1:
            return self._one_mark(ctx, marks[0][1])
        return self._two_marks(ctx)

    # Cases

    def _no_marks(self, ctx: NodeContext) -> Action:
        leader = ctx.travel_leader()
        if leader is not None:
            return self._follow_travel(ctx, leader)
        if ctx.is_min:
            return self._own_dfs(ctx)
        return Action(ctx.agent)

    def _one_mark(self, ctx: NodeContext, mark: MarkedPort) -> Action:
        agent = ctx.agent
        owner = ctx.owner_present(mark)
        if owner is not None:
            if agent.state == ExploreState.EXPLORE:
                travel = ctx.board.travel
                if owner.id < ctx.min_complete and (travel is None or owner.id <= travel.owner):
                    return self._move_along(ctx, owner)
                leader = ctx.travel_leader()
                if leader is not None:
                    return self._follow_travel(ctx, leader)
            if ctx.is_min:
                return self._own_dfs(ctx)
            return Action(agent)
        if ctx.is_min and agent.id < mark.owner:
            return self._own_dfs(ctx)
        if ctx.is_min:
            return self._follow_mark(ctx, mark)
        return Action(agent)

    def _two_marks(self, ctx: NodeContext) -> Action:
        agent = ctx.agent
        board = ctx.board
        first, second = board.marked1, board.marked2
        present = [o for o in (ctx.owner_present(first), ctx.owner_present(second)) if o is not None]
        if not present:
            port = detect(ctx.view)
            if port is not None:
                return Action(agent, declare=port)
            return Action(agent)
        if agent.state == ExploreState.EXPLORE and len(present) == 2:
            return self._no_marks(ctx)

        travel = board.travel
        joinable = [
            o for o in present
            if o.id < ctx.min_complete and (travel is None or o.id <= travel.owner)
        ]
        if joinable:
            return self._move_along(ctx, min(joinable, key=lambda o: o.id))
        if len(present) == 1:
            absent = second if present[0].id == first.owner else first
            if absent.owner < present[0].id and absent.owner < ctx.min_complete:
                if ctx.is_min:
                    return self._follow_mark(ctx, absent)
                return Action(agent)
        if ctx.is_min:
            return self._own_dfs(ctx)
        return Action(agent)

    def _blocked(self, ctx: NodeContext) -> Action:
        """Retry a move that found its edge missing, unless a smaller arrival takes over"""
        agent = ctx.agent
        movers = [o for o in ctx.complete if o.id != agent.id and o.success]
        if agent.state == ExploreState.EXPLORE:
            allowed = not movers or ctx.is_min
        else:
            allowed = not any(o.id < agent.id for o in movers)
        if not allowed:
            return Action(agent)
        if agent.pending == PendingMove.ICM:
            slot = ctx.free_slot()
            if not ctx.is_min or slot is None:
                return Action(agent)
            return icm_advance(agent, ctx.view, agent.pout, slot)
        agent.pending = PendingMove.PLAIN
        return Action(agent, move=agent.pout)

    # Moves

    def _own_dfs(self, ctx: NodeContext) -> Action:
        agent = ctx.agent
        leader = ctx.travel_leader()
        if leader is not None:
            return self._follow_travel(ctx, leader)
        decision = dfs_next(agent, ctx.view)
        agent.mode, agent.leader = AgentMode.OWN_DFS, None
        if decision.kind == "explore":
            slot = ctx.free_slot()
            if slot is None:
                return Action(agent)
            agent.state = ExploreState.EXPLORE
            travel = TravelInfo(agent.id, decision.parent, decision.port)
            return icm_advance(agent, ctx.view, decision.port, slot, travel)
        if decision.kind == "backtrack":
            agent.state = ExploreState.BACKTRACK
            action = self._plain_move(agent, decision.port)
            action.ops.append(WbOp(
                WbOpKind.WRITE_TRAVEL,
                travel=TravelInfo(agent.id, decision.parent, decision.parent),
            ))
            return action
        if decision.kind == "bounce":
            agent.state = ExploreState.BACKTRACK
            return self._plain_move(agent, decision.port)
        return Action(agent)

    def _follow_travel(self, ctx: NodeContext, travel: TravelInfo) -> Action:
        agent = ctx.agent
        agent.mode, agent.leader = AgentMode.FOLLOWER, travel.owner
        action = self._plain_move(agent, travel.recent)
        action.notes.append((EventKind.FOLLOWED, f"leader={travel.owner}"))
        return action

    def _move_along(self, ctx: NodeContext, owner: AgentState) -> Action:
        agent = ctx.agent
        agent.mode, agent.leader = AgentMode.FOLLOWER, owner.id
        action = self._plain_move(agent, owner.icm.target_port)
        action.notes.append((EventKind.FOLLOWED, f"leader={owner.id}"))
        return action

    def _follow_mark(self, ctx: NodeContext, mark: MarkedPort) -> Action:
        agent = ctx.agent
        slot = ctx.free_slot()
        if slot is None:
            return Action(agent)
        agent.mode, agent.leader = AgentMode.FOLLOWER, mark.owner
        action = icm_advance(agent, ctx.view, mark.port, slot)
        action.notes.append((EventKind.FOLLOWED, f"leader={mark.owner}"))
        return action

    @staticmethod
    def _plain_move(agent: AgentState, port: Port) -> Action:
        agent.pout = port
        agent.pending = PendingMove.PLAIN
        return Action(agent, move=port)
