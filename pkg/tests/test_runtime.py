import pytest
from hypothesis import settings, strategies as st
from hypothesis.stateful import RuleBasedStateMachine, initialize, invariant, rule

from bhs_lab.core.adversary import ForcedAdversary, NoAdversary, enumerate_decisions, parse_adversary
from bhs_lab.core.graph import generate
from bhs_lab.core.runtime import (
    Action,
    Algorithm,
    ConfigurationError,
    EventKind,
    MarkedPort,
    TravelInfo,
    Verdict,
    WbOp,
    WbOpKind,
    Whiteboard,
    WhiteboardConflict,
    build_world,
    default_agent_count,
    default_horizon,
    draw_ids,
    read_placement_file,
    resolve_wb_writes,
    rooted_placement,
    run,
    scatter_placement,
    step,
)
from bhs_lab.core.scattered import ScatteredBhs
from bhs_lab.core.trace_writer import trace_lines


def _travel(owner):
    return WbOp(WbOpKind.WRITE_TRAVEL, travel=TravelInfo(owner, -1, 0))


def _mark(slot, port, owner):
    return WbOp(WbOpKind.WRITE_MARK, slot=slot, mark=MarkedPort(port, owner))


class TestWhiteboardArbitration:
    def test_single_writes_apply(self):
        board = resolve_wb_writes(Whiteboard(), [(1, _travel(1)), (1, _mark(1, 0, 1))])
        assert board.travel.owner == 1
        assert board.marked1 == MarkedPort(0, 1)
        assert board.occupancy == 2

    def test_two_travel_writes_conflict(self):
        with pytest.raises(WhiteboardConflict, match="agents 1, 2"):
            resolve_wb_writes(Whiteboard(), [(1, _travel(1)), (2, _travel(2))])

    def test_marked2_needs_marked1(self):
        with pytest.raises(WhiteboardConflict, match="marked1 is empty"):
            resolve_wb_writes(Whiteboard(), [(4, _mark(2, 0, 4))])

    def test_erase_then_write_in_one_round(self):
        board = Whiteboard(marked1=MarkedPort(0, 3))
        erase = WbOp(WbOpKind.ERASE_MARK, slot=1, mark=MarkedPort(0, 3))
        board = resolve_wb_writes(board, [(5, _mark(1, 1, 5)), (3, erase)])
        assert board.marked1 == MarkedPort(1, 5)

    def test_only_the_owner_erases(self):
        board = Whiteboard(marked1=MarkedPort(0, 3))
        erase = WbOp(WbOpKind.ERASE_MARK, slot=1, mark=MarkedPort(0, 3))
        with pytest.raises(WhiteboardConflict, match="does not own"):
            resolve_wb_writes(board, [(4, erase)])

    def test_group_stamp(self):
        board = resolve_wb_writes(Whiteboard(), [(7, WbOp(WbOpKind.STAMP_GROUP, grp_id=7))])
        assert board.grp and board.grp_id == 7


class _Walker(Algorithm):
    """Every agent leaves through port 0 on even rounds"""

    name = "walker"

    def compute(self, agent, view, round_no):
        return Action(agent, move=0 if round_no % 2 == 0 else None)


class _BadPort(Algorithm):
    name = "bad-port"

    def compute(self, agent, view, round_no):
        return Action(agent, move=view.degree)


class TestEngine:
    def test_moves_are_simultaneous_and_pin_is_set(self, ring4):
        world = build_world(ring4, 3, {1: 0, 2: 1}, _Walker(), NoAdversary())
        step(world)
        assert world.agents[1].position == 1 and world.agents[1].pin == 1
        assert world.agents[2].position == 2
        assert world.agents[1].moved is True

    def test_missing_edge_blocks_the_move(self, ring4):
        world = build_world(ring4, 3, {1: 0, 2: 1}, _Walker(), parse_adversary("persistent:0,1", ring4))
        step(world)
        assert world.agents[1].position == 0
        assert world.agents[1].moved is False
        assert world.blocked_rounds == 1
        kinds = [e.kind for e in world.events]
        assert kinds == [EventKind.MOVE_BLOCKED, EventKind.MOVE_OK]

    def test_entering_the_black_hole_kills(self, ring4):
        world = build_world(ring4, 1, {1: 0}, _Walker(), NoAdversary())
        step(world)
        assert world.deaths == [1]
        assert world.finished

    def test_out_of_range_port_is_a_violation(self, ring4):
        result = run(ring4, 2, {1: 0}, _BadPort(), NoAdversary(), horizon=10)
        assert result.outcome.verdict == Verdict.VIOLATION
        assert "degree 2" in result.outcome.violation

    def test_horizon_without_declaration(self, ring4):
        class Idle(Algorithm):
            name = "idle"

            def compute(self, agent, view, round_no):
                return Action(agent)

        result = run(ring4, 2, {1: 0}, Idle(), NoAdversary(), horizon=6)
        assert result.outcome.verdict == Verdict.UNSOLVED_HORIZON
        assert result.outcome.rounds_elapsed == 6

    def test_header_describes_the_run(self, ring4):
        world = build_world(ring4, 2, {5: 0, 3: 1}, _Walker(), NoAdversary())
        header = world.header()
        assert header["kind"] == "header" and header["model"] == "dynamic"
        assert header["agents"] == [3, 5]
        assert header["delta_bh"] == 2
        assert header["edges"][0] == [0, 1, 0, 1]


class TestPlacement:
    def test_agents_never_start_on_the_black_hole(self, ring4):
        with pytest.raises(ConfigurationError, match="black hole"):
            build_world(ring4, 2, {1: 2}, _Walker(), NoAdversary())

    def test_ids_must_be_positive(self, ring4):
        with pytest.raises(ConfigurationError):
            build_world(ring4, 2, {0: 1}, _Walker(), NoAdversary())

    def test_scatter_placement_is_seeded(self, ring4):
        first = scatter_placement(ring4, 2, 21, seed=4)
        assert first == scatter_placement(ring4, 2, 21, seed=4)
        assert len(first) == 21
        assert 2 not in first.values()

    def test_draw_ids_are_distinct_and_bounded(self):
        ids = draw_ids(21, 5, seed=1)
        assert len(set(ids)) == 21
        assert ids == sorted(ids)
        assert max(ids) <= 84

    def test_rooted_placement_uses_one_node(self, ring4):
        assert set(rooted_placement(ring4, 0, 9).values()) == {0}

    def test_placement_file(self, tmp_path):
        target = tmp_path / "placement.txt"
        target.write_text("# node agent\n0 4\n1 9\n")
        assert read_placement_file(target) == {4: 0, 9: 1}
        target.write_text("0 4\n1 4\n")
        with pytest.raises(ConfigurationError, match="twice"):
            read_placement_file(target)

    def test_defaults(self, ring4):
        assert default_agent_count(ring4, 2) == 21
        assert default_horizon(ring4, 2, slack=10) == 4 * 152 * 4 * 2 + 10 * 16


def test_identical_runs_produce_identical_traces():
    fp = generate("ring:5")
    placement = scatter_placement(fp, 3, 21, seed=2)
    first = run(fp, 3, placement, ScatteredBhs(), parse_adversary("random:5", fp))
    second = run(fp, 3, placement, ScatteredBhs(), parse_adversary("random:5", fp))
    assert trace_lines(first.trace) == trace_lines(second.trace)
    assert first.outcome.to_dict() == second.outcome.to_dict()


class ScatteredRingMachine(RuleBasedStateMachine):
    """Drives the scattered search on ring 5 with arbitrary legal adversary choices"""

    @initialize(seed=st.integers(min_value=1, max_value=200))
    def setup(self, seed):
        self.fp = generate("ring:5")
        self.black_hole = 3
        self.decisions = enumerate_decisions(self.fp)
        placement = scatter_placement(self.fp, self.black_hole, 21, seed)
        self.world = build_world(self.fp, self.black_hole, placement, ScatteredBhs(), ForcedAdversary())

    @rule(choice=st.integers(min_value=0, max_value=5))
    def advance(self, choice):
        if self.world.finished:
            return
        if self.world.round_no % 2 == 0:
            self.world.adversary.next_missing = self.decisions[choice % len(self.decisions)].missing
        else:
            self.world.adversary.next_missing = None
        step(self.world)

    @invariant()
    def no_violation(self):
        assert self.world.violation is None

    @invariant()
    def deaths_bounded(self):
        assert len(self.world.deaths) <= 2 * self.fp.degree(self.black_hole)

    @invariant()
    def whiteboards_bounded(self):
        assert all(board.occupancy <= 3 for board in self.world.whiteboards)

    @invariant()
    def declarations_name_the_black_hole(self):
        for d in self.world.declarations:
            assert self.fp.neighbor_via_port(d.node, d.port)[0] == self.black_hole


ScatteredRingMachine.TestCase.settings = settings(max_examples=10, stateful_step_count=40, deadline=None)
TestScatteredRing = ScatteredRingMachine.TestCase
