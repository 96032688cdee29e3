import pytest

from bhs_lab.core.adversary import NoAdversary, parse_adversary
from bhs_lab.core.graph import generate
from bhs_lab.core.runtime import (
    AgentState,
    Detection,
    EventKind,
    IcmPhase,
    IcmState,
    LocalView,
    MarkedPort,
    Verdict,
    Whiteboard,
    default_agent_count,
    run,
    scatter_placement,
)
from bhs_lab.core.scattered import ScatteredBhs, detect


def _view(board, others=(), degree=2, moved=None, round_no=0):
    return LocalView(degree=degree, whiteboard=board, others=tuple(others), moved=moved, round_no=round_no)


class TestDetect:
    def test_two_marks_on_one_port_with_owners_gone(self):
        board = Whiteboard(marked1=MarkedPort(1, 4), marked2=MarkedPort(1, 9))
        assert detect(_view(board)) == 1

    def test_owner_still_here(self):
        board = Whiteboard(marked1=MarkedPort(1, 4), marked2=MarkedPort(1, 9))
        assert detect(_view(board, [AgentState(id=9, position=0)])) is None

    def test_marks_on_different_ports(self):
        board = Whiteboard(marked1=MarkedPort(0, 4), marked2=MarkedPort(1, 9))
        assert detect(_view(board)) is None

    def test_single_mark(self):
        assert detect(_view(Whiteboard(marked1=MarkedPort(0, 4)))) is None


def test_lone_agent_marks_and_crosses():
    agent = AgentState(id=3, position=0)
    action = ScatteredBhs().compute(agent, _view(Whiteboard(), degree=1), 0)
    assert action.move == 0
    kinds = sorted(op.kind.value for op in action.ops)
    assert kinds == ["write_mark", "write_travel"]
    assert action.agent.icm.phase == IcmPhase.MARKED_AND_MOVING


def test_incomplete_move_advances_on_odd_round():
    agent = AgentState(id=3, position=1, icm=IcmState(IcmPhase.MARKED_AND_MOVING, 0, 1, 0), pin=1)
    action = ScatteredBhs().compute(agent, _view(Whiteboard(), moved=True, round_no=1), 1)
    assert action.agent.icm.phase == IcmPhase.VERIFY_ALIVE
    assert action.move is None


def test_path_walkthrough():
    """Three agents on path3: two die marking the port, the third declares it"""
    fp = generate("path:3")
    result = run(fp, 2, {1: 0, 2: 0, 3: 0}, ScatteredBhs(), NoAdversary())
    outcome = result.outcome
    assert outcome.verdict == Verdict.SOLVED
    assert outcome.detected == [Detection(3, 1, 0)]
    assert outcome.dead_ids == [1, 2]
    assert outcome.rounds_elapsed == 11

    deaths = [(e.round, e.agent) for e in result.trace.events if e.kind == EventKind.DIED]
    assert deaths == [(6, 1), (8, 2)]
    assert all(e.round % 2 == 0 for e in result.trace.events if e.kind == EventKind.MOVE_OK)


def test_nine_colocated_agents_form_a_group():
    fp = generate("path:2")
    placement = {aid: 0 for aid in range(1, default_agent_count(fp, 1) + 1)}
    result = run(fp, 1, placement, ScatteredBhs(), NoAdversary())
    outcome = result.outcome
    assert outcome.group_formed
    assert outcome.verdict == Verdict.SOLVED
    assert outcome.detected == [Detection(1, 0, 0)]
    assert outcome.dead_ids == [2, 3]
    formed = [e for e in result.trace.events if e.kind == EventKind.GROUP_FORMED]
    assert formed[0].round == 0
    assert formed[0].detail == "grp_id=1 roster=1,2,3,4,5,6,7,8,9"
    terminated = {e.agent for e in result.trace.events if e.kind == EventKind.TERMINATED}
    assert terminated == set(range(10, 20))


@pytest.mark.parametrize(
    "spec, black_hole, adversary",
    [
        ("ring:5", 3, "none"),
        ("ring:5", 3, "random:3"),
        ("ring:4", 2, "block-smallest"),
        ("ring:6", 2, "persistent:4,5"),
        ("star:3", 1, "none"),
    ],
)
def test_scattered_search_finds_the_black_hole(spec, black_hole, adversary):
    fp = generate(spec)
    placement = scatter_placement(fp, black_hole, default_agent_count(fp, black_hole), seed=1)
    result = run(fp, black_hole, placement, ScatteredBhs(), parse_adversary(adversary, fp))
    outcome = result.outcome
    assert outcome.verdict == Verdict.SOLVED, outcome.violation
    assert outcome.deaths <= 2 * fp.degree(black_hole)
    for d in outcome.detected:
        assert fp.neighbor_via_port(d.node, d.port)[0] == black_hole


def test_group_formed_on_a_scattered_entry_stays_on_valid_ports():
    fp = generate("ring:5")
    placement = scatter_placement(fp, 0, default_agent_count(fp, 0), seed=1)
    result = run(fp, 0, placement, ScatteredBhs(), parse_adversary("block-smallest", fp))
    outcome = result.outcome
    assert outcome.verdict != Verdict.VIOLATION, outcome.violation
    for d in outcome.detected:
        assert fp.neighbor_via_port(d.node, d.port)[0] == 0


def test_group_skips_an_edge_kept_missing_under_a_stand_in():
    fp = generate("random:8,12,2")
    placement = scatter_placement(fp, 2, default_agent_count(fp, 2), seed=3)
    result = run(fp, 2, placement, ScatteredBhs(), parse_adversary("block-smallest", fp), horizon=4000)
    outcome = result.outcome
    assert outcome.verdict == Verdict.SOLVED, outcome.violation
    assert outcome.deaths <= 2 * fp.degree(2)


def test_smallest_of_three_groups_declares():
    """Groups 10 and 19 run into group 1's members or stamps and stop"""
    fp = generate("ring:6")
    placement = {aid: 0 for aid in range(1, 10)}
    placement.update({aid: 1 for aid in range(10, 19)})
    placement.update({aid: 5 for aid in range(19, 28)})
    result = run(fp, 3, placement, ScatteredBhs(), NoAdversary())
    outcome = result.outcome
    assert outcome.verdict == Verdict.SOLVED, outcome.violation
    assert outcome.detected == [Detection(1, 2, 0)]
    declarers = {e.agent for e in result.trace.events if e.kind == EventKind.DECLARED_BH}
    assert declarers == {1}
    terminated = {e.agent for e in result.trace.events if e.kind == EventKind.TERMINATED}
    assert set(range(10, 28)) <= terminated
    assert outcome.dead_ids == [2, 3]
