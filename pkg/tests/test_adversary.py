import networkx as nx
import pytest

from bhs_lab.core.adversary import (
    AdversaryView,
    BlockSmallestAdversary,
    NoAdversary,
    PersistentAdversary,
    RandomAdversary,
    ScriptedAdversary,
    decide,
    enumerate_decisions,
    parse_adversary,
    strategy_set,
)
from bhs_lab.core.graph import EdgeId, from_networkx, generate
from bhs_lab.core.runtime import AgentMode, AgentState, ConfigurationError, Whiteboard


def _view(fp, round_no=0, agents=(), intents=()):
    return AdversaryView(
        round_no=round_no,
        footprint=fp,
        agents=tuple(agents),
        whiteboards=tuple(Whiteboard() for _ in range(fp.node_count)),
        intents=tuple(intents),
    )


def test_decision_counts():
    assert len(enumerate_decisions(generate("complete:3"))) == 4
    assert len(enumerate_decisions(generate("path:3"))) == 1
    chorded = nx.cycle_graph(4)
    chorded.add_edge(0, 2)
    assert len(enumerate_decisions(from_networkx(chorded))) == 6


def test_first_decision_removes_nothing(ring4):
    assert enumerate_decisions(ring4)[0].missing is None


def test_decide_refuses_bridges(path3):
    strategy = ScriptedAdversary({0: EdgeId(0, 1)})
    assert decide(strategy, _view(path3)).missing is None


def test_scripted_adversary_follows_its_rounds(ring4):
    strategy = ScriptedAdversary({2: EdgeId(1, 2)})
    assert decide(strategy, _view(ring4, round_no=2)).missing == EdgeId(1, 2)
    assert decide(strategy, _view(ring4, round_no=3)).missing is None


def test_script_file(tmp_path, ring4):
    script = tmp_path / "script.txt"
    script.write_text("# round u v\n0 1 0\n4 2 3\n")
    strategy = parse_adversary(f"script:{script}", ring4)
    assert strategy.script == {0: EdgeId(0, 1), 4: EdgeId(2, 3)}


def test_random_adversary_is_reproducible(ring4):
    first, second = RandomAdversary(7), RandomAdversary(7)
    picks = [decide(first, _view(ring4, r)).missing for r in range(30)]
    assert picks == [decide(second, _view(ring4, r)).missing for r in range(30)]
    legal = {d.missing for d in enumerate_decisions(ring4)}
    assert set(picks) <= legal


def test_block_smallest_targets_smallest_scattered_mover():
    ring5 = generate("ring:5")
    agents = [AgentState(id=1, position=2), AgentState(id=4, position=0)]
    view = _view(ring5, agents=agents, intents=[(4, 0, 0), (1, 2, 1)])
    assert BlockSmallestAdversary().propose(view) == EdgeId(1, 2)


def test_block_smallest_skips_group_and_terminated_agents():
    ring5 = generate("ring:5")
    agents = [
        AgentState(id=1, position=2, grp=True, grp_id=1),
        AgentState(id=2, position=3, mode=AgentMode.TERMINATED),
        AgentState(id=5, position=0),
    ]
    view = _view(ring5, agents=agents, intents=[(1, 2, 1), (2, 3, 0), (5, 0, 1)])
    assert BlockSmallestAdversary().propose(view) == EdgeId(0, 4)
    assert BlockSmallestAdversary().propose(_view(ring5, agents=agents[:2], intents=[(1, 2, 1)])) is None


def test_persistent_adversary_keeps_its_edge(ring4):
    strategy = parse_adversary("persistent:3,2", ring4)
    assert isinstance(strategy, PersistentAdversary)
    assert strategy.name == "persistent:2,3"
    assert all(decide(strategy, _view(ring4, r)).missing == EdgeId(2, 3) for r in range(5))


@pytest.mark.parametrize("spec", ["sometimes", "random:x", "persistent:0,1", "persistent:0,2", "script:/nonexistent/s.txt"])
def test_bad_adversary_specs(spec, path3):
    with pytest.raises(ConfigurationError):
        parse_adversary(spec, path3)


def test_parse_known_specs(ring4):
    assert isinstance(parse_adversary("none"), NoAdversary)
    assert parse_adversary("random:3").name == "random:3"
    assert parse_adversary("block-smallest").name == "block-smallest"


def test_strategy_set_covers_every_non_bridge_edge(ring4, path3):
    specs = strategy_set(ring4, [1, 2])
    assert specs[:4] == ["none", "block-smallest", "random:1", "random:2"]
    assert len(specs) == 8
    assert strategy_set(path3, [1]) == ["none", "block-smallest", "random:1"]
