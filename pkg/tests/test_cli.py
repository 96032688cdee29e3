import json

import pytest

import bhs_lab.main
from bhs_lab.main import (
    EXIT_CONFIG,
    EXIT_FAILED,
    EXIT_HORIZON,
    EXIT_OK,
    expand_graph_specs,
    main,
    over_round_bound,
    parse_emergence,
)
from bhs_lab.core.runtime import ConfigurationError


@pytest.fixture
def cli(tmp_path, monkeypatch):
    monkeypatch.setenv("BHS_LAB_CACHE", str(tmp_path / "cache"))
    out = tmp_path / "out"

    def invoke(*args):
        return main(["--config-dir", str(tmp_path / "config"), *args])

    invoke.out = out
    return invoke


@pytest.fixture
def placement(tmp_path):
    target = tmp_path / "placement.txt"
    target.write_text("0 1\n0 2\n0 3\n")
    return str(target)


def test_run_writes_trace_and_outcome(cli, placement, capsys):
    code = cli("run", "--graph", "path:3", "--bh", "2", "--placement", placement, "--out", str(cli.out), "--stem", "walk")
    assert code == EXIT_OK
    assert json.loads(capsys.readouterr().out)["verdict"] == "solved"
    assert (cli.out / "walk.trace.jsonl").exists()
    assert (cli.out / "walk.outcome.json").exists()


def test_run_reaching_the_horizon(cli, placement):
    code = cli("run", "--graph", "path:3", "--bh", "2", "--placement", placement, "--horizon", "5", "--out", str(cli.out))
    assert code == EXIT_HORIZON


def test_round_bound_applies_to_scattered_rows_without_a_group():
    row = {"algorithm": "scattered", "group_formed": 0, "m": 3, "delta_bh": 2, "rounds": 912}
    assert not over_round_bound(row)
    assert over_round_bound({**row, "rounds": 913})
    assert not over_round_bound({**row, "rounds": 913, "group_formed": 1})
    assert not over_round_bound({**row, "rounds": 913, "algorithm": "rooted"})


def test_sweep_fails_a_slow_row_without_a_group(cli, monkeypatch):
    original = bhs_lab.main.summary_row

    def slow_row(result):
        row = original(result)
        row.update(group_formed=0, rounds=10 ** 6)
        return row

    monkeypatch.setattr(bhs_lab.main, "summary_row", slow_row)
    code = cli("sweep", "--graphs", "ring:4", "--out", str(cli.out))
    assert code == EXIT_FAILED
    assert (cli.out / "sweep.csv").exists()


def test_ebhs_run(cli, capsys):
    code = cli("run", "--graph", "path:3", "--algo", "ebhs", "--emerge", "2:1", "--out", str(cli.out))
    assert code == EXIT_OK
    outcome = json.loads(capsys.readouterr().out)
    assert outcome["detected"][0]["node"] == 1
    assert outcome["latency_ticks"] == 8


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--graph", "path:3", "--algo", "ebhs"],
        ["run", "--graph", "path:3", "--algo", "ebhs", "--emerge", "2:1", "--bh", "2"],
        ["run", "--graph", "path:3", "--bh", "2", "--emerge", "2:1"],
        ["run", "--graph", "path:3"],
        ["run", "--graph", "path:3", "--bh", "7"],
        ["run", "--graph", "hexagon:3", "--bh", "1"],
        ["run", "--graph", "ring:4", "--bh", "1", "--adversary", "persistent:0,2"],
        ["run", "--graph", "path:3", "--algo", "ebhs", "--emerge", "0:0"],
        ["sweep", "--graphs", "path:3", "--bh", "9"],
    ],
)
def test_configuration_errors(cli, args):
    assert cli(*args) == EXIT_CONFIG


def test_sweep_writes_csv(cli):
    code = cli("sweep", "--graphs", "path:2..3", "--algo", "rooted", "--out", str(cli.out))
    assert code == EXIT_OK
    lines = (cli.out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "graph,n,m,delta_bh,agents,adversary,rounds,deaths,verdict,group_formed"
    assert [line.split(",")[0] for line in lines[1:]] == ["path2", "path3"]
    assert all(line.split(",")[8] == "solved" for line in lines[1:])


def test_sweep_reports_unsolved_rows(cli):
    code = cli("sweep", "--graphs", "path:3", "--algo", "rooted", "--agents", "8", "--out", str(cli.out))
    assert code == EXIT_HORIZON


def test_unknown_suite_is_rejected_by_the_parser(cli):
    with pytest.raises(SystemExit):
        cli("verify", "--suite", "everything")


def test_emergence_parsing():
    assert parse_emergence("3:4") == (3, 4, None)
    assert parse_emergence("3:4:2") == (3, 4, 2)
    with pytest.raises(ConfigurationError):
        parse_emergence("3")


def test_graph_ranges():
    assert expand_graph_specs(["ring:4..6", "path:3"]) == ["ring:4", "ring:5", "ring:6", "path:3"]
