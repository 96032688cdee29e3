import dataclasses

import pytest

from bhs_lab.core.adversary import NoAdversary
from bhs_lab.core.ebhs_chain import DfsBackend, Emergence, run_ebhs
from bhs_lab.core.graph import generate
from bhs_lab.core.harness import (
    DYNAMIC_CHECKS,
    EBHS_CHECKS,
    AuditReport,
    CheckResult,
    DynamicScenario,
    EbhsScenario,
    OracleJob,
    VerificationManager,
    audit_trace,
    build_suite,
    corpus_specs,
    oracle_dynamic,
    oracle_ebhs,
)
from bhs_lab.core.runtime import ConfigurationError, EventKind, Trace, TraceEvent, run
from bhs_lab.core.scattered import ScatteredBhs
from bhs_lab.core.trace_writer import TraceFormatError

WALKTHROUGH = {1: 0, 2: 0, 3: 0}


@pytest.fixture
def walkthrough(path3):
    return run(path3, 2, WALKTHROUGH, ScatteredBhs(), NoAdversary())


def test_clean_run_passes_every_check(walkthrough):
    report = audit_trace(walkthrough.trace, outcome=walkthrough.outcome)
    assert report.ok, report.to_dict()
    assert set(report.checks) == set(DYNAMIC_CHECKS)
    assert report.max_deaths == 2


def test_second_travel_writer_is_caught(walkthrough):
    events = list(walkthrough.trace.events)
    index = next(
        i for i, e in enumerate(events)
        if e.kind == EventKind.WROTE_WB and e.detail.startswith("travel:")
    )
    events.insert(index + 1, dataclasses.replace(events[index], agent=99))
    report = audit_trace(Trace(walkthrough.trace.header, events), ["single_travel_writer"])
    check = report.checks["single_travel_writer"]
    assert not check.passed
    assert check.event_index == index + 1


def test_wrong_declaration_is_caught(walkthrough):
    events = [
        dataclasses.replace(e, detail="1") if e.kind == EventKind.DECLARED_BH else e
        for e in walkthrough.trace.events
    ]
    report = audit_trace(Trace(walkthrough.trace.header, events), ["declarations_correct"])
    assert not report.ok
    assert "leads to 0" in report.checks["declarations_correct"].detail


def test_odd_round_move_is_caught(walkthrough):
    events = list(walkthrough.trace.events)
    moved = next(e for e in events if e.kind == EventKind.MOVE_OK)
    events.append(dataclasses.replace(moved, round=moved.round + 1))
    report = audit_trace(Trace(walkthrough.trace.header, events), ["even_round_moves"])
    assert not report.checks["even_round_moves"].passed


def test_follow_check_tracks_the_smallest_live_agent(walkthrough):
    header = walkthrough.trace.header
    died = TraceEvent(6, None, 1, EventKind.DIED, 1)
    takes_over = TraceEvent(8, None, 2, EventKind.FOLLOWED, 0, "leader=1")
    follows_larger = TraceEvent(8, None, 2, EventKind.FOLLOWED, 0, "leader=3")

    report = audit_trace(Trace(header, [died, takes_over]), ["smallest_never_follows"])
    assert report.ok

    report = audit_trace(Trace(header, [died, follows_larger]), ["smallest_never_follows"])
    check = report.checks["smallest_never_follows"]
    assert not check.passed
    assert check.event_index == 1

    report = audit_trace(Trace(header, [follows_larger]), ["smallest_never_follows"])
    assert report.ok


def test_unknown_check(walkthrough):
    with pytest.raises(ConfigurationError):
        audit_trace(walkthrough.trace, ["no_such_check"])


def test_bad_header(walkthrough):
    header = dict(walkthrough.trace.header)
    del header["edges"]
    with pytest.raises(TraceFormatError):
        audit_trace(Trace(header, walkthrough.trace.events))


def test_ebhs_trace_audit(path3):
    result = run_ebhs(path3, 0, DfsBackend, Emergence(2, 1))
    report = audit_trace(result.trace, outcome=result.outcome)
    assert set(report.checks) == set(EBHS_CHECKS)
    assert report.ok


def test_report_keeps_first_failure():
    report = AuditReport(label="demo")
    report.record(CheckResult("death_bound"))
    report.record(CheckResult("death_bound", False, "first"), {"round": 3})
    report.record(CheckResult("death_bound", False, "second"), {"round": 5})
    assert report.checks["death_bound"].detail == "first"
    assert report.counterexample["round"] == 3
    assert report.summary().startswith("[FAIL] demo")


def test_strategy_oracle(path3):
    job = OracleJob("walkthrough", path3, DynamicScenario(2, placements=[WALKTHROUGH]), DYNAMIC_CHECKS)
    report = oracle_dynamic(job)
    assert report.ok
    assert report.checks["solved"].passed
    assert report.runs == 1


def test_exhaustive_oracle_on_a_tree(path3):
    scenario = DynamicScenario(2, placements=[WALKTHROUGH], exhaustive=True, horizon=40)
    report = oracle_dynamic(OracleJob("tree", path3, scenario))
    assert report.ok
    assert report.leaves == 1
    assert report.stalled == 0
    assert report.max_deaths == 2


def test_exhaustive_oracle_respects_the_state_budget():
    triangle = generate("complete:3")
    scenario = DynamicScenario(
        2, placements=[{aid: aid % 2 for aid in range(1, 22)}],
        exhaustive=True, horizon=12, max_states=50,
    )
    report = oracle_dynamic(OracleJob("budget", triangle, scenario))
    assert not report.complete
    assert report.checks["declarations_correct"].passed


def test_ebhs_oracle_covers_every_emergence_point(path3):
    report = oracle_ebhs(OracleJob("ebhs", path3, EbhsScenario(), EBHS_CHECKS))
    assert report.ok, report.counterexample
    assert report.runs == 1 + 3 * 2 * 36 - 1


def test_ebhs_oracle_single_period(path3):
    report = oracle_ebhs(OracleJob("ebhs", path3, EbhsScenario(periods=1), EBHS_CHECKS))
    assert report.runs == 1 + 3 * 36 - 1


def test_suites(config):
    assert len(build_suite("ebhs", config, quick=True)) == 4
    ebhs = build_suite("ebhs", config)
    assert len(ebhs) == len(corpus_specs()) + 2
    assert {job.scenario.backend for job in ebhs} == {"dfs", "uxs"}

    rooted = build_suite("rooted", config)
    labels = {job.label for job in rooted}
    assert "rooted/ring10/bh9" in labels
    assert all(job.scenario.black_hole != 0 for job in rooted)
    assert len(rooted) == sum(n - 1 for n in range(4, 11)) + sum(n - 1 for n in range(4, 9)) + 10 * 7 + 3 + 8

    scattered = build_suite("scattered", config, quick=True)
    exhaustive = [job for job in scattered if job.scenario.exhaustive]
    assert scattered[-1].scenario.exhaustive
    # K2, P3 and K3 with every black hole position
    assert len(exhaustive) == 2 + 3 + 3
    assert len(build_suite("scattered", config)) > len(scattered)
    with pytest.raises(ConfigurationError):
        build_suite("everything", config)


@pytest.mark.asyncio
async def test_manager_runs_jobs_in_order(config, database):
    progress = []
    finished = []
    manager = VerificationManager(
        config=config, database=database,
        progress_callback=lambda done, total: progress.append((done, total)),
        completion_callback=finished.append,
    )
    manager.add_job(OracleJob("first", generate("path:2"), EbhsScenario(), EBHS_CHECKS))
    manager.add_job(OracleJob("broken", generate("path:2"), EbhsScenario(home=5), EBHS_CHECKS))
    reports = await manager.run_jobs()
    assert [r.label for r in reports] == ["first", "broken"]
    assert reports[0].ok
    assert not reports[1].ok
    assert reports[1].errors
    assert sorted(progress)[-1] == (2, 2)
    assert len(finished) == 2
    assert manager.queue == []


@pytest.mark.asyncio
async def test_manager_map_keeps_order(config):
    manager = VerificationManager(config=config)
    assert await manager.map(lambda x: x * x, [3, 1, 2]) == [9, 1, 4]
