#!/usr/bin/env python3
"""
BHS Lab - Black hole search simulator

Runs single simulations, parameter sweeps and verification suites for
black hole search by mobile agents on dynamic and static graphs.

Exit codes: 0 solved / all checks green, 1 violation or failed check,
2 invalid configuration or input, 3 horizon reached without a declaration.
"""

import sys
import json
import asyncio
import argparse
import logging
from pathlib import Path
from typing import List, Optional

from bhs_lab.core.adversary import parse_adversary
from bhs_lab.core.ebhs_chain import (
    Emergence,
    UxsLibrary,
    UxsSearchExhausted,
    make_backend_factory,
    resolve_emergence_tick,
    run_ebhs,
)
from bhs_lab.core.graph import GraphError, generate
from bhs_lab.core.harness import VerificationManager, build_suite, make_algorithm
from bhs_lab.core.runtime import (
    ConfigurationError,
    SimResult,
    Verdict,
    default_agent_count,
    read_placement_file,
    rooted_placement,
    run,
    scatter_placement,
)
from bhs_lab.core.trace_writer import save_result, summary_row, write_csv, write_json
from bhs_lab.data.config import LabConfig
from bhs_lab.data.database import Database

logger = logging.getLogger("bhs_lab")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_HORIZON = 3

# per edge and unit of delta_bh, for scattered runs without a group
NO_GROUP_ROUNDS = 152


def argparse_add_argument(parser: argparse.ArgumentParser):
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--config-dir", type=str, default="", help="directory holding config.json")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one simulation")
    run_p.add_argument("--graph", type=str, required=True, help="generator spec (ring:N, path:N, star:K, torus:RxC, complete:N, random:N,M,SEED) or file:PATH")
    run_p.add_argument("--algo", type=str, default="scattered", choices=["scattered", "rooted", "ebhs"])
    run_p.add_argument("--bh", type=int, default=None, help="black hole node (dynamic model)")
    run_p.add_argument("--emerge", type=str, default=None, help="NODE:ROUND[:SUBROUND] emergence point (ebhs)")
    run_p.add_argument("--home", type=int, default=0, help="start node for rooted and ebhs runs")
    run_p.add_argument("--agents", type=int, default=None, help="agent count (default 2*delta_bh+17, rooted 9)")
    run_p.add_argument("--placement", type=str, default=None, help="file with 'node agent_id' lines")
    run_p.add_argument("--seed", type=int, default=1, help="placement and id seed")
    run_p.add_argument("--adversary", type=str, default="none", help="none | random:SEED | script:PATH | block-smallest | persistent:U,V")
    run_p.add_argument("--backend", type=str, default="dfs", choices=["dfs", "uxs", "uxs-known-n"], help="exploration walk for ebhs")
    run_p.add_argument("--horizon", type=int, default=None, help="round limit (ticks for ebhs)")
    run_p.add_argument("--out", type=str, default=None, help="output directory")
    run_p.add_argument("--stem", type=str, default="run", help="output file stem")

    sweep_p = sub.add_parser("sweep", help="run a grid of simulations and write a CSV")
    sweep_p.add_argument("--graphs", type=str, nargs="+", required=True, help="generator specs; ring:4..10 expands to a range")
    sweep_p.add_argument("--algo", type=str, default="scattered", choices=["scattered", "rooted"])
    sweep_p.add_argument("--bh", type=int, default=None, help="black hole node (default n // 2)")
    sweep_p.add_argument("--seeds", type=int, nargs="+", default=[1])
    sweep_p.add_argument("--adversaries", type=str, nargs="+", default=["none"])
    sweep_p.add_argument("--agents", type=int, default=None)
    sweep_p.add_argument("--out", type=str, default=None, help="output directory")
    sweep_p.add_argument("--csv", type=str, default="sweep.csv", help="CSV file name inside the output directory")

    verify_p = sub.add_parser("verify", help="run a verification suite")
    verify_p.add_argument("--suite", type=str, default="all", choices=["scattered", "rooted", "ebhs", "all"])
    verify_p.add_argument("--quick", action="store_true", help="fewer seeds and emergence ticks")
    verify_p.add_argument("--require-liveness", action="store_true", help="stalled exhaustive leaves fail the suite")
    verify_p.add_argument("--report", type=str, default=None, help="write the JSON report here")


def parse_emergence(text: str):
    """NODE:ROUND[:SUBROUND] -> (node, round, sub_round or None)"""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ConfigurationError(f"bad emergence {text!r}, expected NODE:ROUND[:SUBROUND]")
    try:
        values = [int(p) for p in parts]
    except ValueError as e:
        raise ConfigurationError(f"bad emergence {text!r}") from e
    return values[0], values[1], values[2] if len(parts) == 3 else None


def expand_graph_specs(specs: List[str]) -> List[str]:
    """Expand `kind:A..B` into one spec per size"""
    expanded = []
    for spec in specs:
        kind, _, arg = spec.partition(":")
        if ".." in arg:
            low, high = (int(x) for x in arg.split(".."))
            expanded.extend(f"{kind}:{k}" for k in range(low, high + 1))
        else:
            expanded.append(spec)
    return expanded


def exit_code_for(verdict: Verdict) -> int:
    if verdict == Verdict.SOLVED:
        return EXIT_OK
    if verdict == Verdict.UNSOLVED_HORIZON:
        return EXIT_HORIZON
    return EXIT_FAILED


def over_round_bound(row: dict) -> bool:
    """True for a scattered row without a group whose rounds exceed 152·m·delta_bh"""
    if row.get("algorithm") != "scattered" or row["group_formed"]:
        return False
    return row["rounds"] > NO_GROUP_ROUNDS * row["m"] * row["delta_bh"]


def simulate(args, config: LabConfig, database: Database) -> SimResult:
    """Build and run the simulation described by the `run` arguments"""
    fp = generate(args.graph)
    if args.algo == "ebhs":
        if args.emerge is None:
            raise ConfigurationError("ebhs runs need --emerge NODE:ROUND[:SUBROUND]")
        if args.bh is not None:
            raise ConfigurationError("ebhs places the black hole with --emerge, not --bh")
        node, round_no, sub_round = parse_emergence(args.emerge)
        library = UxsLibrary(database)
        factory = make_backend_factory(args.backend, fp, library, max_n=config.uxs_max_n)
        tick = resolve_emergence_tick(fp, args.home, factory, round_no, sub_round)
        return run_ebhs(fp, args.home, factory, Emergence(node, tick), horizon_ticks=args.horizon)

    if args.emerge is not None:
        raise ConfigurationError("--emerge is only valid with --algo ebhs")
    if args.bh is None:
        raise ConfigurationError(f"--algo {args.algo} needs --bh NODE")
    if not 0 <= args.bh < fp.node_count:
        raise ConfigurationError(f"black hole {args.bh} is not a node")
    if args.placement:
        placement = read_placement_file(args.placement)
    elif args.algo == "rooted":
        placement = rooted_placement(fp, args.home, args.agents or 9, args.seed, config.id_exponent)
    else:
        count = args.agents or default_agent_count(fp, args.bh)
        placement = scatter_placement(fp, args.bh, count, args.seed, config.id_exponent)
    adversary = parse_adversary(args.adversary, fp)
    return run(
        fp, args.bh, placement, make_algorithm(args.algo), adversary,
        horizon=args.horizon, horizon_slack=config.horizon_slack,
    )


def cmd_run(args, config: LabConfig, database: Database) -> int:
    """Run one simulation and write its trace and outcome"""
    try:
        result = simulate(args, config, database)
    except UxsSearchExhausted as e:
        logger.warning("%s; falling back to the dfs backend", e)
        args.backend = "dfs"
        result = simulate(args, config, database)
    out_dir = args.out or config.output_dir
    trace_path = asyncio.run(save_result(result, out_dir, args.stem))
    row = summary_row(result)
    database.save_run(row, result.outcome.to_dict())
    print(json.dumps(result.outcome.to_dict(), indent=2))
    logger.info("trace written to %s", trace_path)
    return exit_code_for(result.outcome.verdict)


def cmd_sweep(args, config: LabConfig, database: Database) -> int:
    """Run every (graph, seed, adversary) combination and write one CSV row each"""
    grid = []
    for spec in expand_graph_specs(args.graphs):
        fp = generate(spec)
        bh = args.bh if args.bh is not None else fp.node_count // 2
        if not 0 <= bh < fp.node_count:
            raise ConfigurationError(f"black hole {bh} is not a node of {fp.name}")
        for seed in args.seeds:
            for adversary in args.adversaries:
                parse_adversary(adversary, fp)
                grid.append((fp, bh, seed, adversary))

    def one(item) -> SimResult:
        fp, bh, seed, adversary = item
        home = 0 if bh != 0 else 1
        if args.algo == "rooted":
            placement = rooted_placement(fp, home, args.agents or 9, seed, config.id_exponent)
        else:
            count = args.agents or default_agent_count(fp, bh)
            placement = scatter_placement(fp, bh, count, seed, config.id_exponent)
        return run(
            fp, bh, placement, make_algorithm(args.algo), parse_adversary(adversary, fp),
            horizon_slack=config.horizon_slack,
        )

    manager = VerificationManager(config=config, database=database)
    results = asyncio.run(manager.map(one, grid))
    out_dir = Path(args.out or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for item, result in zip(grid, results):
        if isinstance(result, BaseException):
            raise result
        row = summary_row(result)
        row["seed"] = item[2]
        rows.append(row)
        database.save_run(row, result.outcome.to_dict())
        if result.outcome.verdict == Verdict.VIOLATION:
            stem = f"counterexample_{result.trace.header['graph']}_s{item[2]}"
            path = asyncio.run(save_result(result, out_dir, stem))
            logger.error("violation on %s (%s): trace at %s", row["graph"], result.outcome.violation, path)
            asyncio.run(write_csv(rows, out_dir / args.csv))
            return EXIT_FAILED
    asyncio.run(write_csv(rows, out_dir / args.csv))
    logger.info("wrote %d rows to %s", len(rows), out_dir / args.csv)
    slow = [r for r in rows if over_round_bound(r)]
    for r in slow:
        logger.error(
            "%s seed %s: %d rounds without a group, bound %d",
            r["graph"], r["seed"], r["rounds"], NO_GROUP_ROUNDS * r["m"] * r["delta_bh"],
        )
    if slow:
        return EXIT_FAILED
    if any(r["verdict"] != Verdict.SOLVED.value for r in rows):
        return EXIT_HORIZON
    return EXIT_OK


def cmd_verify(args, config: LabConfig, database: Database) -> int:
    """Run a suite and print one summary line per job"""
    jobs = build_suite(args.suite, config, quick=args.quick)
    for job in jobs:
        if args.require_liveness and hasattr(job.scenario, "require_liveness"):
            job.scenario.require_liveness = True

    def progress(done: int, total: int):
        logger.debug("verification progress %d/%d", done, total)

    manager = VerificationManager(config=config, database=database, progress_callback=progress)
    reports = asyncio.run(manager.run_jobs(jobs))
    for report in reports:
        print(report.summary())
    document = {"schema": 1, "suite": args.suite, "reports": [r.to_dict() for r in reports]}
    if args.report:
        asyncio.run(write_json(document, args.report))
    ok = all(r.ok for r in reports)
    print(f"suite {args.suite}: {'all green' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    parser = argparse.ArgumentParser(prog="bhs-lab", description="Black hole search simulator")
    argparse_add_argument(parser)
    args = parser.parse_args(argv)

    config = LabConfig.load(args.config_dir)
    level = logging.DEBUG if args.verbose else getattr(logging, str(config.log_level).upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        database = Database(config.database_path)
        return COMMANDS[args.command](args, config, database)
    except (GraphError, ConfigurationError, OSError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
