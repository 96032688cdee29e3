"""
Trace Writer - JSONL traces, outcome documents and sweep CSVs

Output files are written asynchronously with aiofiles. Serialization is
deterministic: identical runs produce byte-identical files.
"""

import csv
import io
import json
import logging
import os
from pathlib import Path
from typing import Iterable, List, Union

import aiofiles

from .runtime import SCHEMA_VERSION, SimResult, Trace, TraceEvent

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "graph", "n", "m", "delta_bh", "agents", "adversary",
    "rounds", "deaths", "verdict", "group_formed",
]


class TraceFormatError(ValueError):
    """Malformed trace file or record"""


def trace_lines(trace: Trace) -> List[str]:
    lines = [json.dumps(trace.header)]
    lines.extend(json.dumps(event.to_dict()) for event in trace.events)
    return lines


def parse_trace_lines(lines: Iterable[str]) -> Trace:
    """Rebuild a trace from JSONL records; the first record must be the header"""
    header = None
    events: List[TraceEvent] = []
    for index, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceFormatError(f"record {index}: not JSON ({e})") from e
        if header is None:
            if record.get("kind") != "header":
                raise TraceFormatError("first record is not a header")
            if record.get("schema") != SCHEMA_VERSION:
                raise TraceFormatError(f"unsupported schema {record.get('schema')!r}")
            header = record
            continue
        try:
            events.append(TraceEvent.from_dict(record))
        except (KeyError, TypeError, ValueError) as e:
            raise TraceFormatError(f"record {index}: {e}") from e
    if header is None:
        raise TraceFormatError("empty trace")
    return Trace(header, events)


def load_trace(path: Union[str, Path]) -> Trace:
    with open(path, "r") as f:
        return parse_trace_lines(f)


async def write_trace(trace: Trace, path: Union[str, Path]):
    """Write the trace as JSONL"""
    async with aiofiles.open(path, "w") as f:
        await f.write("\n".join(trace_lines(trace)) + "\n")


async def write_json(document: dict, path: Union[str, Path]):
    async with aiofiles.open(path, "w") as f:
        await f.write(json.dumps(document, indent=2) + "\n")


def csv_text(rows: List[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


async def write_csv(rows: List[dict], path: Union[str, Path]):
    """Write sweep rows with the fixed column set"""
    async with aiofiles.open(path, "w", newline="") as f:
        await f.write(csv_text(rows))


def summary_row(result: SimResult) -> dict:
    """One CSV row for a finished run"""
    header = result.trace.header
    outcome = result.outcome
    return {
        "graph": header["graph"],
        "n": header["n"],
        "m": header["m"],
        "delta_bh": header.get("delta_bh", 0),
        "agents": len(header["agents"]),
        "adversary": header.get("adversary", "none"),
        "algorithm": header["algorithm"],
        "rounds": outcome.rounds_elapsed,
        "deaths": outcome.deaths,
        "verdict": outcome.verdict.value,
        "group_formed": int(outcome.group_formed),
    }


async def save_result(result: SimResult, out_dir: Union[str, Path], stem: str = "run") -> Path:
    """
    Write `<stem>.trace.jsonl` and `<stem>.outcome.json` into out_dir.

    Returns:
        Path of the trace file
    """
    os.makedirs(out_dir, exist_ok=True)
    trace_path = Path(out_dir) / f"{stem}.trace.jsonl"
    await write_trace(result.trace, trace_path)
    await write_json(result.outcome.to_dict(), Path(out_dir) / f"{stem}.outcome.json")
    logger.debug("wrote %s (%d events)", trace_path, len(result.trace.events))
    return trace_path
