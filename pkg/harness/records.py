"""CSV persistence of observation records.

Rows are appended to `records.partial.csv` as instances finish, in
completion order. The final `records.csv` is the same rows sorted by
(kind, L, instance, epsilon, loop_index), so its bytes do not depend on
scheduling.
"""

import math
from pathlib import Path
from typing import Iterable

from observables import ObservationRecord
from utils.logging import get_logger

logger = get_logger(__name__)

HEADER = (
    "kind,L,instance,excitation,epsilon,ground_cost,delta_e,loop_index,"
    "S,R2,theta2_gauged,theta2_raw,wx,wy,overlap,distance"
)
COLUMNS = HEADER.split(",")
PARTIAL_NAME = "records.partial.csv"
FINAL_NAME = "records.csv"


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def format_row(record: ObservationRecord) -> str:
    return ",".join(_format(getattr(record, column)) for column in COLUMNS)


def sort_key(line: str) -> tuple:
    """(kind, L, instance, epsilon, loop_index); instance rows sort after their loops."""
    fields = line.split(",")
    epsilon = float(fields[4]) if fields[4] else -1.0
    loop_index = int(fields[7]) if fields[7] else math.inf
    return fields[0], int(fields[1]), int(fields[2]), epsilon, loop_index


def task_key(line: str) -> tuple[str, int, int]:
    fields = line.split(",", 3)
    return fields[0], int(fields[1]), int(fields[2])


def is_instance_row(line: str) -> bool:
    return line.split(",")[7] == ""


def append_rows(path: Path, records: Iterable[ObservationRecord]) -> None:
    """Append one finished instance as a single block and flush it."""
    block = "".join(format_row(r) + "\n" for r in records)
    new_file = not path.exists()
    with path.open("a", encoding="utf-8", newline="\n") as handle:
        if new_file:
            handle.write(HEADER + "\n")
        handle.write(block)
        handle.flush()


def read_partial(path: Path) -> list[str]:
    """Complete data lines of a partial file; a torn last line is dropped."""
    if not path.exists():
        return []
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] != "":
        logger.warning(f"Dropping torn trailing line in {path}")
    complete = lines[:-1]
    return [line for line in complete[1:] if line] if complete and complete[0] == HEADER else []


def completed_tasks(lines: list[str], instance_rows_per_task: int) -> set[tuple[str, int, int]]:
    """Tasks whose block holds all expected per-instance rows."""
    counts: dict[tuple[str, int, int], int] = {}
    for line in lines:
        if is_instance_row(line):
            key = task_key(line)
            counts[key] = counts.get(key, 0) + 1
    return {key for key, count in counts.items() if count >= instance_rows_per_task}


def rewrite_partial(path: Path, lines: list[str]) -> None:
    path.write_text(HEADER + "\n" + "".join(line + "\n" for line in lines), encoding="utf-8", newline="\n")


def write_final(path: Path, lines: list[str]) -> None:
    """Write the sorted record file."""
    ordered = sorted(lines, key=sort_key)
    path.write_text(HEADER + "\n" + "".join(line + "\n" for line in ordered), encoding="utf-8", newline="\n")
    logger.info(f"Wrote {len(ordered)} records to {path}")
