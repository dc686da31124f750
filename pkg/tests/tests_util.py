"""Shared helpers for runner/bench/service tests."""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

from selfai.manager.backends import BenchmarkTable
from selfai.model import Direction, SearchSpace


def make_table(size: int, direction: Direction = Direction.MAXIMIZE, name: str = "synthetic") -> BenchmarkTable:
    """Single-dimension table with distinct values and the optimum inside."""
    space = SearchSpace.from_dict({"knob": list(range(size))})
    values = tuple(round(1.0 + ((7 * i + 3) % size) * 0.5, 4) for i in range(size))
    return BenchmarkTable(name=name, space=space, direction=direction, metric="value", values=values)


def make_grid_table(rows: int, cols: int, peak: tuple[int, int] = (0, 0)) -> BenchmarkTable:
    space = SearchSpace.from_dict({"r": list(range(rows)), "c": list(range(cols))})
    values = []
    for n in range(rows * cols):
        config = space.config_at(n)
        dist = (config["r"] - peak[0]) ** 2 + (config["c"] - peak[1]) ** 2
        values.append(round(10.0 - dist * 0.5 + 0.001 * n, 4))
    return BenchmarkTable(
        name="grid-table", space=space, direction=Direction.MAXIMIZE, metric="value",
        values=tuple(values),
    )


def write_table_files(table: BenchmarkTable, directory: Path) -> Path:
    """Serialize a table to <name>.csv + sidecar; returns the CSV path."""
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{table.name}.csv"
    dims = dict(table.space.dimensions)
    with csv_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(table.space.names) + ["value"])
        for number in range(table.space.cardinality):
            config = table.space.config_at(number)
            writer.writerow([config[n] for n in table.space.names] + [repr(table.values[number])])
    sidecar = {
        "name": table.name,
        "direction": table.direction.value,
        "metric": table.metric,
        "count": table.space.cardinality,
        "dimensions": {name: list(values) for name, values in dims.items()},
    }
    csv_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return csv_path


def wait_until(predicate, timeout: float = 10.0, interval: float = 0.02) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return False


def playbook_text(entries: list[tuple[str, str]]) -> str:
    """YAML playbook body from (phase, response) pairs."""
    blocks = []
    for phase, response in entries:
        indented = "\n".join("    " + line for line in response.splitlines())
        blocks.append(f"- expect_phase: {phase}\n  response_text: |\n{indented}")
    return "\n".join(blocks) + "\n"
