"""Deterministic flat-file telemetry: tagged CSV rows plus JSON summaries.

Floats are written with repr (shortest round-trip form) so re-parsing a
file recovers bit-identical values; a trailing end marker makes
truncation detectable.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SchemaMismatchError

HEADER_PREFIX = "# coilpilot-telemetry scenario="
END_MARKER = "# end"

# primary telemetry schemas: column name -> parser
SCHEMAS: dict[str, list[tuple[str, str]]] = {
    "mechanics-sweep": [
        ("chamber_id", "i"),
        ("pressure_kpa", "f"),
        ("model_displacement_mm", "f"),
        ("first_stroke_displacement_mm", "f"),
        ("reference_displacement_mm", "f"),
        ("deviation_mm", "f"),
    ],
    "contact-test": [
        ("t_s", "f"),
        ("displacement_mm", "f"),
        ("tip_x_mm", "f"),
        ("tip_y_mm", "f"),
        ("tip_z_mm", "f"),
        ("penetration_mm", "f"),
        ("force_n", "f"),
        ("in_contact", "i"),
        ("cycle", "i"),
    ],
    "path-trace": [
        ("goal_index", "i"),
        ("goal_x_mm", "f"),
        ("goal_y_mm", "f"),
        ("goal_z_mm", "f"),
        ("achieved_x_mm", "f"),
        ("achieved_y_mm", "f"),
        ("achieved_z_mm", "f"),
        ("sensed_error_mm", "f"),
        ("true_error_mm", "f"),
        ("iterations", "i"),
        ("status", "s"),
    ],
    "implant": [
        ("anchor_index", "i"),
        ("round", "i"),
        ("site_label", "s"),
        ("u_mm", "f"),
        ("v_mm", "f"),
        ("target_u_mm", "f"),
        ("target_v_mm", "f"),
        ("lateral_error_mm", "f"),
        ("depth_mm", "f"),
        ("release_torque_nmm", "f"),
        ("released_time_s", "f"),
        ("released", "i"),
    ],
    "calibrate-torque": [
        ("session", "i"),
        ("true_torque_nmm", "f"),
        ("reading_nmm", "f"),
        ("abs_error_nmm", "f"),
        ("rel_error", "f"),
    ],
}


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_rows(path: Path, scenario: str, columns: list[str], rows) -> None:
    """Write a tagged telemetry CSV; rows are sequences matching columns."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{HEADER_PREFIX}{scenario}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
        fh.write(END_MARKER + "\n")


def read_rows(path: Path) -> tuple[str, list[dict]]:
    """Parse a tagged telemetry CSV back into typed row dicts."""
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith(HEADER_PREFIX):
        raise SchemaMismatchError("missing telemetry header tag")
    scenario = lines[0][len(HEADER_PREFIX):].strip()
    if scenario not in SCHEMAS:
        raise SchemaMismatchError(f"unknown scenario tag {scenario!r}")
    if lines[-1] != END_MARKER:
        raise SchemaMismatchError("missing end marker (file truncated?)")
    schema = SCHEMAS[scenario]
    expected = [name for name, _ in schema]
    if len(lines) < 2 or lines[1].split(",") != expected:
        raise SchemaMismatchError(f"column mismatch for scenario {scenario!r}")

    rows = []
    for line in lines[2:-1]:
        parts = line.split(",")
        if len(parts) != len(schema):
            raise SchemaMismatchError(f"bad field count in row: {line!r}")
        row = {}
        for (name, kind), raw in zip(schema, parts):
            try:
                row[name] = int(raw) if kind == "i" else float(raw) if kind == "f" else raw
            except ValueError as exc:
                raise SchemaMismatchError(f"bad {kind} value {raw!r} in column {name}") from exc
        rows.append(row)
    return scenario, rows


def dump_summary(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_summary(path: Path, summary: dict) -> None:
    Path(path).write_text(dump_summary(summary))
