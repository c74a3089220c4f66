"""Delimiter-separated report tables: header row, units row, records.

Floats are written with 17 significant digits so the text round-trips the
binary values exactly.
"""
import numpy as np

from .errors import DataError

DELIMITER = ","


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_table(path, columns, units, rows):
    """columns: names; units: one per column ("-" for none); rows:
    iterable of records."""
    columns = list(columns)
    units = list(units)
    if len(units) != len(columns):
        raise ValueError("units row must match the column count")
    lines = [DELIMITER.join(columns), DELIMITER.join(units)]
    for row in rows:
        row = list(row)
        if len(row) != len(columns):
            raise ValueError("record length does not match columns")
        lines.append(DELIMITER.join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def read_table(path):
    """Parse a report table back into (columns, units, rows)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise DataError(f"{path}: table needs a header and a units row")
    columns = lines[0].split(DELIMITER)
    units = lines[1].split(DELIMITER)
    if len(units) != len(columns):
        raise DataError(f"{path}: units row does not match header")
    rows = []
    for i, line in enumerate(lines[2:], start=3):
        parts = line.split(DELIMITER)
        if len(parts) != len(columns):
            raise DataError(f"{path}:{i}: record has {len(parts)} fields, "
                            f"expected {len(columns)}")
        parsed = []
        for text in parts:
            try:
                parsed.append(float(text))
            except ValueError:
                parsed.append(text)
        rows.append(parsed)
    return columns, units, rows
