"""CSV and text report output."""
import csv
import io
import math
import sys
from pathlib import Path
from typing import Iterable, Optional, Sequence


def format_float(value: Optional[float]) -> str:
    """Nine significant digits; empty for a missing value."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.9g}"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """UTF-8 CSV with the given header; floats through ``format_float``."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell if isinstance(cell, str) else format_float(cell) for cell in row])
    return buffer.getvalue()


def write_output(text: str, out: Optional[str]) -> None:
    """Write ``text`` to ``out`` or to stdout."""
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def key_value_report(pairs: Sequence[tuple[str, object]]) -> str:
    """``key: value`` lines, skipping missing values."""
    lines = []
    for key, value in pairs:
        if value is None:
            continue
        text = value if isinstance(value, str) else format_float(value)
        lines.append(f"{key}: {text}")
    return "\n".join(lines) + "\n"
