"""CSV and JSON output with byte-stable formatting.

Reals are written with 17 significant digits (round-trip exact for float64),
integers as plain decimals.  Row order is fixed by the callers, so identical
inputs produce identical bytes regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json

__all__ = ["format_cell", "rows_to_csv", "write_csv", "sha256_text", "write_json"]


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def rows_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    return "\r\n".join(lines) + "\r\n"


def write_csv(path, header, rows) -> str:
    """Write and return the sha256 digest of the data bytes."""
    text = rows_to_csv(header, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return sha256_text(text)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
