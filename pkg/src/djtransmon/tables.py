"""Deterministic CSV writing shared by the sweep, fit and CLI layers."""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path


def fmt(x) -> str:
    """Fixed 9-significant-digit formatting; None becomes an empty field."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def write_csv(path, header, rows) -> Path:
    """Write rows atomically; on failure leave a ``.failed`` marker instead."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if tmp.exists():
            tmp.unlink()
        path.with_name(path.name + ".failed").write_text("write failed\n")
        raise
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            header = [h.strip() for h in next(r)]
        except StopIteration:
            return [], []
        return header, [row for row in r if row]
