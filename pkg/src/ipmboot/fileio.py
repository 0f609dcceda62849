"""CSV and JSON readers and writers for designs, datasets and results."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .doe import Design, decode
from .errors import InvalidArgumentError
from .ipm import Dataset
from .plotting import write_table_csv


class DataValidationError(InvalidArgumentError):
    """A data file failed validation; `problems` lists row-numbered messages."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def dumps_json(doc) -> str:
    """Stable JSON text: fixed key order as given, two-space indent, trailing LF."""
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_json(doc, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(doc))
    return path


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_dataset(path, min_rows: int = 1) -> Dataset:
    """Read a (y, x1, x2) CSV; row numbers in messages count data rows from 1."""
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DataValidationError([f"cannot read {path}: {exc.strerror}"]) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataValidationError([f"{path} is empty"])
        header = [h.strip() for h in header]
        missing = [c for c in ("y", "x1", "x2") if c not in header]
        if missing:
            raise DataValidationError([f"header lacks column(s) {', '.join(missing)}"])
        idx = {c: header.index(c) for c in ("y", "x1", "x2")}
        cols = {c: [] for c in idx}
        problems = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            for c, j in idx.items():
                try:
                    v = float(row[j])
                except (IndexError, ValueError):
                    problems.append(f"row {row_no}: {c} is not a number")
                    continue
                if not math.isfinite(v):
                    problems.append(f"row {row_no}: {c} is not finite")
                elif c != "y" and v <= 0:
                    problems.append(f"row {row_no}: {c} must be > 0 (got {v!r})")
                cols[c].append(v)
    if problems:
        raise DataValidationError(problems)
    n = len(cols["y"])
    if n < min_rows:
        raise DataValidationError([f"need at least {min_rows} observations, got {n}"])
    return Dataset(np.array(cols["y"]), np.array(cols["x1"]), np.array(cols["x2"]))


def write_dataset(data: Dataset, path) -> Path:
    rows = zip(data.y, data.x1, data.x2)
    return write_table_csv(["y", "x1", "x2"], rows, path)


def write_design_csv(d: Design, path) -> Path:
    header = ["run", "type"] + [f"x{i + 1}" for i in range(d.k)]
    natural = None
    if d.factor_ranges is not None:
        header += [f"natural_x{i + 1}" for i in range(d.k)]
        natural = decode(d)
    rows = []
    for i, (row, kind) in enumerate(zip(d.points, d.types)):
        vals = [i + 1, kind] + [float(v) for v in row]
        if natural is not None:
            vals += [float(v) for v in natural[i]]
        rows.append(vals)
    return write_table_csv(header, rows, path)


def write_sse_trace(trace, path) -> Path:
    return write_table_csv(["iter", "sse"], [(i, float(s)) for i, s in enumerate(trace)], path)


def write_theta_star(names, theta_star, replicate_index, path) -> Path:
    rows = ([int(b)] + [float(v) for v in row] for b, row in zip(replicate_index, theta_star))
    return write_table_csv(["b", *names], rows, path)
