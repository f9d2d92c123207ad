"""CSV and JSON readers/writers for job sets, placements and comparisons."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Union

from .metrics import Placement, PlacedJob
from .trace import Job, JobSet

JOBSET_HEADER = ["id", "start", "end", "height"]
PLACEMENT_HEADER = ["id", "start", "end", "height", "address"]


class FormatError(ValueError):
    def __init__(self, message: str, source: str = "", lineno: int = None):
        where = source
        if lineno is not None:
            where = f"{source}:{lineno}" if source else f"line {lineno}"
        super().__init__(f"{where}: {message}" if where else message)


def _rows(text: str, header: list, source: str):
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise FormatError("empty file, expected a header", source, 1) from None
    if [c.strip() for c in first] != header:
        raise FormatError(f"expected header {','.join(header)}", source, 1)
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(row)}", source, lineno)
        try:
            yield lineno, [int(c) for c in row]
        except ValueError:
            raise FormatError(f"non-integer field in {row}", source, lineno) from None


def jobset_to_csv(jobs: JobSet) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(JOBSET_HEADER)
    for j in jobs:
        w.writerow([j.id, j.t_s, j.t_e, j.h])
    return out.getvalue()


def jobset_from_csv(text: str, source: str = "") -> JobSet:
    jobs = []
    for lineno, (i, s, e, h) in _rows(text, JOBSET_HEADER, source):
        try:
            jobs.append(Job(i, s, e, h))
        except ValueError as exc:
            raise FormatError(str(exc), source, lineno) from None
    try:
        return JobSet(jobs, max((j.t_e for j in jobs), default=0))
    except ValueError as exc:
        raise FormatError(str(exc), source) from None


def placement_to_csv(placement: Placement) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(PLACEMENT_HEADER)
    for j in placement:
        w.writerow([j.id, j.t_s, j.t_e, j.h, j.p])
    return out.getvalue()


def placement_from_csv(text: str, label: str = "", source: str = "") -> Placement:
    jobs = []
    for lineno, (i, s, e, h, p) in _rows(text, PLACEMENT_HEADER, source):
        try:
            jobs.append(PlacedJob(i, s, e, h, p))
        except ValueError as exc:
            raise FormatError(str(exc), source, lineno) from None
    try:
        return Placement(jobs, label)
    except ValueError as exc:
        raise FormatError(str(exc), source) from None


def read_placement(path: Union[str, Path], label: str = None) -> Placement:
    path = Path(path)
    return placement_from_csv(path.read_text(), label or path.stem, str(path))


def metrics_to_json(metrics: dict) -> str:
    return json.dumps(metrics, indent=2) + "\n"
