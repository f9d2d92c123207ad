"""Comparison tables against the offline oracle, and SVG placement plots."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from typing import Optional, Union
from xml.sax.saxutils import escape

from .metrics import (
    DEFAULT_PAGE_SIZE,
    Placement,
    bounds,
    fragmentation,
    load_profile,
    makespan,
    require_valid,
)

ORACLE_LABEL = "idealloc"
ORACLE_ZERO = "oracle-zero"

Ratio = Union[float, str, None]


@dataclass
class ComparisonRow:
    workload: str
    n_jobs: int
    setting: str
    L: int
    h_max: int
    robson: Optional[int]
    ba_upper: int
    makespan: int
    fragmentation: float
    makespan_vs_robson: Ratio
    makespan_vs_ba_bound: Ratio
    makespan_vs_oracle: Ratio
    frag_vs_oracle: Ratio


COMPARISON_HEADER = [f.name for f in fields(ComparisonRow)]


class JobSetMismatch(ValueError):
    pass


def _signature(placement: Placement):
    return sorted((j.id, j.t_s, j.t_e, j.h) for j in placement)


def _ratio(num, den) -> Ratio:
    if den is None:
        return None
    if den == 0:
        return 1.0 if num == 0 else ORACLE_ZERO
    return num / den


def compare(
    rows: list,
    page_size: int = DEFAULT_PAGE_SIZE,
    workload: str = "",
    bound_ratio_divisor: float = 1.0,
) -> list:
    """One :class:`ComparisonRow` per ``(label, placement)`` pair.

    Cross ratios are taken against the row labeled ``idealloc``, or the
    first row when there is none. A nonzero fragmentation over a zero
    reference is reported as ``"oracle-zero"`` instead of a number.
    """
    if not rows:
        return []
    reference_sig = _signature(rows[0][1])
    for label, placement in rows[1:]:
        if _signature(placement) != reference_sig:
            raise JobSetMismatch(f"placement {label!r} covers a different job set")

    profile = load_profile(rows[0][1].jobs)
    bnd = bounds(profile, bound_ratio_divisor) if profile.L else None
    measured = []
    for label, placement in rows:
        measured.append((label, makespan(placement.jobs), fragmentation(placement.jobs, page_size).F))
    ref = next((m for m in measured if m[0] == ORACLE_LABEL), measured[0])

    out = []
    for label, ms, frag in measured:
        out.append(
            ComparisonRow(
                workload=workload,
                n_jobs=len(reference_sig),
                setting=label,
                L=profile.L,
                h_max=profile.h_max,
                robson=bnd.robson if bnd else None,
                ba_upper=bnd.ba_upper if bnd else 0,
                makespan=ms,
                fragmentation=frag,
                makespan_vs_robson=_ratio(ms, bnd.robson) if bnd else None,
                makespan_vs_ba_bound=_ratio(ms, bnd.ba_upper) if bnd else None,
                makespan_vs_oracle=_ratio(ms, ref[1]),
                frag_vs_oracle=_ratio(frag, ref[2]),
            )
        )
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def comparison_to_csv(rows: list) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COMPARISON_HEADER)
    for row in rows:
        w.writerow([_fmt(getattr(row, name)) for name in COMPARISON_HEADER])
    return out.getvalue()


def _parse_cell(name: str, cell: str):
    if cell == "":
        return None
    if cell == ORACLE_ZERO:
        return cell
    if name in ("workload", "setting"):
        return cell
    if "." in cell:
        return float(cell)
    return int(cell)


def comparison_from_csv(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != COMPARISON_HEADER:
        raise ValueError("unexpected comparison header")
    return [
        ComparisonRow(**{n: _parse_cell(n, c) for n, c in zip(header, row)})
        for row in reader
        if row
    ]


def comparison_to_json(rows: list) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2) + "\n"


def comparison_from_json(text: str) -> list:
    return [ComparisonRow(**d) for d in json.loads(text)]


# -- SVG ---------------------------------------------------------------------


def job_color(job_id: int) -> str:
    hue = (job_id * 137.508) % 360
    return f"hsl({hue:.1f},65%,55%)"


def render_svg(
    placement: Placement,
    page_gridlines: bool = False,
    width_px: int = 800,
    height_px: int = 400,
    page_size: int = DEFAULT_PAGE_SIZE,
    max_gridlines: int = 256,
) -> str:
    """Plot jobs as rectangles: byte-time to the right, addresses upward."""
    require_valid(placement.jobs)
    jobs = sorted(placement.jobs, key=lambda j: j.id)
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width_px}" height="{height_px}" viewBox="0 0 {width_px} {height_px}">\n'
    )
    title = escape(placement.label or "placement")
    lines = [head, f"<title>{title}</title>\n"]
    if jobs:
        t0 = min(j.t_s for j in jobs)
        t1 = max(j.t_e for j in jobs)
        a0 = min(j.p for j in jobs)
        a1 = max(j.p + j.h for j in jobs)
        sx = width_px / max(t1 - t0, 1)
        sy = height_px / max(a1 - a0, 1)
        if page_gridlines:
            first = -(-a0 // page_size) * page_size
            marks = range(first, a1 + 1, page_size)
            if len(marks) <= max_gridlines:
                for a in marks:
                    y = height_px - (a - a0) * sy
                    lines.append(
                        f'<line x1="0" y1="{y:.3f}" x2="{width_px}" y2="{y:.3f}" '
                        'stroke="#999999" stroke-width="0.5" stroke-dasharray="4,2"/>\n'
                    )
        for j in jobs:
            x = (j.t_s - t0) * sx
            y = height_px - (j.p + j.h - a0) * sy
            lines.append(
                f'<rect x="{x:.3f}" y="{y:.3f}" width="{(j.t_e - j.t_s) * sx:.3f}" '
                f'height="{j.h * sy:.3f}" fill="{job_color(j.id)}" '
                f'data-id="{j.id}" data-start="{j.t_s}" data-end="{j.t_e}" '
                f'data-address="{j.p}" data-height="{j.h}"/>\n'
            )
    lines.append("</svg>\n")
    return "".join(lines)
