"""Command line front end: gen, simulate, pack, metrics, compare, render, validate."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import baseline, boxing, formats, metrics, report
from .trace import (
    Lifetime,
    TraceError,
    close_leaks,
    generate_trace,
    jobs_from_trace,
    parse_size_dist,
    parse_sizing,
    parse_trace,
    serialize_trace,
    validate_trace,
)

log = logging.getLogger("dsapack")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_RETRIES = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _configure_logging():
    level = os.environ.get("DSAPACK_LOG", "warn").upper()
    level = {"WARN": "WARNING"}.get(level, level)
    if level not in ("ERROR", "WARNING", "INFO", "DEBUG"):
        level = "WARNING"
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


def _write(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_trace(path: str, close: bool = False):
    p = Path(path)
    try:
        trace = parse_trace(p.read_text(), name=p.stem)
    except TraceError as exc:
        raise TraceError(f"{path}: {exc}") from None
    if close:
        trace = close_leaks(trace)
    return trace


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _emit_placement(placement, path):
    # self-check: never write an invalid placement
    metrics.require_valid(placement.jobs)
    _write(formats.placement_to_csv(placement), path)


def cmd_gen(args):
    dist = parse_size_dist(args.size_dist)
    trace = generate_trace(
        args.jobs, dist, Lifetime(args.lifetime_mean, args.long_fraction), seed=args.seed
    )
    _write(serialize_trace(trace), args.output)
    return EXIT_OK


def cmd_simulate(args):
    trace = _load_trace(args.trace, args.close_leaks)
    placement = baseline.simulate(trace, parse_sizing(args.sizing), args.policy)
    _emit_placement(placement, args.output)
    return EXIT_OK


def cmd_pack(args):
    trace = _load_trace(args.trace, args.close_leaks)
    jobs = jobs_from_trace(trace, parse_sizing(args.sizing))
    config = boxing.BAConfig(
        seed=args.seed,
        max_iterations=args.max_retries,
        depth_limit=args.depth_limit,
        log_base=args.log_base,
    )
    try:
        placement, diag = boxing.run_ba(jobs.jobs, config)
    except boxing.RetriesExhausted as exc:
        if args.diagnostics and exc.diagnostics is not None:
            Path(args.diagnostics).write_text(exc.diagnostics.to_json())
        print(f"error: {exc} (best boxed count {exc.boxed_count})", file=sys.stderr)
        return EXIT_RETRIES
    _emit_placement(placement, args.output)
    if args.diagnostics:
        Path(args.diagnostics).write_text(diag.to_json())
    return EXIT_OK


def cmd_metrics(args):
    placement = formats.read_placement(args.placement)
    m = metrics.placement_metrics(placement, args.page_size)
    if args.json:
        _write(json.dumps(m) + "\n", args.output)
    else:
        _write(formats.metrics_to_json(m), args.output)
    return EXIT_OK


def cmd_compare(args):
    placements = [formats.read_placement(args.ideal, report.ORACLE_LABEL)]
    placements += [formats.read_placement(p) for p in args.others]
    rows = report.compare(
        [(p.label, p) for p in placements],
        args.page_size,
        workload=args.workload or Path(args.ideal).stem,
        bound_ratio_divisor=args.bound_ratio_divisor,
    )
    if args.format == "json":
        _write(report.comparison_to_json(rows), args.output)
    else:
        _write(report.comparison_to_csv(rows), args.output)
    return EXIT_OK


def cmd_render(args):
    placement = formats.read_placement(args.placement)
    svg = report.render_svg(
        placement,
        page_gridlines=args.page_gridlines,
        width_px=args.width,
        height_px=args.height,
        page_size=args.page_size,
    )
    _write(svg, args.output)
    return EXIT_OK


def _looks_like_placement(text: str) -> bool:
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            return line.strip().startswith("id,")
    return False


def cmd_validate(args):
    text = Path(args.file).read_text()
    if _looks_like_placement(text):
        placement = formats.placement_from_csv(text, source=args.file)
        conflicts = metrics.validate_placement(placement.jobs)
        if conflicts:
            shown = " ".join(f"{a}-{b}" for a, b in conflicts[:10])
            print(f"invalid placement, {len(conflicts)} conflicts: {shown}")
            return EXIT_INPUT
        print(f"valid placement, {len(placement)} jobs")
        return EXIT_OK
    trace = parse_trace(text, name=Path(args.file).stem, strict=False)
    rep = validate_trace(trace, close_leaks=args.close_leaks)
    print(rep.summary())
    for err in rep.errors:
        print(f"  {err}")
    if rep.leaked_ids:
        print("  leaked ids: " + " ".join(map(str, rep.leaked_ids[:20])))
    return EXIT_OK if rep.well_formed else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dsapack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic trace")
    p.add_argument("--jobs", type=_non_negative, required=True)
    p.add_argument("--size-dist", default="uniform:8:512", help="uniform:LO:HI or pareto:SCALE:SHAPE[:CAP]")
    p.add_argument("--lifetime-mean", type=float, default=16.0)
    p.add_argument("--long-fraction", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="replay a trace through first-fit or best-fit")
    p.add_argument("--policy", choices=baseline.POLICIES, default=baseline.FIRST_FIT)
    p.add_argument("--sizing", default="identity", help="identity or round:Q")
    p.add_argument("--close-leaks", action="store_true")
    p.add_argument("trace")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pack", help="compute the offline boxing placement")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-retries", type=_positive, default=100)
    p.add_argument("--depth-limit", type=_positive, default=64)
    p.add_argument("--log-base", type=float, default=10.0)
    p.add_argument("--sizing", default="identity")
    p.add_argument("--close-leaks", action="store_true")
    p.add_argument("trace")
    p.add_argument("-o", "--output")
    p.add_argument("--diagnostics")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("metrics", help="makespan, load, fragmentation and bounds")
    p.add_argument("--page-size", type=_positive, default=metrics.DEFAULT_PAGE_SIZE)
    p.add_argument("--json", action="store_true", help="single-line JSON")
    p.add_argument("placement")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("compare", help="compare placements against the offline one")
    p.add_argument("--page-size", type=_positive, default=metrics.DEFAULT_PAGE_SIZE)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workload")
    p.add_argument("--bound-ratio-divisor", type=float, default=1.0)
    p.add_argument("ideal")
    p.add_argument("others", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("render", help="draw a placement as SVG")
    p.add_argument("--page-gridlines", action="store_true")
    p.add_argument("--page-size", type=_positive, default=metrics.DEFAULT_PAGE_SIZE)
    p.add_argument("--width", type=_positive, default=800)
    p.add_argument("--height", type=_positive, default=400)
    p.add_argument("placement")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("validate", help="check a trace or a placement CSV")
    p.add_argument("--close-leaks", action="store_true")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TraceError, formats.FormatError, metrics.InvalidPlacement, report.JobSetMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
