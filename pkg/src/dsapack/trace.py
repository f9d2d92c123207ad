"""Allocation traces and their conversion to unplaced jobs.

A trace is a sequence of ``a <id> <size>`` / ``f <id>`` requests. Time is
measured in allocated bytes: every allocation advances the clock by its
(sized) height, frees leave it untouched.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

__all__ = [
    "ALLOC",
    "FREE",
    "Request",
    "Trace",
    "TraceError",
    "Identity",
    "RoundUpToMultiple",
    "SizingPolicy",
    "Job",
    "JobSet",
    "ValidationReport",
    "Uniform",
    "Pareto",
    "Lifetime",
    "parse_trace",
    "serialize_trace",
    "validate_trace",
    "close_leaks",
    "jobs_from_trace",
    "generate_trace",
]

ALLOC = "a"
FREE = "f"


class TraceError(ValueError):
    """Raised for malformed or ill-formed traces."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class FreeOfUnknownId(TraceError):
    def __init__(self, job_id: int, lineno: Optional[int] = None):
        super().__init__(f"free of unknown id {job_id}", lineno)
        self.job_id = job_id


class DuplicateAllocId(TraceError):
    def __init__(self, job_id: int, lineno: Optional[int] = None):
        super().__init__(f"duplicate allocation id {job_id}", lineno)
        self.job_id = job_id


@dataclass(frozen=True)
class Request:
    kind: str
    id: int
    size: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (ALLOC, FREE):
            raise ValueError(f"unknown request kind {self.kind!r}")
        if self.id < 0:
            raise ValueError("request ids are non-negative")
        if self.kind == ALLOC:
            if self.size is None or self.size < 1:
                raise ValueError("allocation size must be >= 1")
        elif self.size is not None:
            raise ValueError("free requests carry no size")


@dataclass(frozen=True)
class Trace:
    requests: tuple = ()
    name: str = ""

    def __len__(self):
        return len(self.requests)

    @property
    def allocs(self) -> list:
        return [r for r in self.requests if r.kind == ALLOC]


# -- sizing ------------------------------------------------------------------


@dataclass(frozen=True)
class Identity:
    def size(self, n: int) -> int:
        return n


@dataclass(frozen=True)
class RoundUpToMultiple:
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("rounding quantum must be >= 1")

    def size(self, n: int) -> int:
        return -(-n // self.q) * self.q


SizingPolicy = Union[Identity, RoundUpToMultiple]


def parse_sizing(text: str) -> SizingPolicy:
    """Parse ``identity`` or ``round:Q``."""
    if text == "identity":
        return Identity()
    if text.startswith("round:"):
        return RoundUpToMultiple(int(text[len("round:"):]))
    raise ValueError(f"unknown sizing policy {text!r}")


# -- jobs --------------------------------------------------------------------


@dataclass(frozen=True)
class Job:
    id: int
    t_s: int
    t_e: int
    h: int

    def __post_init__(self):
        if self.h < 1:
            raise ValueError(f"job {self.id}: height must be >= 1")
        if self.t_e < self.t_s:
            raise ValueError(f"job {self.id}: ends before it starts")

    @property
    def area(self) -> int:
        return (self.t_e - self.t_s) * self.h


@dataclass
class JobSet:
    jobs: list = field(default_factory=list)
    clock_end: int = 0

    def __post_init__(self):
        ids = [j.id for j in self.jobs]
        if len(set(ids)) != len(ids):
            raise ValueError("job ids must be unique")
        if any(j.t_e > self.clock_end for j in self.jobs):
            raise ValueError("job ends after clock_end")

    def __len__(self):
        return len(self.jobs)

    def __iter__(self):
        return iter(self.jobs)


# -- parsing -----------------------------------------------------------------


def parse_trace(
    text: Union[str, bytes, Iterable[str]], name: str = "", strict: bool = True
) -> Trace:
    """Parse the line format; ``#`` lines and blank lines are skipped.

    With ``strict`` off only syntax is checked, so that ill-formed traces can
    still be handed to :func:`validate_trace` for a full report.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.splitlines() if isinstance(text, str) else text

    requests = []
    live = set()
    seen = set()
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == ALLOC and len(parts) == 3:
                job_id, size = int(parts[1]), int(parts[2])
                req = Request(ALLOC, job_id, size)
            elif parts[0] == FREE and len(parts) == 2:
                req = Request(FREE, int(parts[1]))
            else:
                raise ValueError(f"cannot parse {line!r}")
        except ValueError as exc:
            raise TraceError(str(exc), lineno) from None

        if not strict:
            pass
        elif req.kind == ALLOC:
            if req.id in seen:
                raise DuplicateAllocId(req.id, lineno)
            seen.add(req.id)
            live.add(req.id)
        else:
            if req.id not in live:
                raise FreeOfUnknownId(req.id, lineno)
            live.discard(req.id)
        requests.append(req)
    return Trace(tuple(requests), name)


def serialize_trace(trace: Trace) -> str:
    out = io.StringIO()
    if trace.name:
        out.write(f"# {trace.name}\n")
    for r in trace.requests:
        if r.kind == ALLOC:
            out.write(f"a {r.id} {r.size}\n")
        else:
            out.write(f"f {r.id}\n")
    return out.getvalue()


# -- validation --------------------------------------------------------------


@dataclass
class ValidationReport:
    well_formed: bool
    leaked_ids: list = field(default_factory=list)
    synthesized_frees: int = 0
    errors: list = field(default_factory=list)

    def summary(self) -> str:
        state = "well-formed" if self.well_formed else "NOT well-formed"
        return f"{state}, {len(self.leaked_ids)} leaks"


def validate_trace(trace: Trace, close_leaks: bool = False) -> ValidationReport:
    """Check well-formedness. Never raises; problems land in the report.

    Leaked allocations make the trace ill-formed unless ``close_leaks`` is
    set, in which case they are counted as synthesized frees.
    """
    errors = []
    live = {}
    seen = set()
    for pos, r in enumerate(trace.requests):
        if r.kind == ALLOC:
            if r.id in seen:
                errors.append(f"request {pos}: duplicate allocation id {r.id}")
            seen.add(r.id)
            live[r.id] = pos
        elif r.id in live:
            del live[r.id]
        elif r.id in seen:
            errors.append(f"request {pos}: double free of id {r.id}")
        else:
            errors.append(f"request {pos}: free of unknown id {r.id}")

    leaked = sorted(live, key=live.get)
    well_formed = not errors and (close_leaks or not leaked)
    return ValidationReport(
        well_formed=well_formed,
        leaked_ids=leaked,
        synthesized_frees=len(leaked) if close_leaks else 0,
        errors=errors,
    )


def close_leaks(trace: Trace) -> Trace:
    """Append frees for every leaked allocation, in allocation order."""
    report = validate_trace(trace, close_leaks=True)
    if report.errors:
        raise TraceError("; ".join(report.errors))
    extra = tuple(Request(FREE, i) for i in report.leaked_ids)
    return Trace(trace.requests + extra, trace.name)


def jobs_from_trace(trace: Trace, sizing: Optional[SizingPolicy] = None) -> JobSet:
    """Convert a well-formed trace into jobs on the byte-time clock.

    A job starts at the clock value before its own increment and ends at
    the clock value current when it is freed.
    """
    sizing = sizing or Identity()
    report = validate_trace(trace)
    if not report.well_formed:
        problems = report.errors + [f"leaked id {i}" for i in report.leaked_ids]
        raise TraceError("trace is not well-formed: " + "; ".join(problems[:5]))

    clock = 0
    open_jobs = {}
    order = []
    done = {}
    for r in trace.requests:
        if r.kind == ALLOC:
            h = sizing.size(r.size)
            open_jobs[r.id] = (clock, h)
            order.append(r.id)
            clock += h
        else:
            t_s, h = open_jobs.pop(r.id)
            done[r.id] = Job(r.id, t_s, clock, h)
    return JobSet([done[i] for i in order], clock)


# -- synthetic traces --------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    lo: int
    hi: int

    def __post_init__(self):
        if not 1 <= self.lo <= self.hi:
            raise ValueError("Uniform needs 1 <= lo <= hi")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.integers(self.lo, self.hi, size=n, endpoint=True)


@dataclass(frozen=True)
class Pareto:
    scale: float
    shape: float
    cap: int = 1 << 20

    def __post_init__(self):
        if self.scale < 1 or self.shape <= 0 or self.cap < self.scale:
            raise ValueError("Pareto needs scale >= 1, shape > 0, cap >= scale")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raw = np.ceil(self.scale * (1.0 + rng.pareto(self.shape, size=n)))
        return np.minimum(raw, self.cap).astype(np.int64)


@dataclass(frozen=True)
class Lifetime:
    """Lifetimes counted in subsequent allocations, geometrically distributed.

    ``long_fraction`` of the jobs live until the end of the trace.
    """

    mean: float = 16.0
    long_fraction: float = 0.02

    def __post_init__(self):
        if self.mean < 1 or not 0 <= self.long_fraction <= 1:
            raise ValueError("Lifetime needs mean >= 1 and long_fraction in [0, 1]")


def parse_size_dist(text: str):
    """Parse ``uniform:LO:HI`` or ``pareto:SCALE:SHAPE[:CAP]``."""
    kind, *args = text.split(":")
    try:
        if kind == "uniform" and len(args) == 2:
            return Uniform(int(args[0]), int(args[1]))
        if kind == "pareto" and len(args) in (2, 3):
            cap = int(args[2]) if len(args) == 3 else 1 << 20
            return Pareto(float(args[0]), float(args[1]), cap)
    except ValueError as exc:
        raise ValueError(f"bad size distribution {text!r}: {exc}") from None
    raise ValueError(f"bad size distribution {text!r}")


def generate_trace(
    n_jobs: int,
    size_dist=Uniform(8, 512),
    lifetime_dist: Lifetime = Lifetime(),
    seed: int = 0,
    name: str = "",
) -> Trace:
    """Draw a well-formed, leak-free synthetic trace."""
    if n_jobs < 0:
        raise ValueError("n_jobs must be >= 0")
    rng = np.random.default_rng(seed)
    sizes = size_dist.sample(rng, n_jobs)
    lifetimes = rng.geometric(1.0 / lifetime_dist.mean, size=n_jobs)
    forever = rng.random(n_jobs) < lifetime_dist.long_fraction
    # Job i is freed right after allocation i + lifetime; death >= n means end of trace.
    death = np.where(forever, n_jobs, np.arange(n_jobs) + lifetimes)

    dying = {}
    for i in range(n_jobs):
        dying.setdefault(int(min(death[i], n_jobs)), []).append(i)

    requests = []
    for i in range(n_jobs):
        requests.append(Request(ALLOC, i, int(sizes[i])))
        for j in dying.pop(i, []):
            requests.append(Request(FREE, j))
    for j in sorted(i for ids in dying.values() for i in ids):
        requests.append(Request(FREE, j))
    return Trace(tuple(requests), name or f"synthetic-{n_jobs}-{seed}")
