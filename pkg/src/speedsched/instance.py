"""Problem model: jobs, instances, solver configuration, and the interval grid.

The grid partitions the time horizon at every distinct release date and
deadline.  Within one grid interval the set of alive jobs is constant, which
is what every downstream computation relies on.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import (
    BadAlpha,
    BadMachineCount,
    DuplicateJobId,
    EmptyInstance,
    EmptySpan,
    NonPositiveWork,
    ValidationError,
)


@dataclass(frozen=True)
class Job:
    """One job: ``work`` units to finish inside the window [release, deadline]."""

    id: str
    work: float
    release: float
    deadline: float


@dataclass(frozen=True)
class Instance:
    jobs: tuple[Job, ...]
    machines: int
    alpha: float


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs.

    speed_tolerance: absolute termination gap for speed/makespan searches.
        ``None`` means "pick 1e-9 times the initial upper speed bound".
    flow_tolerance: relative tolerance for saturation and feasibility
        comparisons on flow networks.
    max_iterations_guard: hard cap on search iterations; hitting it means a
        bug, not a hard instance.
    """

    speed_tolerance: float | None = None
    flow_tolerance: float = 1e-9
    max_iterations_guard: int = 200

    def __post_init__(self) -> None:
        if self.speed_tolerance is not None and not self.speed_tolerance > 0:
            raise ValidationError("speed_tolerance must be positive")
        if not self.flow_tolerance > 0:
            raise ValidationError("flow_tolerance must be positive")
        if self.max_iterations_guard < 1:
            raise ValidationError("max_iterations_guard must be >= 1")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class GridInterval:
    """One cell of the grid: [start, end] with its alive jobs and machine count."""

    start: float
    end: float
    length: float
    alive: tuple[str, ...]
    machines: int


@dataclass(frozen=True)
class IntervalGrid:
    breakpoints: tuple[float, ...]
    intervals: tuple[GridInterval, ...]

    @property
    def horizon(self) -> tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]


def job_density(job: Job) -> float:
    """Work divided by window length: the least constant speed that fits the job alone."""
    return job.work / (job.deadline - job.release)


def validate_instance(raw: Instance) -> Instance:
    """Check all model invariants, returning the instance unchanged if they hold."""
    if not raw.jobs:
        raise EmptyInstance("instance has no jobs")
    if not isinstance(raw.machines, int) or raw.machines < 1:
        raise BadMachineCount(f"machines must be a positive integer, got {raw.machines!r}")
    if not raw.alpha > 1:
        raise BadAlpha(f"alpha must be > 1, got {raw.alpha!r}")
    seen: set[str] = set()
    for job in raw.jobs:
        if job.id in seen:
            raise DuplicateJobId(f"duplicate job id {job.id!r}")
        seen.add(job.id)
        if not job.work > 0:
            raise NonPositiveWork(f"job {job.id!r} has work {job.work!r}")
        if not job.deadline > job.release:
            raise EmptySpan(
                f"job {job.id!r} has empty window [{job.release!r}, {job.deadline!r}]"
            )
    return raw


def build_interval_grid(jobs: Iterable[Job], machines: int) -> IntervalGrid:
    """Partition the horizon at all distinct releases and deadlines.

    Breakpoints are deduplicated by exact float equality: instances are
    authored, not measured, so no epsilon merging is applied.
    """
    jobs = list(jobs)
    points = sorted({t for j in jobs for t in (j.release, j.deadline)})
    intervals = []
    for start, end in zip(points, points[1:]):
        alive = tuple(sorted(j.id for j in jobs if j.release <= start and end <= j.deadline))
        intervals.append(
            GridInterval(start=start, end=end, length=end - start, alive=alive, machines=machines)
        )
    return IntervalGrid(breakpoints=tuple(points), intervals=tuple(intervals))


# --- JSON interchange -------------------------------------------------------
#
# Instance files are `{"alpha": <num>, "machines": <int>,
#   "jobs": [{"id": <string>, "work": <num>, "release": <num>, "deadline": <num>}, ...]}`.


def _number(obj: dict, key: str, where: str) -> float:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: field {key!r} must be a number, got {value!r}")
    return float(value)


def instance_from_json_obj(obj: object) -> Instance:
    if not isinstance(obj, dict):
        raise ValidationError("instance JSON must be an object")
    machines = obj.get("machines")
    if isinstance(machines, bool) or not isinstance(machines, int):
        raise ValidationError(f"field 'machines' must be an integer, got {machines!r}")
    alpha = _number(obj, "alpha", "instance")
    raw_jobs = obj.get("jobs")
    if not isinstance(raw_jobs, list):
        raise ValidationError("field 'jobs' must be a list")
    jobs = []
    for k, rj in enumerate(raw_jobs):
        if not isinstance(rj, dict):
            raise ValidationError(f"jobs[{k}] must be an object")
        job_id = rj.get("id")
        if not isinstance(job_id, str):
            raise ValidationError(f"jobs[{k}]: field 'id' must be a string, got {job_id!r}")
        jobs.append(
            Job(
                id=job_id,
                work=_number(rj, "work", f"jobs[{k}]"),
                release=_number(rj, "release", f"jobs[{k}]"),
                deadline=_number(rj, "deadline", f"jobs[{k}]"),
            )
        )
    return validate_instance(Instance(jobs=tuple(jobs), machines=machines, alpha=alpha))


def instance_from_json(text: str) -> Instance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from exc
    return instance_from_json_obj(obj)


def instance_to_json_obj(instance: Instance) -> dict:
    return {
        "alpha": instance.alpha,
        "machines": instance.machines,
        "jobs": [
            {"id": j.id, "work": j.work, "release": j.release, "deadline": j.deadline}
            for j in instance.jobs
        ],
    }


def with_overrides(instance: Instance, machines: int | None = None, alpha: float | None = None) -> Instance:
    """Return a copy with machine count and/or exponent replaced, revalidated."""
    updated = instance
    if machines is not None:
        updated = replace(updated, machines=machines)
    if alpha is not None:
        updated = replace(updated, alpha=alpha)
    return validate_instance(updated)
