"""Outer optimization loop: assign every job its lowest sustainable speed.

Each round finds the least common speed at which the remaining jobs still
fit (a parametric search driven by max-flow feasibility probes), retires the
jobs that cannot run any slower, converts the processor time they will
occupy into reduced per-interval machine counts, and repeats on the rest.
Retired jobs keep the speed of their round, which only decreases over
rounds, so every job ends at the smallest speed any feasible schedule can
give it.

Criticality is read off the residual graph of the max flow at the critical
speed: a job is stuck exactly when its node has no residual path to the
sink, and an interval is exhausted ("tight") exactly when its node has
none.  This matches the classification obtained from a minimum cut at any
speed slightly below critical, without having to pick the perturbation.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import (
    InfeasibleAtUpperBound,
    InternalInvariantError,
    IterationGuardExceeded,
    NegativeCapacity,
    NoCriticalJobFound,
)
from .flownet import (
    FlowResult,
    _co_reachable,
    _reachable,
    interval_node,
    job_node,
    wap_feasible,
)
from .instance import (
    DEFAULT_CONFIG,
    GridInterval,
    Instance,
    IntervalGrid,
    Job,
    SolverConfig,
    build_interval_grid,
    job_density,
    validate_instance,
)

# retired jobs must fill each non-exhausted alive interval end to end;
# larger deviations mean the critical classification went wrong
_FULL_INTERVAL_SLACK = 1e-7


@dataclass(frozen=True)
class SpeedAssignment:
    """Final per-job speeds plus the round each job was fixed in."""

    speeds: dict[str, float]
    iteration: dict[str, int]
    crit_speeds: tuple[float, ...]


@dataclass(frozen=True)
class BalStep:
    step: int
    s_crit: float
    critical_jobs: tuple[str, ...]
    tight_intervals: tuple[int, ...]
    machine_updates: tuple[tuple[int, int, int], ...]  # (interval, before, after)
    full_interval_slack: float


@dataclass(frozen=True)
class BalTrace:
    steps: tuple[BalStep, ...]
    breakpoints: tuple[float, ...]

    def to_json_obj(self) -> list:
        out = []
        for st in self.steps:
            out.append(
                {
                    "step": st.step,
                    "s_crit": st.s_crit,
                    "critical_jobs": list(st.critical_jobs),
                    "tight_intervals": [
                        [self.breakpoints[k], self.breakpoints[k + 1]]
                        for k in st.tight_intervals
                    ],
                }
            )
        return out


def speed_bounds(grid: IntervalGrid, jobs: list[Job]) -> tuple[float, float]:
    """Bracket for the first critical speed.

    No feasible common speed is below the largest job density, and the
    largest of (densest interval load, largest density) always admits a
    schedule, so the true critical speed lies inside the bracket.
    """
    max_den = max(job_density(j) for j in jobs)
    works = {j.id: j.work for j in jobs}
    interval_load = 0.0
    for iv in grid.intervals:
        if iv.alive:
            interval_load = max(interval_load, sum(works[i] for i in iv.alive) / iv.length)
    return max_den, max(interval_load, max_den)


def _cut_candidate(flow: FlowResult, jobs: list[Job], tol: float) -> float | None:
    """Critical-speed candidate from the minimum cut of an infeasible probe.

    For the source-side node set X of the cut, every feasible common speed v
    satisfies  sum(w_i for x_i in X) / v  <=  capacity of the non-source cut
    arcs, so the ratio is a lower bound on the critical speed; if it probes
    feasible it *is* the critical speed.
    """
    network = flow.network
    seen = _reachable(network, flow, network.source, tol)
    names = network.node_names
    work_by_id = {j.id: j.work for j in jobs}
    numerator = 0.0
    for i, name in enumerate(names):
        if seen[i] and name.startswith("x:"):
            numerator += work_by_id[name[2:]]
    fixed_cap = 0.0
    head, caps = network.arc_head, network.arc_cap
    for a in range(0, len(head), 2):
        tail = head[a ^ 1]
        if seen[tail] and not seen[head[a]] and tail != network.source:
            fixed_cap += caps[a]
    if numerator <= 0.0 or fixed_cap <= 0.0:
        return None
    return numerator / fixed_cap


def find_critical_speed(
    grid: IntervalGrid,
    jobs: list[Job],
    s_lb: float,
    s_ub: float,
    config: SolverConfig = DEFAULT_CONFIG,
) -> tuple[float, FlowResult]:
    """Least common speed at which all jobs fit, with its witnessing flow.

    Bisection over [s_lb, s_ub] where each infeasible probe also yields a
    cut-derived candidate speed: the candidate is always a lower bound on
    the answer, so the first candidate that probes feasible is exact and the
    search stops there.  Otherwise the bracket shrinks until it is narrower
    than the speed tolerance and the feasible endpoint is returned.
    """
    tol = config.speed_tolerance if config.speed_tolerance is not None else 1e-9 * s_ub
    feasible, flow = wap_feasible(grid, jobs, s_lb, config)
    if feasible:
        return s_lb, flow
    lo, flow_lo = s_lb, flow
    feasible, flow_hi = wap_feasible(grid, jobs, s_ub, config)
    if not feasible:
        raise InfeasibleAtUpperBound(
            f"work assignment infeasible at upper speed bound {s_ub!r}"
        )
    hi = s_ub
    for _ in range(config.max_iterations_guard):
        if hi - lo <= tol:
            return hi, flow_hi
        candidate = _cut_candidate(flow_lo, jobs, config.flow_tolerance)
        use_candidate = candidate is not None and lo < candidate < hi
        probe = candidate if use_candidate else 0.5 * (lo + hi)
        feasible, flow = wap_feasible(grid, jobs, probe, config)
        if feasible:
            if use_candidate:
                return probe, flow  # lower bound met feasibility: exact
            hi, flow_hi = probe, flow
        else:
            lo, flow_lo = probe, flow
    raise IterationGuardExceeded("critical-speed search did not converge")


def find_critical_jobs(
    grid: IntervalGrid,
    jobs: list[Job],
    s_crit: float,
    flow: FlowResult,
    config: SolverConfig = DEFAULT_CONFIG,
) -> tuple[set[str], set[int]]:
    """Jobs that cannot run below ``s_crit``, and the intervals they exhaust.

    A job is critical iff its node has no residual path to the sink; an
    interval is tight iff its node has none (its sink arc then lies in a
    minimum cut, so all flow through it belongs to critical jobs).
    """
    network = flow.network
    demand = sum(j.work for j in jobs) / s_crit
    if demand - flow.value > config.flow_tolerance * demand:
        raise InternalInvariantError(
            "criticality classification needs a flow certifying feasibility"
        )
    seen = _co_reachable(network, flow, network.sink, config.flow_tolerance)
    critical = {
        j.id for j in jobs if not seen[network.node_index[job_node(j.id)]]
    }
    tight = {
        k
        for k, iv in enumerate(grid.intervals)
        if iv.machines > 0 and not seen[network.node_index[interval_node(k)]]
    }
    if not critical:
        raise NoCriticalJobFound(
            "no critical job at the computed speed; tolerances too loose for this instance"
        )
    return critical, tight


def retire_critical_jobs(
    grid: IntervalGrid,
    critical: set[str],
    tight: set[int],
    flow: FlowResult,
    config: SolverConfig = DEFAULT_CONFIG,
) -> IntervalGrid:
    """Remove retired jobs from the grid and charge their machine usage.

    Tight intervals lose all machines (their whole capacity is flow of
    critical jobs); elsewhere each retired alive job runs wall to wall and
    takes exactly one machine with it.  Both facts are asserted against the
    witnessing flow before the update is trusted.
    """
    network = flow.network
    res = flow.residual
    # t_{i,j} for retired jobs, read straight off their middle arcs
    times: dict[tuple[str, int], float] = {}
    for jid in critical:
        x = network.node_index[job_node(jid)]
        for a in network.adj[x]:
            if a % 2 == 0:  # forward arc
                name = network.node_names[network.arc_head[a]]
                if name.startswith("y:"):
                    times[(jid, int(name[2:]))] = res[a ^ 1]
    new_intervals = []
    for k, iv in enumerate(grid.intervals):
        retired_here = [i for i in iv.alive if i in critical]
        if k in tight:
            machines = 0
        else:
            machines = iv.machines - len(retired_here)
            if machines < 0:
                raise NegativeCapacity(
                    f"interval {k} would need {len(retired_here)} machines, has {iv.machines}"
                )
            if iv.machines > 0:
                for jid in retired_here:
                    slack = iv.length - times[(jid, k)]
                    if abs(slack) > _FULL_INTERVAL_SLACK * max(1.0, iv.length):
                        raise NegativeCapacity(
                            f"retired job {jid!r} leaves {slack!r} of interval {k} unused"
                        )
        new_intervals.append(
            GridInterval(
                start=iv.start,
                end=iv.end,
                length=iv.length,
                alive=tuple(i for i in iv.alive if i not in critical),
                machines=machines,
            )
        )
    return IntervalGrid(breakpoints=grid.breakpoints, intervals=tuple(new_intervals))


def bal_solve(
    instance: Instance, config: SolverConfig = DEFAULT_CONFIG
) -> tuple[SpeedAssignment, BalTrace]:
    """Compute the energy-optimal per-job speeds for a validated instance."""
    instance = validate_instance(instance)
    jobs = sorted(instance.jobs, key=lambda j: j.id)
    grid = build_interval_grid(jobs, instance.machines)
    s_lb, s_ub = speed_bounds(grid, jobs)
    if config.speed_tolerance is None:
        config = replace(config, speed_tolerance=1e-9 * s_ub)

    speeds: dict[str, float] = {}
    iteration: dict[str, int] = {}
    crit_speeds: list[float] = []
    trace_steps: list[BalStep] = []
    remaining = list(jobs)
    step = 0
    while remaining:
        step += 1
        if step > len(jobs):
            raise IterationGuardExceeded("more rounds than jobs; retirement is not progressing")
        s_crit, flow = find_critical_speed(grid, remaining, s_lb, s_ub, config)
        critical, tight = find_critical_jobs(grid, remaining, s_crit, flow, config)
        new_grid = retire_critical_jobs(grid, critical, tight, flow, config)

        slack = 0.0
        for k, iv in enumerate(grid.intervals):
            if k not in tight and iv.machines > 0:
                for jid in critical:
                    if jid in iv.alive:
                        slack = max(
                            slack, abs(iv.length - flow.arc_flows[(job_node(jid), interval_node(k))])
                        )
        updates = tuple(
            (k, grid.intervals[k].machines, new_grid.intervals[k].machines)
            for k in range(len(grid.intervals))
            if grid.intervals[k].machines != new_grid.intervals[k].machines
        )
        trace_steps.append(
            BalStep(
                step=step,
                s_crit=s_crit,
                critical_jobs=tuple(sorted(critical)),
                tight_intervals=tuple(sorted(tight)),
                machine_updates=updates,
                full_interval_slack=slack,
            )
        )
        for jid in critical:
            speeds[jid] = s_crit
            iteration[jid] = step
        crit_speeds.append(s_crit)

        grid = new_grid
        remaining = [j for j in remaining if j.id not in critical]
        if remaining:
            covered = {i for iv in grid.intervals if iv.machines > 0 for i in iv.alive}
            for j in remaining:
                if j.id not in covered:
                    raise InternalInvariantError(
                        f"job {j.id!r} survives but all its intervals are exhausted"
                    )
            s_ub = s_crit
            s_lb = min(max(job_density(j) for j in remaining), s_ub)
    assignment = SpeedAssignment(
        speeds=speeds, iteration=iteration, crit_speeds=tuple(crit_speeds)
    )
    return assignment, BalTrace(steps=tuple(trace_steps), breakpoints=grid.breakpoints)
