"""Reduction of the common-speed work assignment test to maximum flow.

The graph has four layers: a source, one node per job, one node per grid
interval, and a sink.  Arc capacities are ``work/speed`` from the source,
``interval length`` from job to interval (jobs can only run while alive and
never in parallel with themselves), and ``machines * length`` into the sink.
All jobs fit at the probed speed exactly when the maximum flow moves the
whole demand ``sum(work)/speed``.

Flows are real-valued; saturation is decided with a relative tolerance
(an arc is saturated iff ``cap - flow <= tol * max(1, cap)``).  Arc order is
deterministic (jobs by id, then interval index) so results are reproducible
run to run.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import FlowNotMaximum, InternalInvariantError, NonPositiveSpeed, UnknownNode
from .instance import DEFAULT_CONFIG, IntervalGrid, Job, SolverConfig

SOURCE = "s"
SINK = "t"


def job_node(job_id: str) -> str:
    return "x:" + job_id


def interval_node(index: int) -> str:
    return "y:" + str(index)


class FlowNetwork:
    """Immutable capacitated digraph in paired-arc form.

    Arcs are stored as forward/reverse pairs: arc ``2k`` is the k-th real arc,
    arc ``2k+1`` its zero-capacity reverse.  ``adj[v]`` lists arc ids leaving
    node ``v``.  Nothing here is mutated after construction; solvers copy the
    capacity array into their own residual state.
    """

    __slots__ = ("node_names", "node_index", "arc_head", "arc_cap", "adj", "speed", "source", "sink")

    def __init__(self, node_names: Sequence[str], speed: float) -> None:
        self.node_names: list[str] = list(node_names)
        self.node_index: dict[str, int] = {name: i for i, name in enumerate(self.node_names)}
        self.arc_head: list[int] = []
        self.arc_cap: list[float] = []
        self.adj: list[list[int]] = [[] for _ in self.node_names]
        self.speed = speed
        self.source = self.node_index[SOURCE]
        self.sink = self.node_index[SINK]

    def _add_arc(self, tail: int, head: int, cap: float) -> None:
        self.adj[tail].append(len(self.arc_head))
        self.arc_head.append(head)
        self.arc_cap.append(cap)
        self.adj[head].append(len(self.arc_head))
        self.arc_head.append(tail)
        self.arc_cap.append(0.0)

    @property
    def num_arcs(self) -> int:
        return len(self.arc_head) // 2

    def arcs(self) -> list[tuple[str, str, float]]:
        """Forward arcs as (tail, head, capacity), in construction order."""
        out = []
        for k in range(0, len(self.arc_head), 2):
            tail = self.arc_head[k + 1]
            out.append((self.node_names[tail], self.node_names[self.arc_head[k]], self.arc_cap[k]))
        return out


def build_wap_network(grid: IntervalGrid, jobs: Iterable[Job], speed: float) -> FlowNetwork:
    """Build the work-assignment graph for a common ``speed``.

    Intervals whose machine count has dropped to zero keep their node with a
    zero-capacity sink arc, which is equivalent to removing them.
    """
    if not speed > 0:
        raise NonPositiveSpeed(f"speed must be positive, got {speed!r}")
    jobs = sorted(jobs, key=lambda j: j.id)
    alive_anywhere = {i for iv in grid.intervals if iv.machines > 0 for i in iv.alive}
    for job in jobs:
        if job.id not in alive_anywhere:
            raise InternalInvariantError(
                f"job {job.id!r} is alive in no interval with machines available"
            )
    names = [SOURCE]
    names += [job_node(j.id) for j in jobs]
    names += [interval_node(k) for k in range(len(grid.intervals))]
    names.append(SINK)
    net = FlowNetwork(names, speed)

    for j, job in enumerate(jobs):
        net._add_arc(net.source, 1 + j, job.work / speed)
    job_pos = {job.id: 1 + j for j, job in enumerate(jobs)}
    base = 1 + len(jobs)
    for j, job in enumerate(jobs):
        for k, iv in enumerate(grid.intervals):
            if job.id in iv.alive:
                net._add_arc(job_pos[job.id], base + k, iv.length)
    for k, iv in enumerate(grid.intervals):
        net._add_arc(base + k, net.sink, iv.machines * iv.length)
    return net


def build_assignment_network(grid: IntervalGrid, jobs: Sequence[Job], speeds: Mapping[str, float]) -> FlowNetwork:
    """Variant with per-job source capacity ``work/speeds[id]`` (used for timetabling)."""
    for job in jobs:
        if not speeds.get(job.id, 0.0) > 0:
            raise NonPositiveSpeed(f"job {job.id!r} has non-positive speed")
    jobs = sorted(jobs, key=lambda j: j.id)
    names = [SOURCE]
    names += [job_node(j.id) for j in jobs]
    names += [interval_node(k) for k in range(len(grid.intervals))]
    names.append(SINK)
    net = FlowNetwork(names, 0.0)
    for j, job in enumerate(jobs):
        net._add_arc(net.source, 1 + j, job.work / speeds[job.id])
    base = 1 + len(jobs)
    for j, job in enumerate(jobs):
        for k, iv in enumerate(grid.intervals):
            if job.id in iv.alive:
                net._add_arc(1 + j, base + k, iv.length)
    for k, iv in enumerate(grid.intervals):
        net._add_arc(base + k, net.sink, iv.machines * iv.length)
    return net


@dataclass(frozen=True)
class FlowResult:
    """A maximum flow: total value plus per-arc flows on the owning network."""

    value: float
    network: FlowNetwork
    residual: tuple[float, ...]  # per paired-arc slot; flow on arc 2k is residual[2k+1]

    def flow_on(self, k: int) -> float:
        """Flow on the k-th forward arc (construction order)."""
        return self.residual[2 * k + 1]

    @property
    def arc_flows(self) -> dict[tuple[str, str], float]:
        out = {}
        for k, (u, v, _cap) in enumerate(self.network.arcs()):
            out[(u, v)] = self.flow_on(k)
        return out

    def saturated_list(self, tol: float = DEFAULT_CONFIG.flow_tolerance) -> list[bool]:
        """Per forward arc: is the remaining capacity below the tolerance?"""
        caps = self.network.arc_cap
        return [
            self.residual[2 * k] <= tol * max(1.0, caps[2 * k])
            for k in range(self.network.num_arcs)
        ]

    @property
    def saturated(self) -> dict[tuple[str, str], bool]:
        flags = self.saturated_list()
        return {
            (u, v): flags[k] for k, (u, v, _cap) in enumerate(self.network.arcs())
        }


def max_flow(network: FlowNetwork) -> FlowResult:
    """Maximum source-to-sink flow by repeated shortest-path blocking flows.

    Works directly on residual capacities; a push threshold a few orders of
    magnitude below the saturation tolerance keeps float dust from creating
    endless phases.
    """
    res = list(network.arc_cap)
    head = network.arc_head
    adj = network.adj
    n = len(network.node_names)
    source, sink = network.source, network.sink
    max_cap = max(network.arc_cap, default=0.0)
    push_eps = 1e-14 * max(1.0, max_cap)

    total = 0.0
    level = [0] * n
    while True:
        # breadth-first layering on the residual graph
        for i in range(n):
            level[i] = -1
        level[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for a in adj[u]:
                v = head[a]
                if level[v] < 0 and res[a] > push_eps:
                    level[v] = level[u] + 1
                    queue.append(v)
        if level[sink] < 0:
            break
        # blocking flow via iterative depth-first search with arc cursors
        it = [0] * n
        path: list[int] = []
        u = source
        while True:
            if u == sink:
                bottleneck = min(res[a] for a in path)
                for a in path:
                    res[a] -= bottleneck
                    res[a ^ 1] += bottleneck
                total += bottleneck
                # resume from the tail of the first arc this augmentation saturated
                cut = 0
                while cut < len(path) and res[path[cut]] > push_eps:
                    cut += 1
                u = head[path[cut] ^ 1] if cut < len(path) else source
                del path[cut:]
                continue
            advanced = False
            while it[u] < len(adj[u]):
                a = adj[u][it[u]]
                v = head[a]
                if res[a] > push_eps and level[v] == level[u] + 1:
                    path.append(a)
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                level[u] = -1  # dead end for this phase
                if not path:
                    break
                a = path.pop()
                u = head[a ^ 1]
                it[u] += 1
    return FlowResult(value=total, network=network, residual=tuple(res))


def _residual_thresholds(network: FlowNetwork, tol: float) -> list[float]:
    # symmetric per-pair threshold derived from the forward capacity
    caps = network.arc_cap
    thr = [0.0] * len(caps)
    for k in range(0, len(caps), 2):
        t = tol * max(1.0, caps[k])
        thr[k] = t
        thr[k + 1] = t
    return thr


def _reachable(network: FlowNetwork, flow: FlowResult, start: int, tol: float) -> list[bool]:
    """Nodes reachable from ``start`` along residual arcs."""
    thr = _residual_thresholds(network, tol)
    res = flow.residual
    seen = [False] * len(network.node_names)
    seen[start] = True
    queue = deque([start])
    adj, head = network.adj, network.arc_head
    while queue:
        u = queue.popleft()
        for a in adj[u]:
            v = head[a]
            if not seen[v] and res[a] > thr[a]:
                seen[v] = True
                queue.append(v)
    return seen


def _co_reachable(network: FlowNetwork, flow: FlowResult, target: int, tol: float) -> list[bool]:
    """Nodes with a residual path *to* ``target`` (reverse breadth-first search)."""
    thr = _residual_thresholds(network, tol)
    res = flow.residual
    seen = [False] * len(network.node_names)
    seen[target] = True
    queue = deque([target])
    adj, head = network.adj, network.arc_head
    while queue:
        v = queue.popleft()
        for a in adj[v]:
            u = head[a]
            # the pair arc (u -> v) is residual iff res[a^1] clears the threshold
            if not seen[u] and res[a ^ 1] > thr[a ^ 1]:
                seen[u] = True
                queue.append(u)
    return seen


def residual_reachable_from_source(
    network: FlowNetwork, flow: FlowResult, config: SolverConfig = DEFAULT_CONFIG
) -> set[str]:
    """The source side of the minimum cut certified by ``flow``.

    Raises ``FlowNotMaximum`` if the sink is still reachable (an augmenting
    path exists, so the given flow cannot be maximum).
    """
    seen = _reachable(network, flow, network.source, config.flow_tolerance)
    if seen[network.sink]:
        raise FlowNotMaximum("sink reachable from source in the residual graph")
    return {network.node_names[i] for i, s in enumerate(seen) if s}


def residual_reachable_to_sink(
    network: FlowNetwork, flow: FlowResult, config: SolverConfig = DEFAULT_CONFIG
) -> set[str]:
    """All nodes with a residual path to the sink under ``flow``."""
    seen = _co_reachable(network, flow, network.sink, config.flow_tolerance)
    return {network.node_names[i] for i, s in enumerate(seen) if s}


def residual_path_exists(
    network: FlowNetwork,
    flow: FlowResult,
    from_node: str,
    to_node: str,
    config: SolverConfig = DEFAULT_CONFIG,
) -> bool:
    for name in (from_node, to_node):
        if name not in network.node_index:
            raise UnknownNode(f"no node named {name!r}")
    seen = _reachable(network, flow, network.node_index[from_node], config.flow_tolerance)
    return seen[network.node_index[to_node]]


def wap_feasible(
    grid: IntervalGrid,
    jobs: Sequence[Job],
    speed: float,
    config: SolverConfig = DEFAULT_CONFIG,
) -> tuple[bool, FlowResult]:
    """Can every job run at the common ``speed``?  Returns the witnessing flow.

    Feasible iff the maximum flow carries the entire demand ``sum(w)/speed``
    (up to the relative flow tolerance).  The middle-arc flows of a feasible
    result are per-interval execution times, so callers reuse it.
    """
    network = build_wap_network(grid, jobs, speed)
    flow = max_flow(network)
    demand = sum(j.work for j in jobs) / speed
    feasible = demand - flow.value <= config.flow_tolerance * demand
    return feasible, flow


def dump_network(network: FlowNetwork, flow: FlowResult | None = None) -> str:
    """Plain-text adjacency listing: one line per arc ``u v capacity flow``."""
    lines = []
    for k, (u, v, cap) in enumerate(network.arcs()):
        f = flow.flow_on(k) if flow is not None else 0.0
        lines.append(f"{u} {v} {cap!r} {f!r}")
    return "\n".join(lines)
