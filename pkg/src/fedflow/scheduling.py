"""Task-to-endpoint mapping: Capacity, Locality, and DHA algorithms.

Capacity partitions the DFS order of the graph into blocks proportional to
endpoint worker counts, offline. Locality picks, in real time, the endpoint
with idle capacity that minimizes bytes moved. DHA ranks tasks by a
recursive upward cost, picks endpoints by earliest finish time, delays
dispatch until the target has an idle worker, and re-schedules undispatched
tasks when capacity changes.
"""

from __future__ import annotations

import heapq
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .dag import Dag, TaskState, dfs_order
from .profilers import average_costs

logger = logging.getLogger(__name__)


class SchedulerError(RuntimeError):
    pass


@dataclass
class Assignment:
    task_id: int
    endpoint_id: str
    decided_at: float
    dispatched: bool = False


def capacity_partition(task_count: int, capacities: list) -> list:
    """Split `task_count` into per-endpoint quotas proportional to capacity.

    Largest-remainder rounding so the quotas sum exactly; remainder ties go
    to the larger capacity, then the lower index.
    """
    if task_count < 0:
        raise SchedulerError("task count must be non-negative")
    if any(c < 0 for c in capacities):
        raise SchedulerError("capacities must be non-negative")
    total = sum(capacities)
    if total <= 0:
        raise SchedulerError("no capacity: sum of worker counts is zero")
    quotas = [task_count * c / total for c in capacities]
    counts = [int(q) for q in quotas]
    leftover = task_count - sum(counts)
    order = sorted(
        range(len(capacities)),
        key=lambda i: (-(quotas[i] - counts[i]), -capacities[i], i),
    )
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def capacity_blocks(dag: Dag, task_ids: list, capacities: list) -> list:
    """Cut the DFS order (restricted to `task_ids`) into capacity blocks.

    Returns a list (one entry per endpoint) of task-id lists, consecutive in
    DFS order so tasks on a path tend to share an endpoint.
    """
    selected = set(task_ids)
    order = [t for t in dfs_order(dag) if t in selected]
    counts = capacity_partition(len(order), capacities)
    blocks, start = [], 0
    for c in counts:
        blocks.append(order[start : start + c])
        start += c
    return blocks


def compute_priorities(dag: Dag, costs: dict) -> dict:
    """Recursive upward cost: own staging + execution means plus the largest
    successor priority, evaluated in reverse topological order."""
    order = dag.topological_order()
    priority: dict = {}
    for t in reversed(order):
        d_bar, w_bar = costs[t]
        succ_max = max(
            (priority[s] for s in dag.successors[t]), default=0.0
        )
        priority[t] = d_bar + w_bar + succ_max
    return priority


def locality_select(
    file_deps: list,
    items: dict,
    feasible: list,
) -> Optional[str]:
    """Pick the feasible endpoint minimizing non-resident dependency bytes.

    `feasible` is a list of (endpoint_id, free_slots, declaration_index) for
    endpoints with at least one assignable idle worker. Ties prefer more
    free slots, then lower declaration index.
    """
    best = None
    for ep_id, free, index in feasible:
        moved = sum(
            items[d].size for d in file_deps if ep_id not in items[d].locations
        )
        key = (moved, -free, index)
        if best is None or key < best[0]:
            best = (key, ep_id)
    return best[1] if best else None


def earliest_finish_time(
    clock: float, staging_time: float, earliest_idle: float, exec_time: float
) -> float:
    return max(clock + staging_time, earliest_idle) + exec_time


def reassignment_endpoint(
    attempt_count: int,
    failed_endpoints: set,
    success_rates: dict,
    endpoint_order: list,
    normal_choice,
) -> Optional[str]:
    """Endpoint for a failed task's next attempt, or None when out of options.

    The first retry goes through the scheduler's normal selection; later
    retries go to the untried endpoint with the best historical success
    rate. A task that has failed everywhere is terminal.
    """
    candidates = [ep for ep in endpoint_order if ep not in failed_endpoints]
    if not candidates:
        return None
    if attempt_count <= 1:
        choice = normal_choice()
        if choice in candidates:
            return choice
    return max(candidates, key=lambda ep: (success_rates.get(ep, 0.0), -endpoint_order.index(ep)))


def success_rates_for(function_name: str, history) -> dict:
    totals: dict = {}
    wins: dict = {}
    for rec in history:
        if rec.function != function_name:
            continue
        totals[rec.endpoint] = totals.get(rec.endpoint, 0) + 1
        if rec.success:
            wins[rec.endpoint] = wins.get(rec.endpoint, 0) + 1
    return {ep: wins.get(ep, 0) / n for ep, n in totals.items()}


# ---------------------------------------------------------------------------
# Strategies driven by the simulation engine. The engine calls the hooks;
# the strategy calls back into the engine to assign, stage, and dispatch.
# ---------------------------------------------------------------------------


class BaseStrategy:
    name = "base"

    def __init__(self, sim):
        self.sim = sim

    def on_batch_submitted(self, task_ids: list):
        pass

    def on_deps_done(self, task_ids: list):
        raise NotImplementedError

    def on_staging_complete(self, task_id: int):
        raise NotImplementedError

    def on_worker_free(self, endpoint_id: str):
        pass

    def on_capacity_change(self, endpoint_id: str):
        pass

    def on_reschedule_tick(self) -> int:
        return 0

    def retry_choice(self, task_id: int) -> Optional[str]:
        """Normal selection used for a failed task's first retry."""
        raise NotImplementedError


class CapacityStrategy(BaseStrategy):
    """Offline proportional partitioning over the DFS order."""

    name = "capacity"

    def on_batch_submitted(self, task_ids: list):
        sim = self.sim
        capacities = [ep.active_workers for ep in sim.endpoints]
        if sum(capacities) == 0:
            # Nothing provisioned yet (elastic start): partition by maximums.
            capacities = [ep.spec.max_workers for ep in sim.endpoints]
        blocks = capacity_blocks(sim.dag, task_ids, capacities)
        for ep, block in zip(sim.endpoints, blocks):
            for tid in block:
                sim.assign(tid, ep.endpoint_id)

    def on_deps_done(self, task_ids: list):
        # Staging starts the moment dependencies finish; the assignment was
        # fixed offline.
        for tid in sorted(task_ids):
            self.sim.begin_staging(tid)

    def on_staging_complete(self, task_id: int):
        self.sim.dispatch_task(task_id)

    def retry_choice(self, task_id: int) -> Optional[str]:
        return self.sim.dag.nodes[task_id].assigned_endpoint


class LocalityStrategy(BaseStrategy):
    """Real-time minimum-transfer placement, gated on idle workers."""

    name = "locality"

    def __init__(self, sim):
        super().__init__(sim)
        self.waiting: deque = deque()  # FIFO of ready, unassigned task ids

    def _feasible(self):
        out = []
        for index, ep in enumerate(self.sim.endpoints):
            free = ep.idle_workers - self.sim.reserved.get(ep.endpoint_id, 0)
            if free > 0:
                out.append((ep.endpoint_id, free, index))
        return out

    def _select(self, task_id: int) -> Optional[str]:
        node = self.sim.dag.nodes[task_id]
        return locality_select(
            sorted(node.file_deps), self.sim.data.items, self._feasible()
        )

    def _pump(self):
        sim = self.sim
        while self.waiting:
            choice = self._select(self.waiting[0])
            if choice is None:
                return
            tid = self.waiting.popleft()
            sim.assign(tid, choice, reserve=True)
            sim.begin_staging(tid)

    def on_deps_done(self, task_ids: list):
        self.waiting.extend(sorted(task_ids))
        self._pump()

    def on_staging_complete(self, task_id: int):
        self.sim.dispatch_task(task_id)

    def on_worker_free(self, endpoint_id: str):
        self._pump()

    def on_capacity_change(self, endpoint_id: str):
        self._pump()

    def retry_choice(self, task_id: int) -> Optional[str]:
        return self._select(task_id)


class DhaStrategy(BaseStrategy):
    """Priority-ordered earliest-finish-time selection with delayed dispatch."""

    name = "dha"

    def __init__(self, sim, reschedule_period: float = 10.0):
        super().__init__(sim)
        self.priorities: dict = {}
        self.delay_queues: dict = {}  # endpoint_id -> heap of (-priority, tid)
        self.reschedule_period = reschedule_period

    # -- priorities --------------------------------------------------------

    def _recompute_priorities(self):
        sim = self.sim
        costs = {}
        for tid, node in sim.dag.nodes.items():
            d_bar, w_bar = average_costs(
                sim.input_bytes(tid),
                node.function,
                [ep.spec for ep in sim.endpoints],
                sim.exec_profiler,
                sim.transfer_profiler,
                staging_bytes=sim.file_bytes(tid),
            )
            costs[tid] = (d_bar, w_bar)
        self.priorities = compute_priorities(sim.dag, costs)

    def on_batch_submitted(self, task_ids: list):
        self._recompute_priorities()

    # -- endpoint selection ------------------------------------------------

    def select_endpoint(self, task_id: int) -> str:
        sim = self.sim
        best_ep, best_eft = None, None
        for ep in sim.endpoints:
            eft = earliest_finish_time(
                sim.clock,
                sim.staging_time_estimate(task_id, ep.endpoint_id),
                sim.earliest_idle_estimate(ep.endpoint_id),
                sim.predicted_exec(task_id, ep.endpoint_id),
            )
            if best_eft is None or eft < best_eft:
                best_ep, best_eft = ep.endpoint_id, eft
        return best_ep

    def on_deps_done(self, task_ids: list):
        for tid in sorted(
            task_ids, key=lambda t: (-self.priorities.get(t, 0.0), t)
        ):
            target = self.select_endpoint(tid)
            self.sim.assign(tid, target)
            self.sim.begin_staging(tid)

    # -- delayed dispatch --------------------------------------------------

    def on_staging_complete(self, task_id: int):
        node = self.sim.dag.nodes[task_id]
        ep = node.assigned_endpoint
        heapq.heappush(
            self.delay_queues.setdefault(ep, []),
            (-self.priorities.get(task_id, 0.0), task_id),
        )
        self.delay_dispatch(ep)

    def delay_dispatch(self, endpoint_id: str):
        """Dispatch staged tasks, highest priority first, while workers idle."""
        sim = self.sim
        ep = sim.endpoint_by_id(endpoint_id)
        queue = self.delay_queues.get(endpoint_id, [])
        while queue and ep.idle_workers > 0:
            _, tid = heapq.heappop(queue)
            node = sim.dag.nodes[tid]
            # Lazy deletion: skip entries invalidated by re-scheduling.
            if node.state != TaskState.READY or node.assigned_endpoint != endpoint_id:
                continue
            sim.dispatch_task(tid)

    def on_worker_free(self, endpoint_id: str):
        self.delay_dispatch(endpoint_id)

    # -- re-scheduling -----------------------------------------------------

    def on_capacity_change(self, endpoint_id: str):
        for ep in self.sim.endpoints:
            self.delay_dispatch(ep.endpoint_id)
        if self.reschedule_period > 0:
            self.reschedule_pass()
            self.sim.arm_reschedule(self.reschedule_period)

    def on_reschedule_tick(self) -> int:
        moved = self.reschedule_pass()
        for ep in self.sim.endpoints:
            self.delay_dispatch(ep.endpoint_id)
        return moved

    def reschedule_pass(self) -> int:
        """Re-run endpoint selection for undispatched tasks; steal when the
        earliest finish time strictly improves even after paying for the
        extra transfers of already-staged inputs."""
        sim = self.sim
        movable = sorted(
            (
                tid
                for tid in sim.undispatched_tasks()
                if sim.dag.nodes[tid].state in (TaskState.STAGING, TaskState.READY)
            ),
            key=lambda t: (-self.priorities.get(t, 0.0), t),
        )
        moves = 0
        for tid in movable:
            node = sim.dag.nodes[tid]
            incumbent = node.assigned_endpoint
            incumbent_eft = earliest_finish_time(
                sim.clock,
                sim.staging_time_estimate(tid, incumbent),
                sim.earliest_idle_estimate(incumbent),
                sim.predicted_exec(tid, incumbent),
            )
            best_ep, best_eft = incumbent, incumbent_eft
            for ep in sim.endpoints:
                if ep.endpoint_id == incumbent:
                    continue
                eft = earliest_finish_time(
                    sim.clock,
                    sim.staging_time_estimate(tid, ep.endpoint_id),
                    sim.earliest_idle_estimate(ep.endpoint_id),
                    sim.predicted_exec(tid, ep.endpoint_id),
                )
                if eft < best_eft:
                    best_ep, best_eft = ep.endpoint_id, eft
            if best_ep != incumbent:
                sim.move_assignment(tid, best_ep)
                moves += 1
        if moves:
            logger.debug("re-scheduling moved %d tasks", moves)
        return moves

    def retry_choice(self, task_id: int) -> Optional[str]:
        return self.select_endpoint(task_id)


STRATEGIES = {
    "capacity": CapacityStrategy,
    "locality": LocalityStrategy,
    "dha": DhaStrategy,
}
