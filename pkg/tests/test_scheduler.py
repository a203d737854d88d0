"""Scheduling algorithms: proportional partitioning, priorities, selection."""

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from fedflow.dag import Dag, FunctionDef
from fedflow.data_manager import DataItem
from fedflow.scheduling import (
    SchedulerError,
    capacity_blocks,
    capacity_partition,
    compute_priorities,
    earliest_finish_time,
    locality_select,
    reassignment_endpoint,
    success_rates_for,
)

FN = FunctionDef("f")


class TestCapacityPartition:
    def test_reference_example(self):
        assert capacity_partition(8, [5, 2, 1]) == [5, 2, 1]

    def test_sums_are_exact(self):
        assert sum(capacity_partition(7, [3, 3, 1])) == 7

    def test_zero_tasks(self):
        assert capacity_partition(0, [5, 2]) == [0, 0]

    def test_all_zero_capacity_rejected(self):
        with pytest.raises(SchedulerError):
            capacity_partition(5, [0, 0])

    def test_negative_rejected(self):
        with pytest.raises(SchedulerError):
            capacity_partition(-1, [1])
        with pytest.raises(SchedulerError):
            capacity_partition(1, [-1])

    @settings(max_examples=1000, deadline=None)
    @given(
        st.integers(0, 10**4),
        st.lists(st.integers(0, 500), min_size=1, max_size=16).filter(
            lambda c: sum(c) > 0
        ),
    )
    def test_partition_is_exact_and_near_quota(self, m, capacities):
        counts = capacity_partition(m, capacities)
        assert sum(counts) == m
        total = sum(capacities)
        for count, cap in zip(counts, capacities):
            assert abs(count - m * cap / total) < 1.0

    def test_deterministic_tie_break(self):
        assert capacity_partition(1, [1, 1]) == capacity_partition(1, [1, 1])
        assert capacity_partition(1, [1, 2]) == [0, 1]


class TestCapacityBlocks:
    def test_blocks_cut_dfs_order(self):
        dag = Dag()
        a = dag.submit_task(FN)
        b = dag.submit_task(FN, [a])
        c = dag.submit_task(FN, [a])
        d = dag.submit_task(FN)
        blocks = capacity_blocks(dag, [a, b, c, d], [2, 1, 1])
        assert blocks == [[a, b], [c], [d]]
        assert sum(len(x) for x in blocks) == 4


def brute_force_priority(succ, costs, t):
    d, w = costs[t]
    children = succ[t]
    if not children:
        return d + w
    return d + w + max(brute_force_priority(succ, costs, s) for s in children)


class TestPriorities:
    def test_chain(self):
        dag = Dag()
        a = dag.submit_task(FN)
        b = dag.submit_task(FN, [a])
        pr = compute_priorities(dag, {a: (1.0, 2.0), b: (0.5, 4.0)})
        assert math.isclose(pr[b], 4.5)
        assert math.isclose(pr[a], 3.0 + 4.5)

    def test_matches_brute_force_on_random_dags(self):
        rng = random.Random(20240817)
        for _ in range(500):
            n = rng.randint(1, 20)
            dag = Dag()
            for t in range(n):
                deps = [d for d in range(t) if rng.random() < 0.25]
                dag.submit_task(FN, deps)
            costs = {
                t: (rng.uniform(0, 50), rng.uniform(0, 50)) for t in range(n)
            }
            pr = compute_priorities(dag, costs)
            for t in range(n):
                expect = brute_force_priority(dag.successors, costs, t)
                assert math.isclose(pr[t], expect, rel_tol=1e-9, abs_tol=1e-9)


class TestLocalitySelect:
    def items(self):
        return {
            "x": DataItem("x", 100, {"a"}),
            "y": DataItem("y", 10, {"b"}),
        }

    def test_prefers_fewest_bytes_moved(self):
        choice = locality_select(
            ["x", "y"], self.items(), [("a", 1, 0), ("b", 1, 1)]
        )
        assert choice == "a"

    def test_tie_prefers_more_free_workers(self):
        items = {"x": DataItem("x", 0, {"a"})}
        assert locality_select(["x"], items, [("a", 1, 0), ("b", 5, 1)]) == "b"

    def test_final_tie_prefers_declaration_order(self):
        assert locality_select([], {}, [("b", 1, 1), ("a", 1, 0)]) == "a"

    def test_no_feasible_endpoint(self):
        assert locality_select(["x"], self.items(), []) is None


class TestEarliestFinishTime:
    def test_staging_bound(self):
        assert earliest_finish_time(10.0, 5.0, 12.0, 3.0) == 18.0

    def test_availability_bound(self):
        assert earliest_finish_time(10.0, 1.0, 20.0, 3.0) == 23.0


class TestReassignment:
    def test_first_retry_uses_normal_choice(self):
        got = reassignment_endpoint(1, {"a"}, {}, ["a", "b", "c"], lambda: "c")
        assert got == "c"

    def test_normal_choice_on_failed_endpoint_overridden(self):
        got = reassignment_endpoint(
            1, {"a"}, {"b": 0.9, "c": 0.1}, ["a", "b", "c"], lambda: "a"
        )
        assert got == "b"

    def test_later_retries_use_success_rate(self):
        got = reassignment_endpoint(
            2, {"a"}, {"b": 0.2, "c": 0.8}, ["a", "b", "c"], lambda: "b"
        )
        assert got == "c"

    def test_rate_tie_prefers_declaration_order(self):
        got = reassignment_endpoint(2, {"a"}, {}, ["a", "b", "c"], lambda: None)
        assert got == "b"

    def test_exhausted_everywhere(self):
        assert (
            reassignment_endpoint(3, {"a", "b"}, {}, ["a", "b"], lambda: None)
            is None
        )

    def test_success_rates(self):
        recs = [
            type("R", (), {"function": "f", "endpoint": "a", "success": True})(),
            type("R", (), {"function": "f", "endpoint": "a", "success": False})(),
            type("R", (), {"function": "g", "endpoint": "a", "success": False})(),
        ]
        assert success_rates_for("f", recs) == {"a": 0.5}
