"""Run metrics: per-task intervals, worker-utilization series, CSV export."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)

SUMMARY_BASE_COLUMNS = ["makespan_s", "transfer_GB", "tasks_failed"]
UTILIZATION_COLUMNS = ["time_s", "endpoint", "busy", "active"]
TRANSFERS_COLUMNS = [
    "job_id",
    "data_id",
    "src",
    "dst",
    "size_B",
    "state",
    "retries_used",
    "started_at_s",
    "finished_at_s",
]
STAGING_COLUMNS = ["time_s", "tasks_in_staging"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


@dataclass
class TaskMetrics:
    task_id: int
    endpoint: Optional[str] = None
    submit_time: float = 0.0
    staging_start: Optional[float] = None
    staging_end: Optional[float] = None
    dispatch_time: Optional[float] = None
    start_time: Optional[float] = None
    end_time: Optional[float] = None
    observed_time: Optional[float] = None
    final_state: str = "pending"


class MetricsLog:
    def __init__(self, endpoint_ids: list):
        self.endpoint_ids = list(endpoint_ids)
        self.tasks: dict = {}
        self.utilization: list = []  # (time, endpoint, busy, active)
        self.staging_series: list = []  # (time, tasks_in_staging)
        self.transfers: list = []  # rows matching TRANSFERS_COLUMNS
        self.makespan: float = 0.0
        self.transfer_bytes: int = 0
        self.tasks_failed: int = 0
        self.sched_seconds: float = 0.0
        self.decision_count: int = 0
        self.dispatch_batches: int = 0
        self.event_count: int = 0

    def task(self, task_id: int) -> TaskMetrics:
        if task_id not in self.tasks:
            self.tasks[task_id] = TaskMetrics(task_id)
        return self.tasks[task_id]

    def record_workers(self, time: float, endpoint: str, busy: int, active: int):
        self.utilization.append((time, endpoint, busy, active))

    def record_staging_count(self, time: float, count: int):
        if self.staging_series and self.staging_series[-1][0] == time:
            self.staging_series[-1] = (time, count)
        else:
            self.staging_series.append((time, count))

    @property
    def mean_decision_seconds(self) -> float:
        if not self.decision_count:
            return 0.0
        return self.sched_seconds / self.decision_count

    def per_endpoint_task_counts(self) -> dict:
        counts = {ep: 0 for ep in self.endpoint_ids}
        for tm in self.tasks.values():
            if tm.final_state == "done" and tm.endpoint in counts:
                counts[tm.endpoint] += 1
        return counts

    def busy_integral(self) -> float:
        """Integral of busy workers over time, summed across endpoints."""
        total = 0.0
        last: dict = {}
        for time, ep, busy, _active in self.utilization:
            if ep in last:
                t0, b0 = last[ep]
                total += b0 * (time - t0)
            last[ep] = (time, busy)
        return total

    # -- export ------------------------------------------------------------

    def emit(self, out_dir):
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            self._write_summary(out / "summary.csv")
            self._write_rows(
                out / "utilization.csv",
                UTILIZATION_COLUMNS,
                self.utilization,
            )
            self._write_rows(out / "transfers.csv", TRANSFERS_COLUMNS, self.transfers)
            self._write_rows(
                out / "staging.csv", STAGING_COLUMNS, self.staging_series
            )
        except OSError as exc:
            raise MetricsIOError(str(exc)) from exc

    def _write_summary(self, path):
        counts = self.per_endpoint_task_counts()
        columns = SUMMARY_BASE_COLUMNS + [f"tasks_{ep}" for ep in self.endpoint_ids]
        row = [
            _fmt(self.makespan),
            _fmt(self.transfer_bytes / 1e9),
            str(self.tasks_failed),
        ] + [str(counts[ep]) for ep in self.endpoint_ids]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            writer.writerow(row)

    @staticmethod
    def _write_rows(path, columns, rows):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])


class MetricsIOError(OSError):
    """Raised when metrics files cannot be written."""
