"""Scenario files: declarative description of endpoints, network, functions,
data, and workflow, with strict validation.

The on-disk format is JSON with the field names documented in
docs/scenario-schema.md. Sizes are given in MB (1 MB = 1e6 bytes) and times
in seconds.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .dag import INLINE_ARGS_LIMIT, CostHint, FunctionDef
from .endpoints import CapacityEvent, EndpointSpec

logger = logging.getLogger(__name__)

MB = 1_000_000


class ScenarioError(ValueError):
    """Validation failure; the message names the offending field and entry."""


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    true_fixed_s: float
    true_rate_s_per_MB: float = 0.0
    output_ratio: float = 0.0
    noise: float = 0.0
    resource_kind: str = "any"
    cost_hint_fixed_s: Optional[float] = None
    cost_hint_rate_s_per_B: Optional[float] = None

    def function_def(self) -> FunctionDef:
        hint = None
        if self.cost_hint_fixed_s is not None or self.cost_hint_rate_s_per_B is not None:
            hint = CostHint(
                fixed_s=self.cost_hint_fixed_s or 0.0,
                rate_s_per_b=self.cost_hint_rate_s_per_B or 0.0,
            )
        return FunctionDef(self.name, self.resource_kind, hint)


@dataclass(frozen=True)
class DataSpec:
    data_id: str
    size_MB: float
    locations: tuple


@dataclass(frozen=True)
class TaskSpec:
    id: int
    function: str
    deps: tuple = ()
    file_deps: tuple = ()  # data ids
    inline_args_B: int = 0
    submit_time_s: float = 0.0


@dataclass(frozen=True)
class LinkSpec:
    bandwidth_MBps: float
    latency_s: float


@dataclass(frozen=True)
class NetworkSpec:
    default: Optional[LinkSpec] = None
    pairs: dict = field(default_factory=dict)  # (src, dst) -> LinkSpec
    dispatch_latency_s: float = 0.0
    poll_interval_s: float = 0.0

    def link(self, src: str, dst: str) -> LinkSpec:
        if (src, dst) in self.pairs:
            return self.pairs[(src, dst)]
        if self.default is not None:
            return self.default
        raise ScenarioError(f"network: missing network pair {src}->{dst}")


@dataclass(frozen=True)
class Defaults:
    scheduler: str = "dha"
    seed: int = 0
    max_transfer_retries: int = 3
    max_task_attempts: int = 0  # 0: one attempt per endpoint
    transfer_concurrency: int = 4
    transfer_failure_rate: float = 0.0
    file_transfer_type: str = "simulated"
    poll_interval_s: float = 0.0
    batch_size: int = 1
    elastic: bool = False
    scale_tick_s: float = 1.0
    refresh_tick_s: float = 5.0
    reschedule_period_s: float = 10.0
    probe_at_init: bool = False
    sched_time_factor: float = 0.0
    mock_sync_lag_s: float = 0.0


@dataclass
class Scenario:
    name: str
    endpoints: list  # EndpointSpec
    capacity_traces: dict  # endpoint_id -> [CapacityEvent]
    network: NetworkSpec
    functions: dict  # name -> FunctionSpec
    data: dict  # data_id -> DataSpec
    workflow: list  # TaskSpec, ordered by (submit_time_s, id)
    defaults: Defaults = field(default_factory=Defaults)

    def endpoint_ids(self) -> list:
        return [ep.endpoint_id for ep in self.endpoints]


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return obj[key]


def _nonneg(value, name: str, where: str):
    if value is None or value < 0:
        raise ScenarioError(f"{where}: negative size/time in '{name}' ({value})")
    return value


def scenario_from_dict(doc: dict) -> Scenario:
    name = doc.get("name", "scenario")

    endpoints = []
    traces: dict = {}
    seen_eps: set = set()
    for i, entry in enumerate(doc.get("endpoints", [])):
        where = f"endpoints[{i}]"
        ep_id = _require(entry, "endpoint_id", where)
        if ep_id in seen_eps:
            raise ScenarioError(f"{where}: duplicate endpoint_id '{ep_id}'")
        seen_eps.add(ep_id)
        try:
            spec = EndpointSpec(
                endpoint_id=ep_id,
                workers_per_node=int(_require(entry, "workers_per_node", where)),
                max_nodes=int(_require(entry, "max_nodes", where)),
                initial_nodes=int(entry.get("initial_nodes", 0)),
                idle_timeout_s=float(entry.get("idle_timeout_s", 30.0)),
                perf_factor=float(entry.get("perf_factor", 1.0)),
                cores_per_worker=int(entry.get("cores_per_worker", 1)),
                cpu_freq_ghz=float(entry.get("cpu_freq_ghz", 2.4)),
                ram_gb=float(entry.get("ram_gb", 64.0)),
            )
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        endpoints.append(spec)
        traces[ep_id] = [
            CapacityEvent(
                time_s=_nonneg(ev.get("time_s"), "time_s", f"{where}.capacity_trace"),
                delta_workers=int(_require(ev, "delta_workers", f"{where}.capacity_trace")),
            )
            for ev in entry.get("capacity_trace", [])
        ]
    if not endpoints:
        raise ScenarioError("endpoints: at least one endpoint is required")

    net = doc.get("network", {})
    default = None
    if "default" in net:
        d = net["default"]
        default = LinkSpec(
            bandwidth_MBps=_nonneg(d.get("bandwidth_MBps"), "bandwidth_MBps", "network.default"),
            latency_s=_nonneg(d.get("latency_s", 0.0), "latency_s", "network.default"),
        )
        if default.bandwidth_MBps == 0:
            raise ScenarioError("network.default: bandwidth must be positive")
    pairs = {}
    for j, p in enumerate(net.get("pairs", [])):
        where = f"network.pairs[{j}]"
        src, dst = _require(p, "src", where), _require(p, "dst", where)
        for ep in (src, dst):
            if ep not in seen_eps:
                raise ScenarioError(f"{where}: dangling reference to endpoint '{ep}'")
        bw = _nonneg(p.get("bandwidth_MBps"), "bandwidth_MBps", where)
        if bw == 0:
            raise ScenarioError(f"{where}: bandwidth must be positive")
        pairs[(src, dst)] = LinkSpec(
            bandwidth_MBps=bw,
            latency_s=_nonneg(p.get("latency_s", 0.0), "latency_s", where),
        )
    client = net.get("client", {})
    network = NetworkSpec(
        default=default,
        pairs=pairs,
        dispatch_latency_s=_nonneg(
            client.get("dispatch_latency_s", 0.0), "dispatch_latency_s", "network.client"
        ),
        poll_interval_s=_nonneg(
            client.get("poll_interval_s", 0.0), "poll_interval_s", "network.client"
        ),
    )
    if default is None:
        for a in seen_eps:
            for b in seen_eps:
                if a != b and (a, b) not in pairs:
                    raise ScenarioError(f"network: missing network pair {a}->{b}")

    functions: dict = {}
    for k, entry in enumerate(doc.get("functions", [])):
        where = f"functions[{k}]"
        fname = _require(entry, "name", where)
        if fname in functions:
            raise ScenarioError(f"{where}: duplicate function name '{fname}'")
        hint = entry.get("cost_hint") or {}
        spec = FunctionSpec(
            name=fname,
            true_fixed_s=_nonneg(entry.get("true_fixed_s"), "true_fixed_s", where),
            true_rate_s_per_MB=_nonneg(
                entry.get("true_rate_s_per_MB", 0.0), "true_rate_s_per_MB", where
            ),
            output_ratio=_nonneg(entry.get("output_ratio", 0.0), "output_ratio", where),
            noise=float(entry.get("noise", 0.0)),
            resource_kind=entry.get("resource_kind", "any"),
            cost_hint_fixed_s=hint.get("fixed_s"),
            cost_hint_rate_s_per_B=hint.get("rate_s_per_B"),
        )
        if not 0.0 <= spec.noise < 1.0:
            raise ScenarioError(f"{where}: noise must be in [0, 1)")
        functions[fname] = spec

    data: dict = {}
    workflow: list = []
    seen_tasks: set = set()
    all_ids = {int(t["id"]) for t in doc.get("workflow", []) if "id" in t}
    for m, entry in enumerate(doc.get("workflow", [])):
        where = f"workflow[{m}]"
        tid = int(_require(entry, "id", where))
        if tid in seen_tasks:
            raise ScenarioError(f"{where}: duplicate task id {tid}")
        fname = _require(entry, "function", where)
        if fname not in functions:
            raise ScenarioError(f"{where}: dangling reference to function '{fname}'")
        deps = tuple(int(d) for d in entry.get("deps", []))
        for d in deps:
            if d == tid:
                raise ScenarioError(f"{where}: cycle in workflow (task {tid} depends on itself)")
            if d not in seen_tasks:
                if d in all_ids:
                    raise ScenarioError(
                        f"{where}: cycle in workflow (task {tid} depends on later task {d})"
                    )
                raise ScenarioError(f"{where}: dangling reference to task {d}")
        file_deps = []
        for fd in entry.get("file_deps", []):
            if isinstance(fd, str):
                if fd not in data:
                    raise ScenarioError(f"{where}: dangling reference to data '{fd}'")
                file_deps.append(fd)
                continue
            did = _require(fd, "data_id", where)
            if did in data:
                file_deps.append(did)
                continue
            size = _nonneg(fd.get("size_MB"), "size_MB", f"{where}.file_deps")
            locations = tuple(fd.get("locations", []))
            if not locations:
                raise ScenarioError(f"{where}: data '{did}' has no initial locations")
            for loc in locations:
                if loc not in seen_eps:
                    raise ScenarioError(
                        f"{where}: dangling reference to endpoint '{loc}' in data '{did}'"
                    )
            data[did] = DataSpec(did, size, locations)
            file_deps.append(did)
        inline = int(entry.get("inline_args_B", 0))
        _nonneg(inline, "inline_args_B", where)
        if inline > INLINE_ARGS_LIMIT:
            raise ScenarioError(
                f"{where}: inline_args_B exceeds the 10 MB limit ({INLINE_ARGS_LIMIT} B)"
            )
        workflow.append(
            TaskSpec(
                id=tid,
                function=fname,
                deps=deps,
                file_deps=tuple(file_deps),
                inline_args_B=inline,
                submit_time_s=_nonneg(entry.get("submit_time_s", 0.0), "submit_time_s", where),
            )
        )
        seen_tasks.add(tid)

    defaults_doc = doc.get("defaults", {})
    known = set(Defaults.__dataclass_fields__)
    unknown = set(defaults_doc) - known
    if unknown:
        raise ScenarioError(f"defaults: unknown fields {sorted(unknown)}")
    defaults = Defaults(**defaults_doc)
    if defaults.scheduler not in ("capacity", "locality", "dha"):
        raise ScenarioError(f"defaults.scheduler: unknown scheduler '{defaults.scheduler}'")

    workflow.sort(key=lambda t: (t.submit_time_s, t.id))
    return Scenario(
        name=name,
        endpoints=endpoints,
        capacity_traces=traces,
        network=network,
        functions=functions,
        data=data,
        workflow=workflow,
        defaults=defaults,
    )


def scenario_to_dict(sc: Scenario) -> dict:
    declared: set = set()

    def task_entry(t: TaskSpec) -> dict:
        fds = []
        for did in t.file_deps:
            if did in declared:
                fds.append(did)
            else:
                declared.add(did)
                d = sc.data[did]
                fds.append(
                    {"data_id": did, "size_MB": d.size_MB, "locations": list(d.locations)}
                )
        return {
            "id": t.id,
            "function": t.function,
            "deps": list(t.deps),
            "file_deps": fds,
            "inline_args_B": t.inline_args_B,
            "submit_time_s": t.submit_time_s,
        }

    def func_entry(f: FunctionSpec) -> dict:
        entry = {
            "name": f.name,
            "true_fixed_s": f.true_fixed_s,
            "true_rate_s_per_MB": f.true_rate_s_per_MB,
            "output_ratio": f.output_ratio,
            "noise": f.noise,
            "resource_kind": f.resource_kind,
        }
        if f.cost_hint_fixed_s is not None or f.cost_hint_rate_s_per_B is not None:
            entry["cost_hint"] = {
                "fixed_s": f.cost_hint_fixed_s or 0.0,
                "rate_s_per_B": f.cost_hint_rate_s_per_B or 0.0,
            }
        return entry

    doc = {
        "name": sc.name,
        "endpoints": [
            {
                "endpoint_id": ep.endpoint_id,
                "workers_per_node": ep.workers_per_node,
                "max_nodes": ep.max_nodes,
                "initial_nodes": ep.initial_nodes,
                "idle_timeout_s": ep.idle_timeout_s,
                "perf_factor": ep.perf_factor,
                "cores_per_worker": ep.cores_per_worker,
                "cpu_freq_ghz": ep.cpu_freq_ghz,
                "ram_gb": ep.ram_gb,
                "capacity_trace": [
                    {"time_s": ev.time_s, "delta_workers": ev.delta_workers}
                    for ev in sc.capacity_traces.get(ep.endpoint_id, [])
                ],
            }
            for ep in sc.endpoints
        ],
        "network": {
            **(
                {
                    "default": {
                        "bandwidth_MBps": sc.network.default.bandwidth_MBps,
                        "latency_s": sc.network.default.latency_s,
                    }
                }
                if sc.network.default
                else {}
            ),
            "pairs": [
                {
                    "src": src,
                    "dst": dst,
                    "bandwidth_MBps": link.bandwidth_MBps,
                    "latency_s": link.latency_s,
                }
                for (src, dst), link in sorted(sc.network.pairs.items())
            ],
            "client": {
                "dispatch_latency_s": sc.network.dispatch_latency_s,
                "poll_interval_s": sc.network.poll_interval_s,
            },
        },
        "functions": [func_entry(f) for f in sc.functions.values()],
        "workflow": [task_entry(t) for t in sc.workflow],
        "defaults": asdict(sc.defaults),
    }
    return doc


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def save_scenario(sc: Scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")
