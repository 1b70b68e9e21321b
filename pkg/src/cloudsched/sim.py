"""Hourly simulation loop, QoS reporting, and policy comparison.

Each hour: retire finished VMs, deliver arrivals, snapshot resources,
schedule, execute placements and consolidation migrations, then bill the
energy drawn over the hour at each PM location's current price.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace as dc_replace
from pathlib import Path

from .datacenter import (
    DEFAULT_PM_TEMPLATE,
    PhysicalMachine,
    admit,
    migrate,
    new_datacenter,
    place,
    remove_finished,
    snapshot,
    with_clock,
)
from .energy import (
    DEFAULT_POWER_MODEL,
    EnergyBreakdown,
    PowerModel,
    PriceSeries,
    ZERO_ENERGY,
    generate_price_series,
    load_price_series,
    step_energy,
)
from .errors import ConfigError, CoverageError
from .gnn.models import GatedModel, GcnModel, load_model
from .scheduler import (
    CONSOLIDATION_THRESHOLD,
    MODEL_POLICIES,
    Policy,
    SampleRecorder,
    consolidate,
    schedule,
)
from .workload import (
    WorkloadRequest,
    WorkloadSet,
    derive_request,
    generate_synthetic,
    parse_trace_file,
    workload_from_json,
)


@dataclass(frozen=True)
class SimConfig:
    """One scenario; defaults are the 8-PM / 60-VM / 120-hour setup."""

    pm_count: int = 8
    pm_template: PhysicalMachine = DEFAULT_PM_TEMPLATE
    vm_count: int = 60
    horizon: int = 120
    power: PowerModel = DEFAULT_POWER_MODEL
    policy: str = "first_fit"
    model: GcnModel | GatedModel | None = None
    model_path: str | None = None
    requests: tuple[WorkloadRequest, ...] | None = None
    workload_file: str | None = None
    trace_dir: str | None = None
    workload_seed: int | None = None  # None: fall back to seed
    prices: PriceSeries | None = None
    price_file: str | None = None
    price_seed: int | None = None  # None: fall back to seed
    seed: int = 0
    consolidation_threshold: float = CONSOLIDATION_THRESHOLD
    log_scores: bool = False


@dataclass
class SimResult:
    pm_ids: tuple[str, ...]
    pm_locations: tuple[str, ...]
    horizon: int
    policy: str
    utilisation: list[list[float]] = field(default_factory=list)  # [hour][pm]
    powered_on: list[list[bool]] = field(default_factory=list)
    hourly: list[EnergyBreakdown] = field(default_factory=list)
    prices_by_hour: list[dict[str, float]] = field(default_factory=list)
    pm_energy_rows: list[tuple[int, str, str, EnergyBreakdown, float]] = field(
        default_factory=list
    )  # (hour, pm, location, breakdown incl cost, price)
    events: list[dict] = field(default_factory=list)
    deferred_hours: dict[str, int] = field(default_factory=dict)
    totals: EnergyBreakdown = ZERO_ENERGY
    placed: int = 0
    deferred: int = 0
    migration_count: int = 0


@dataclass(frozen=True)
class QoSReport:
    max_pm_utilisation: float
    mean_active_pm_count: float
    total_energy: float  # kWh
    total_cost: float
    placed: int
    deferred: int
    migrated: int


def _load_workload(config: SimConfig) -> tuple[WorkloadRequest, ...]:
    if config.requests is not None:
        requests = tuple(config.requests)
    elif config.workload_file is not None:
        with open(config.workload_file, "r", encoding="utf-8") as fh:
            requests = workload_from_json(fh.read()).requests
    elif config.trace_dir is not None:
        requests = ingest_trace_dir(config.trace_dir, config.horizon).requests
    else:
        seed = config.workload_seed if config.workload_seed is not None else config.seed
        requests = generate_synthetic(config.vm_count, config.horizon, seed).requests

    ids = [r.id for r in requests]
    if len(set(ids)) != len(ids):
        raise ConfigError("workload contains duplicate request ids")
    late = [r.id for r in requests if r.arrival >= config.horizon]
    if late:
        raise ConfigError(
            f"requests arriving at or after the horizon ({config.horizon}): {late[:3]}"
        )
    return requests


def ingest_trace_dir(trace_dir: str, horizon: int) -> WorkloadSet:
    """Derive one request per trace file; arrivals follow relative trace starts."""
    paths = sorted(p for p in Path(trace_dir).iterdir() if p.is_file())
    if not paths:
        raise ConfigError(f"no trace files in {trace_dir!r}")
    traces = [parse_trace_file(p.read_bytes(), name=p.stem) for p in paths]
    start = min(t.samples[0].timestamp_ms for t in traces if t.samples)
    requests = []
    for trace in traces:
        offset_h = int((trace.samples[0].timestamp_ms - start) // 3_600_000)
        arrival = min(offset_h, horizon - 1)
        requests.append(derive_request(trace, arrival=arrival))
    requests.sort(key=lambda r: (r.arrival, r.id))
    return WorkloadSet(requests=tuple(requests), source="trace", seed=None)


def _load_prices(config: SimConfig, locations: tuple[str, ...]) -> PriceSeries:
    if config.prices is not None:
        series = config.prices
    elif config.price_file is not None:
        with open(config.price_file, "r", encoding="utf-8") as fh:
            series = load_price_series(fh.read())
    else:
        seed = config.price_seed if config.price_seed is not None else config.seed
        series = generate_price_series(locations, config.horizon, seed)

    for location in locations:
        if location not in series.prices:
            raise CoverageError(location, 0)
    if series.horizon < config.horizon:
        raise CoverageError(locations[0], series.horizon)
    return series


def _load_policy(config: SimConfig) -> Policy:
    model = config.model
    if config.policy in MODEL_POLICIES and model is None:
        if config.model_path is None:
            raise ConfigError(f"policy {config.policy!r} needs a model or model_path")
        model = load_model(config.model_path)
    policy = Policy(
        kind=config.policy,
        model=model,
        rng_seed=config.seed,
        power=config.power,
        record_scores=config.log_scores,
    )
    if config.policy in MODEL_POLICIES:
        policy.require_model()
    return policy


def run(config: SimConfig, sample_recorder: SampleRecorder | None = None) -> SimResult:
    """Simulate the scenario hour by hour; deterministic for a fixed config."""
    if config.horizon < 1:
        raise ConfigError("horizon must be >= 1")
    policy = _load_policy(config)
    requests = _load_workload(config)
    state = new_datacenter(config.pm_count, config.pm_template)
    locations = tuple(pm.location for pm in state.pms)
    prices = _load_prices(config, locations)

    arrivals: dict[int, list[WorkloadRequest]] = {}
    for request in requests:
        arrivals.setdefault(request.arrival, []).append(request)

    result = SimResult(
        pm_ids=tuple(pm.id for pm in state.pms),
        pm_locations=locations,
        horizon=config.horizon,
        policy=config.policy,
    )
    waiting: list[WorkloadRequest] = []

    for hour in range(config.horizon):
        state = with_clock(state, hour)
        state, _finished = remove_finished(state)

        new_requests = arrivals.get(hour, [])
        for request in new_requests:
            state = admit(state, request)
        pending = sorted(waiting + new_requests, key=lambda r: (r.arrival, r.id))

        snap = snapshot(state)
        price_now = {loc: prices.price(loc, hour) for loc in set(locations)}
        decision = schedule(policy, snap, pending, price_now, recorder=sample_recorder)

        for vm_id, pm_id in decision.assignments:
            state = place(state, vm_id, pm_id)
        migrations = consolidate(
            policy, state, price_now, threshold=config.consolidation_threshold
        )
        for vm_id, dst in migrations:
            state = migrate(state, vm_id, dst)
        decision.migrations = migrations
        result.migration_count += len(migrations)

        by_id = {r.id: r for r in pending}
        waiting = [by_id[vm_id] for vm_id in decision.deferred]
        for vm_id in decision.deferred:
            result.deferred_hours[vm_id] = result.deferred_hours.get(vm_id, 0) + 1

        per_pm, aggregate = step_energy(
            state, config.power, migrations=[dst for _, dst in migrations], dt=1.0
        )
        hour_cost = 0.0
        for pm in state.pms:
            price = price_now[pm.location]
            breakdown = per_pm[pm.id]
            cost = breakdown.total * price
            hour_cost += cost
            result.pm_energy_rows.append(
                (
                    hour,
                    pm.id,
                    pm.location,
                    EnergyBreakdown.make(
                        breakdown.processor, breakdown.cooling, breakdown.extra, cost
                    ),
                    price,
                )
            )
        hourly = EnergyBreakdown.make(
            aggregate.processor, aggregate.cooling, aggregate.extra, hour_cost
        )
        result.hourly.append(hourly)
        result.totals = result.totals.plus(hourly)

        snap_after = snapshot(state)
        result.utilisation.append([snap_after[pm].utilisation for pm in result.pm_ids])
        result.powered_on.append([snap_after[pm].powered_on for pm in result.pm_ids])
        result.prices_by_hour.append(
            {loc: price_now[loc] for loc in sorted(set(locations))}
        )

        event = {
            "hour": hour,
            "policy": config.policy,
            "assignments": [list(a) for a in decision.assignments],
            "deferred": list(decision.deferred),
            "migrations": [list(m) for m in migrations],
        }
        if config.log_scores and decision.scores:
            event["scores"] = decision.scores
        result.events.append(event)

    result.placed = sum(1 for vm in state.vms.values() if vm.start_hour is not None)
    result.deferred = len(waiting)
    return result


def compute_qos(result: SimResult) -> QoSReport:
    """Reduce a run to the headline utilisation / energy / cost metrics."""
    max_util = max((u for row in result.utilisation for u in row), default=0.0)
    if result.powered_on:
        mean_active = sum(sum(row) for row in result.powered_on) / len(result.powered_on)
    else:
        mean_active = 0.0
    return QoSReport(
        max_pm_utilisation=max_util,
        mean_active_pm_count=mean_active,
        total_energy=result.totals.total,
        total_cost=result.totals.cost,
        placed=result.placed,
        deferred=result.deferred,
        migrated=result.migration_count,
    )


@dataclass
class ComparisonTable:
    rows: list[tuple[str, QoSReport]]
    deltas: dict[tuple[str, str], dict[str, float | None]]


def compare(configs: list[SimConfig]) -> ComparisonTable:
    """Run several policies over identical workload/price realizations."""
    if not configs:
        raise ConfigError("compare needs at least one config")
    stripped = [
        dc_replace(c, policy="first_fit", model=None, model_path=None) for c in configs
    ]
    for i, other in enumerate(stripped[1:], start=1):
        if other != stripped[0]:
            raise ConfigError(
                f"config {i} differs from config 0 beyond policy/model; "
                "comparisons must share workload and price seeds"
            )

    rows = []
    for config in configs:
        rows.append((config.policy, compute_qos(run(config))))

    deltas: dict[tuple[str, str], dict[str, float | None]] = {}
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            (name_a, a), (name_b, b) = rows[i], rows[j]
            deltas[(name_a, name_b)] = {
                "energy_pct": _pct_delta(a.total_energy, b.total_energy),
                "cost_pct": _pct_delta(a.total_cost, b.total_cost),
            }
    return ComparisonTable(rows=rows, deltas=deltas)


def _pct_delta(base: float, other: float) -> float | None:
    if base == 0:
        return None
    return 100.0 * (other - base) / base


# ---------------------------------------------------------------------------
# Serialization


def result_to_json(result: SimResult) -> str:
    doc = {
        "policy": result.policy,
        "horizon": result.horizon,
        "pm_ids": list(result.pm_ids),
        "pm_locations": list(result.pm_locations),
        "utilisation": result.utilisation,
        "powered_on": result.powered_on,
        "hourly_energy": [_breakdown_dict(b) for b in result.hourly],
        "prices_by_hour": result.prices_by_hour,
        "totals": _breakdown_dict(result.totals),
        "events": result.events,
        "deferred_hours": {k: result.deferred_hours[k] for k in sorted(result.deferred_hours)},
        "placed": result.placed,
        "deferred": result.deferred,
        "migrations": result.migration_count,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _breakdown_dict(b: EnergyBreakdown) -> dict:
    return {
        "processor_kwh": b.processor,
        "cooling_kwh": b.cooling,
        "extra_kwh": b.extra,
        "total_kwh": b.total,
        "cost": b.cost,
    }


def qos_to_json(report: QoSReport) -> str:
    doc = {
        "max_pm_utilisation": report.max_pm_utilisation,
        "mean_active_pm_count": report.mean_active_pm_count,
        "total_energy_kwh": report.total_energy,
        "total_cost": report.total_cost,
        "placed": report.placed,
        "deferred": report.deferred,
        "migrated": report.migrated,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def energy_report_csv(result: SimResult) -> str:
    """Per-PM hourly series: fixed 6-decimal formatting for golden files."""
    lines = ["hour,pm,location,processor_kwh,cooling_kwh,extra_kwh,total_kwh,price,cost"]
    for hour, pm, location, b, price in result.pm_energy_rows:
        lines.append(
            f"{hour},{pm},{location},{b.processor:.6f},{b.cooling:.6f},"
            f"{b.extra:.6f},{b.total:.6f},{price:.6f},{b.cost:.6f}"
        )
    return "\n".join(lines) + "\n"


def decision_log_jsonl(result: SimResult) -> str:
    return "".join(json.dumps(event, sort_keys=True) + "\n" for event in result.events)


def comparison_to_csv(table: ComparisonTable) -> str:
    lines = ["policy,max_util,mean_active_pms,total_kwh,total_cost,placed,deferred,migrations"]
    for policy, r in table.rows:
        lines.append(
            f"{policy},{r.max_pm_utilisation:.6f},{r.mean_active_pm_count:.6f},"
            f"{r.total_energy:.6f},{r.total_cost:.6f},{r.placed},{r.deferred},{r.migrated}"
        )
    return "\n".join(lines) + "\n"
