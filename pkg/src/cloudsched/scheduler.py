"""Placement policies: map (resources, requests) to scheduling decisions.

Four interchangeable policies share one driver: pending requests are
processed in arrival order against a working copy of the resource
snapshot, so a single step can fill a PM.  The learned policies score
feasible PMs with a graph network and take the argmin (ties go to the
first PM in snapshot order); the consolidator then tries to empty one
underloaded PM per step when the predicted saving is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace
from typing import Callable, Sequence

import numpy as np

from .datacenter import (
    DatacenterState,
    ResourceSnapshot,
    SnapshotEntry,
    feasible,
    snapshot as dc_snapshot,
)
from .energy import DEFAULT_POWER_MODEL, PowerModel, pm_power
from .errors import ConfigError, DomainError
from .gnn.graph import build_state_graph
from .gnn.models import GatedModel, GcnModel, score_placements
from .gnn.training import TrainSample
from .workload import WorkloadRequest

POLICY_KINDS = ("first_fit", "best_fit_energy", "random", "counter", "hunter")
MODEL_POLICIES = ("counter", "hunter")

CONSOLIDATION_THRESHOLD = 0.25


@dataclass
class ScheduleDecision:
    assignments: list[tuple[str, str]] = field(default_factory=list)  # (vm, pm)
    deferred: list[str] = field(default_factory=list)
    migrations: list[tuple[str, str]] = field(default_factory=list)  # (vm, dst pm)
    scores: dict[str, dict[str, float]] = field(default_factory=dict)  # vm -> pm -> score


@dataclass
class Policy:
    kind: str
    model: GcnModel | GatedModel | None = None
    rng_seed: int = 0
    power: PowerModel = DEFAULT_POWER_MODEL
    record_scores: bool = False

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        self._rng = np.random.default_rng(self.rng_seed)

    def require_model(self):
        if self.model is None:
            raise ConfigError(f"policy {self.kind!r} needs a model attached")
        expected = GcnModel if self.kind == "counter" else GatedModel
        if not isinstance(self.model, expected):
            raise ConfigError(
                f"policy {self.kind!r} needs a {expected.__name__}, got {type(self.model).__name__}"
            )


def incremental_energy(
    entry: SnapshotEntry, request: WorkloadRequest, power: PowerModel, dt: float = 1.0
) -> float:
    """Total-energy delta (kWh) of hosting the request for `dt` hours.

    Includes the idle block if the PM has to boot, plus the proportional
    cooling/extra overheads; this is both the best-fit objective and the
    training label.
    """
    before = pm_power(entry.utilisation, entry.powered_on, power)
    used = entry.cores - entry.free_cores
    after_util = (used + request.cores) / entry.cores
    after = pm_power(after_util, True, power)
    overhead = 1.0 + power.cooling_coefficient + power.extra_coefficient
    return (after - before) * dt / 1000.0 * overhead


def _after_placement(entry: SnapshotEntry, request: WorkloadRequest) -> SnapshotEntry:
    used = entry.cores - entry.free_cores + request.cores
    return dc_replace(
        entry,
        free_cores=entry.free_cores - request.cores,
        free_ram=entry.free_ram - request.ram,
        powered_on=True,
        utilisation=used / entry.cores,
    )


def _model_scores(
    model, working: ResourceSnapshot, request: WorkloadRequest, price_now
) -> dict[str, float]:
    graph = build_state_graph(working, [request], price_now)
    vm_node = len(working)
    node_scores = score_placements(model, graph, vm_node)
    return {graph.node_ids[node]: s for node, s in node_scores.items()}


def counter_score(
    model: GcnModel, snapshot: ResourceSnapshot, request: WorkloadRequest, price_now=None
) -> dict[str, float]:
    """Cluster-GCN scores over feasible PMs for one request."""
    return _model_scores(model, snapshot, request, price_now)


def hunter_score(
    model: GatedModel, snapshot: ResourceSnapshot, request: WorkloadRequest, price_now=None
) -> dict[str, float]:
    """Gated-network scores over feasible PMs for one request."""
    return _model_scores(model, snapshot, request, price_now)


def _argmin(scores: dict[str, float], order: Sequence[str]) -> str:
    best_pm = None
    best = None
    for pm_id in order:
        if pm_id in scores and (best is None or scores[pm_id] < best):
            best = scores[pm_id]
            best_pm = pm_id
    return best_pm


SampleRecorder = Callable[[TrainSample], None]


def schedule(
    policy: Policy,
    snapshot: ResourceSnapshot,
    pending: Sequence[WorkloadRequest],
    price_now: dict[str, float] | None = None,
    recorder: SampleRecorder | None = None,
) -> ScheduleDecision:
    """Assign each pending request per the policy, or defer it."""
    if policy.kind in MODEL_POLICIES:
        policy.require_model()

    working = dict(snapshot)
    order = list(working)
    decision = ScheduleDecision()

    for request in sorted(pending, key=lambda r: (r.arrival, r.id)):
        candidates = [pm for pm in order if feasible(working[pm], request)]
        if not candidates:
            decision.deferred.append(request.id)
            continue

        if policy.kind == "first_fit":
            chosen = candidates[0]
        elif policy.kind == "best_fit_energy":
            deltas = {
                pm: incremental_energy(working[pm], request, policy.power)
                for pm in candidates
            }
            chosen = _argmin(deltas, order)
        elif policy.kind == "random":
            chosen = candidates[int(policy._rng.integers(len(candidates)))]
        else:
            scores = _model_scores(policy.model, working, request, price_now)
            if not scores:
                decision.deferred.append(request.id)
                continue
            chosen = _argmin(scores, order)
            if policy.record_scores:
                decision.scores[request.id] = dict(scores)

        if recorder is not None:
            graph = build_state_graph(working, [request], price_now)
            recorder(
                TrainSample(
                    graph=graph,
                    vm_node=len(working),
                    pm_node=order.index(chosen),
                    label=incremental_energy(working[chosen], request, policy.power),
                )
            )

        decision.assignments.append((request.id, chosen))
        working[chosen] = _after_placement(working[chosen], request)

    return decision


def consolidate(
    policy: Policy,
    state: DatacenterState,
    price_now: dict[str, float] | None = None,
    threshold: float = CONSOLIDATION_THRESHOLD,
) -> list[tuple[str, str]]:
    """Plan migrations emptying at most one underloaded PM this step.

    Only the learned policies consolidate.  A PM below the utilisation
    threshold is emptied only if every VM fits on other powered-on PMs
    and the reclaimed idle energy beats the migration penalties.
    """
    if policy.kind not in MODEL_POLICIES:
        return []
    policy.require_model()

    snap = dc_snapshot(state)
    order = list(snap)
    candidates = sorted(
        (pm for pm in order if snap[pm].powered_on and snap[pm].utilisation < threshold),
        key=lambda pm: (snap[pm].utilisation, order.index(pm)),
    )

    for source in candidates:
        vms = sorted(
            (vm for vm in state.vms.values() if vm.placed_on == source),
            key=lambda v: (-v.request.cores, v.id),
        )
        working = {
            pm: snap[pm] for pm in order if pm != source and snap[pm].powered_on
        }
        if not working:
            continue

        plan: list[tuple[str, str]] = []
        feasible_plan = True
        for vm in vms:
            remaining = max(
                1, vm.start_hour + vm.request.duration - state.clock
            )
            scoring_request = dc_replace(vm.request, duration=remaining)
            scores = _model_scores(policy.model, working, scoring_request, price_now)
            if not scores:
                feasible_plan = False
                break
            dst = _argmin(scores, order)
            plan.append((vm.id, dst))
            working[dst] = _after_placement(working[dst], vm.request)

        if not feasible_plan or not plan:
            continue
        saving = policy.power.idle_power / 1000.0 - policy.power.migration_penalty * len(plan)
        if saving > 0:
            return plan
    return []


def collect_training_data(
    scenario,
    teacher: str = "best_fit_energy",
    episodes: int = 1,
    seed: int = 0,
) -> list[TrainSample]:
    """Gather (graph, pair, realized-energy) samples from teacher episodes.

    Each episode re-runs the scenario with a reseeded workload; one
    sample is recorded per successful placement.  Pure function of
    (scenario, teacher, episodes, seed).
    """
    from . import sim  # placed here: sim drives the scheduler, not vice versa

    if episodes < 1:
        raise DomainError("episodes must be >= 1")
    if teacher in MODEL_POLICIES:
        raise ConfigError("teacher must be a heuristic policy")

    samples: list[TrainSample] = []
    for episode in range(episodes):
        cfg = dc_replace(
            scenario,
            policy=teacher,
            model=None,
            model_path=None,
            workload_seed=seed + episode,
        )
        sim.run(cfg, sample_recorder=samples.append)
    return samples
