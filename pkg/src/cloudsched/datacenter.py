"""Authoritative data-centre state and VM lifecycle operations.

DatacenterState is a value: every operation takes a state and returns a
new one (or raises, leaving the input untouched), so a failed call can
never corrupt the live inventory.  The simulation loop owns exactly one
state at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import CapacityError, DomainError, NotFoundError
from .workload import WorkloadRequest


class VmState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    PAUSED = "paused"
    FINISHED = "finished"


@dataclass(frozen=True)
class PhysicalMachine:
    id: str
    location: str
    cores: int
    max_frequency: int  # MHz
    min_frequency: int
    ram: int  # GiB
    peak_power: float  # watts
    idle_power: float

    def __post_init__(self):
        if not (0 < self.idle_power <= self.peak_power):
            raise DomainError(f"{self.id}: need 0 < idle_power <= peak_power")
        if self.min_frequency > self.max_frequency:
            raise DomainError(f"{self.id}: min_frequency > max_frequency")
        if self.cores < 1 or self.ram < 1:
            raise DomainError(f"{self.id}: cores and ram must be >= 1")


# Default server template for the 8-PM scenario: 32 cores, 1600-3400 MHz,
# 100 W idle / 200 W peak.  RAM is configured per-server in the 16-64 GiB
# range; 16 GiB is the default because it puts default-scenario totals in
# the intended ~100-120 kWh regime (64 GiB leaves RAM unconstrained and
# roughly halves that).
DEFAULT_PM_TEMPLATE = PhysicalMachine(
    id="pm-template",
    location="loc-template",
    cores=32,
    max_frequency=3400,
    min_frequency=1600,
    ram=16,
    peak_power=200.0,
    idle_power=100.0,
)


@dataclass(frozen=True)
class VirtualMachine:
    id: str
    request: WorkloadRequest
    state: VmState = VmState.PENDING
    placed_on: str | None = None
    start_hour: int | None = None
    migrations: int = 0


@dataclass(frozen=True)
class SnapshotEntry:
    """Live free resources of one PM, as handed to schedulers."""

    free_cores: int
    free_ram: int
    max_frequency: int
    powered_on: bool
    utilisation: float  # allocated-core fraction
    cores: int
    ram: int
    location: str


ResourceSnapshot = dict[str, SnapshotEntry]


@dataclass(frozen=True)
class DatacenterState:
    pms: tuple[PhysicalMachine, ...]
    vms: dict[str, VirtualMachine]
    placements: dict[str, str]  # vm id -> pm id
    powered_on: frozenset[str]
    clock: int = 0

    def pm(self, pm_id: str) -> PhysicalMachine:
        for pm in self.pms:
            if pm.id == pm_id:
                return pm
        raise NotFoundError(f"unknown PM {pm_id!r}")


def new_datacenter(pm_count: int, template: PhysicalMachine = DEFAULT_PM_TEMPLATE) -> DatacenterState:
    """Build a fresh state: pm-0..pm-(n-1), one location each, all off."""
    if pm_count < 1:
        raise DomainError("pm_count must be >= 1")
    pms = tuple(
        replace(template, id=f"pm-{i}", location=f"loc-{i}") for i in range(pm_count)
    )
    return DatacenterState(pms=pms, vms={}, placements={}, powered_on=frozenset(), clock=0)


def with_clock(state: DatacenterState, hour: int) -> DatacenterState:
    return replace(state, clock=hour)


def admit(state: DatacenterState, request: WorkloadRequest) -> DatacenterState:
    """Register a pending VM for a request; placement happens separately."""
    if request.id in state.vms:
        raise DomainError(f"VM id {request.id!r} already admitted")
    vms = dict(state.vms)
    vms[request.id] = VirtualMachine(id=request.id, request=request)
    return replace(state, vms=vms)


def _used(state: DatacenterState, pm_id: str) -> tuple[int, int]:
    cores = ram = 0
    for vm_id, placed in state.placements.items():
        if placed == pm_id:
            req = state.vms[vm_id].request
            cores += req.cores
            ram += req.ram
    return cores, ram


def feasible(entry: SnapshotEntry, request: WorkloadRequest) -> bool:
    """True iff the PM has the cores, RAM and frequency the request needs."""
    return (
        entry.free_cores >= request.cores
        and entry.free_ram >= request.ram
        and entry.max_frequency >= request.cpu_frequency
    )


def _check_fit(pm: PhysicalMachine, free_cores: int, free_ram: int, request: WorkloadRequest):
    if free_cores < request.cores:
        raise CapacityError(
            "cores",
            f"{pm.id}: {request.cores} cores requested, {free_cores} free",
        )
    if free_ram < request.ram:
        raise CapacityError(
            "ram", f"{pm.id}: {request.ram} GiB requested, {free_ram} free"
        )
    if pm.max_frequency < request.cpu_frequency:
        raise CapacityError(
            "frequency",
            f"{pm.id}: {request.cpu_frequency} MHz requested, max {pm.max_frequency}",
        )


def place(state: DatacenterState, vm_id: str, pm_id: str) -> DatacenterState:
    """Start (or resume) a VM on a PM, booting the PM if needed."""
    vm = state.vms.get(vm_id)
    if vm is None:
        raise NotFoundError(f"unknown VM {vm_id!r}")
    pm = state.pm(pm_id)
    if vm.state not in (VmState.PENDING, VmState.PAUSED):
        raise DomainError(f"VM {vm_id!r} is {vm.state.value}, cannot place")

    used_cores, used_ram = _used(state, pm_id)
    _check_fit(pm, pm.cores - used_cores, pm.ram - used_ram, vm.request)

    vms = dict(state.vms)
    vms[vm_id] = replace(
        vm,
        state=VmState.RUNNING,
        placed_on=pm_id,
        start_hour=vm.start_hour if vm.start_hour is not None else state.clock,
    )
    placements = dict(state.placements)
    placements[vm_id] = pm_id
    return replace(
        state, vms=vms, placements=placements, powered_on=state.powered_on | {pm_id}
    )


def remove_finished(state: DatacenterState) -> tuple[DatacenterState, list[str]]:
    """Finish every running VM whose duration has elapsed; power off emptied PMs."""
    finished = [
        vm.id
        for vm in state.vms.values()
        if vm.state is VmState.RUNNING
        and state.clock >= vm.start_hour + vm.request.duration
    ]
    if not finished:
        return state, []
    finished.sort()

    vms = dict(state.vms)
    placements = dict(state.placements)
    for vm_id in finished:
        vms[vm_id] = replace(vms[vm_id], state=VmState.FINISHED, placed_on=None)
        del placements[vm_id]
    still_hosting = set(placements.values())
    powered = frozenset(pm for pm in state.powered_on if pm in still_hosting)
    return replace(state, vms=vms, placements=placements, powered_on=powered), finished


def pause(state: DatacenterState, vm_id: str) -> DatacenterState:
    """Suspend a running VM, releasing its resources until re-placed."""
    vm = state.vms.get(vm_id)
    if vm is None:
        raise NotFoundError(f"unknown VM {vm_id!r}")
    if vm.state is not VmState.RUNNING:
        raise DomainError(f"VM {vm_id!r} is {vm.state.value}, cannot pause")
    src = vm.placed_on
    vms = dict(state.vms)
    vms[vm_id] = replace(vm, state=VmState.PAUSED, placed_on=None)
    placements = dict(state.placements)
    del placements[vm_id]
    powered = state.powered_on
    if src not in set(placements.values()):
        powered = powered - {src}
    return replace(state, vms=vms, placements=placements, powered_on=powered)


def migrate(state: DatacenterState, vm_id: str, dst_pm: str) -> DatacenterState:
    """Move a running VM to another PM atomically."""
    vm = state.vms.get(vm_id)
    if vm is None:
        raise NotFoundError(f"unknown VM {vm_id!r}")
    if vm.state is not VmState.RUNNING:
        raise DomainError(f"VM {vm_id!r} is {vm.state.value}, cannot migrate")
    dst = state.pm(dst_pm)
    src = vm.placed_on
    if dst_pm == src:
        raise DomainError(f"VM {vm_id!r} already on {dst_pm}")

    used_cores, used_ram = _used(state, dst_pm)
    _check_fit(dst, dst.cores - used_cores, dst.ram - used_ram, vm.request)

    vms = dict(state.vms)
    vms[vm_id] = replace(vm, placed_on=dst_pm, migrations=vm.migrations + 1)
    placements = dict(state.placements)
    placements[vm_id] = dst_pm
    powered = state.powered_on | {dst_pm}
    if src not in set(placements.values()):
        powered = powered - {src}
    return replace(state, vms=vms, placements=placements, powered_on=powered)


def snapshot(state: DatacenterState) -> ResourceSnapshot:
    """Pure read of per-PM free resources, in PM index order."""
    snap: ResourceSnapshot = {}
    for pm in state.pms:
        used_cores, used_ram = _used(state, pm.id)
        snap[pm.id] = SnapshotEntry(
            free_cores=pm.cores - used_cores,
            free_ram=pm.ram - used_ram,
            max_frequency=pm.max_frequency,
            powered_on=pm.id in state.powered_on,
            utilisation=used_cores / pm.cores,
            cores=pm.cores,
            ram=pm.ram,
            location=pm.location,
        )
    return snap


def validate(state: DatacenterState) -> None:
    """Raise DomainError if any structural invariant is broken (test hook)."""
    for pm in state.pms:
        used_cores, used_ram = _used(state, pm.id)
        if used_cores > pm.cores:
            raise DomainError(f"{pm.id}: core capacity exceeded ({used_cores}/{pm.cores})")
        if used_ram > pm.ram:
            raise DomainError(f"{pm.id}: ram capacity exceeded ({used_ram}/{pm.ram})")
    hosting = set(state.placements.values())
    for vm in state.vms.values():
        if vm.state is VmState.RUNNING:
            if vm.placed_on is None or state.placements.get(vm.id) != vm.placed_on:
                raise DomainError(f"{vm.id}: running VM placement mismatch")
        elif vm.id in state.placements:
            raise DomainError(f"{vm.id}: non-running VM present in placements")
    for pm in state.pms:
        if (pm.id in state.powered_on) != (pm.id in hosting):
            raise DomainError(f"{pm.id}: power status out of step with hosting")


def state_dump(state: DatacenterState) -> dict:
    """JSON-ready snapshot of the full state with stable key ordering."""
    return {
        "clock": state.clock,
        "pms": [
            {
                "id": pm.id,
                "location": pm.location,
                "cores": pm.cores,
                "max_frequency": pm.max_frequency,
                "min_frequency": pm.min_frequency,
                "ram": pm.ram,
                "peak_power": pm.peak_power,
                "idle_power": pm.idle_power,
                "powered_on": pm.id in state.powered_on,
            }
            for pm in state.pms
        ],
        "vms": [
            {
                "id": vm.id,
                "state": vm.state.value,
                "placed_on": vm.placed_on,
                "start_hour": vm.start_hour,
                "migrations": vm.migrations,
                "request": {
                    "id": vm.request.id,
                    "cpu_frequency": vm.request.cpu_frequency,
                    "cores": vm.request.cores,
                    "ram": vm.request.ram,
                    "duration": vm.request.duration,
                    "arrival": vm.request.arrival,
                },
            }
            for vm in sorted(state.vms.values(), key=lambda v: v.id)
        ],
        "placements": {k: state.placements[k] for k in sorted(state.placements)},
    }
