import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from cloudsched.datacenter import (
    DEFAULT_PM_TEMPLATE,
    SnapshotEntry,
    VmState,
    admit,
    feasible,
    migrate,
    new_datacenter,
    pause,
    place,
    remove_finished,
    snapshot,
    state_dump,
    validate,
    with_clock,
)
from cloudsched.errors import CapacityError, DomainError, NotFoundError
from cloudsched.workload import WorkloadRequest

BIG_RAM = replace(DEFAULT_PM_TEMPLATE, ram=64)


def req(id="vm-x", cores=4, ram=8, freq=2000, duration=2, arrival=0):
    return WorkloadRequest(
        id=id, cpu_frequency=freq, cores=cores, ram=ram, duration=duration, arrival=arrival
    )


class TestNewDatacenter:
    def test_table_defaults(self):
        state = new_datacenter(8)
        assert len(state.pms) == 8
        assert all(pm.cores == 32 for pm in state.pms)
        assert [pm.id for pm in state.pms] == [f"pm-{i}" for i in range(8)]
        assert len({pm.location for pm in state.pms}) == 8
        assert state.powered_on == frozenset()
        assert state.clock == 0

    def test_single_pm(self):
        state = new_datacenter(1)
        assert len(state.pms) == 1

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            new_datacenter(0)

    def test_fresh_snapshot_all_idle(self):
        snap = snapshot(new_datacenter(3))
        assert all(e.utilisation == 0.0 and not e.powered_on for e in snap.values())
        validate(new_datacenter(3))


class TestFeasible:
    def entry(self, free_cores=32, free_ram=64, max_freq=3400):
        return SnapshotEntry(
            free_cores=free_cores,
            free_ram=free_ram,
            max_frequency=max_freq,
            powered_on=False,
            utilisation=0.0,
            cores=32,
            ram=64,
            location="loc-0",
        )

    def test_all_margins_positive(self):
        assert feasible(self.entry(), req(cores=4, ram=8, freq=2000))

    def test_frequency_over_table_max(self):
        assert not feasible(self.entry(), req(cores=1, ram=1, freq=3500))

    def test_boundary_inclusive(self):
        assert feasible(self.entry(free_cores=4, free_ram=8), req(cores=4, ram=8, freq=3400))


class TestPlace:
    def test_exact_core_fill(self):
        state = new_datacenter(1, BIG_RAM)
        for i in range(32):
            state = admit(state, req(id=f"vm-{i:02d}", cores=1, ram=1))
            state = place(state, f"vm-{i:02d}", "pm-0")
        assert snapshot(state)["pm-0"].utilisation == 1.0
        validate(state)

    def test_pigeonhole_33rd(self):
        state = new_datacenter(1, BIG_RAM)
        for i in range(32):
            state = admit(state, req(id=f"vm-{i:02d}", cores=1, ram=1))
            state = place(state, f"vm-{i:02d}", "pm-0")
        state = admit(state, req(id="vm-32", cores=1, ram=1))
        with pytest.raises(CapacityError) as err:
            place(state, "vm-32", "pm-0")
        assert err.value.resource == "cores"

    def test_boot_on_demand(self):
        state = admit(new_datacenter(2), req())
        assert "pm-1" not in state.powered_on
        state = place(state, "vm-x", "pm-1")
        assert "pm-1" in state.powered_on

    def test_unknown_ids(self):
        state = new_datacenter(1)
        with pytest.raises(NotFoundError):
            place(state, "vm-ghost", "pm-0")
        state = admit(state, req())
        with pytest.raises(NotFoundError):
            place(state, "vm-x", "pm-9")

    def test_start_hour_set_once(self):
        state = admit(with_clock(new_datacenter(2), 4), req(duration=10))
        state = place(state, "vm-x", "pm-0")
        assert state.vms["vm-x"].start_hour == 4
        state = pause(with_clock(state, 6), "vm-x")
        state = place(with_clock(state, 7), "vm-x", "pm-1")
        assert state.vms["vm-x"].start_hour == 4  # resume keeps the original start


class TestRemoveFinished:
    def test_duration_elapsed_powers_off(self):
        state = admit(new_datacenter(1), req(duration=1))
        state = place(state, "vm-x", "pm-0")
        state, finished = remove_finished(with_clock(state, 1))
        assert finished == ["vm-x"]
        assert state.vms["vm-x"].state is VmState.FINISHED
        assert state.powered_on == frozenset()

    def test_48h_still_running_at_47(self):
        state = admit(new_datacenter(1), req(duration=48))
        state = place(state, "vm-x", "pm-0")
        state, finished = remove_finished(with_clock(state, 47))
        assert finished == []
        assert state.vms["vm-x"].state is VmState.RUNNING

    def test_empty_state_identity(self):
        state = new_datacenter(2)
        after, finished = remove_finished(state)
        assert finished == [] and after == state


class TestMigrate:
    def two_pm_one_vm(self):
        state = admit(new_datacenter(2), req())
        return place(state, "vm-x", "pm-0")

    def test_consolidation_base_case(self):
        state = migrate(self.two_pm_one_vm(), "vm-x", "pm-1")
        assert state.powered_on == frozenset({"pm-1"})
        assert state.placements["vm-x"] == "pm-1"

    def test_full_destination_atomic(self):
        state = new_datacenter(2, BIG_RAM)
        state = admit(state, req(id="vm-big", cores=32, ram=32))
        state = place(state, "vm-big", "pm-1")
        state = admit(state, req(id="vm-x", cores=4, ram=4))
        state = place(state, "vm-x", "pm-0")
        before = state_dump(state)
        with pytest.raises(CapacityError):
            migrate(state, "vm-x", "pm-1")
        assert state_dump(state) == before

    def test_migration_counter(self):
        state = self.two_pm_one_vm()
        state = migrate(state, "vm-x", "pm-1")
        state = migrate(state, "vm-x", "pm-0")
        assert state.vms["vm-x"].migrations == 2

    def test_noop_rejected(self):
        with pytest.raises(DomainError):
            migrate(self.two_pm_one_vm(), "vm-x", "pm-0")


class TestSnapshot:
    def test_fresh_8pm(self):
        snap = snapshot(new_datacenter(8))
        assert len(snap) == 8
        assert all(e.free_cores == 32 for e in snap.values())

    def test_half_utilisation(self):
        state = admit(new_datacenter(2), req(cores=16, ram=8))
        state = place(state, "vm-x", "pm-0")
        assert snapshot(state)["pm-0"].utilisation == 0.5

    def test_purity(self):
        state = admit(new_datacenter(2), req())
        state = place(state, "vm-x", "pm-0")
        assert snapshot(state) == snapshot(state)


def test_state_dump_stable():
    state = admit(new_datacenter(2), req())
    state = place(state, "vm-x", "pm-0")
    dump = state_dump(state)
    assert list(dump) == ["clock", "pms", "vms", "placements"]
    assert dump["placements"] == {"vm-x": "pm-0"}


# Random operation sequences: capacity safety, placement-map consistency,
# power discipline, and atomicity must survive anything.

op_strategy = st.lists(
    st.tuples(
        st.sampled_from(["admit_place", "migrate", "finish", "tick", "pause"]),
        st.integers(min_value=0, max_value=7),
        st.integers(min_value=1, max_value=32),
        st.integers(min_value=1, max_value=24),
    ),
    max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(op_strategy, st.integers(min_value=1, max_value=4))
def test_random_operations_keep_invariants(ops, pm_count):
    state = new_datacenter(pm_count, BIG_RAM)
    counter = 0
    for kind, pm_idx, cores, duration in ops:
        pm_id = f"pm-{pm_idx % pm_count}"
        if kind == "admit_place":
            r = req(id=f"vm-{counter:03d}", cores=cores, ram=max(1, cores // 2),
                    duration=duration, arrival=state.clock)
            counter += 1
            state = admit(state, r)
        before = state_dump(state)
        try:
            if kind == "admit_place":
                state = place(state, r.id, pm_id)
            elif kind == "migrate":
                running = [v.id for v in state.vms.values() if v.state is VmState.RUNNING]
                if running:
                    state = migrate(state, running[0], pm_id)
            elif kind == "finish":
                state, _ = remove_finished(state)
            elif kind == "tick":
                state = with_clock(state, state.clock + 1)
            elif kind == "pause":
                running = [v.id for v in state.vms.values() if v.state is VmState.RUNNING]
                if running:
                    state = pause(state, running[-1])
        except (CapacityError, DomainError, NotFoundError):
            assert state_dump(state) == before  # failed ops change nothing
        validate(state)
