"""Checked loads and stores, trap modes, range checking, and the fault
wire format."""

import pytest
from hypothesis import given, settings, strategies as st

from tagsim import (
    FaultError,
    MtConfig,
    Simulator,
    StoreMode,
    TagMismatchError,
    UsageError,
)
from tagsim.access import EFAULT, RangeCheckError
from tagsim.faults import AccessKind, FaultKind, FaultReport
from tagsim.tagspace import offset_ptr, pack, unpack
from conftest import byte_oracle_check

CFG16 = MtConfig(tg=16, ts=8)
IMPRECISE16 = MtConfig(tg=16, ts=8, store_mode=StoreMode.IMPRECISE_STORES)


def imprecise_sim(seed=1):
    return Simulator(IMPRECISE16, seed=seed)


# ----------------------------------------------------------------------
# basics


@pytest.mark.parametrize("width", [1, 2, 4, 8])
def test_load_store_roundtrip(sim16, width):
    p = sim16.malloc(16)
    data = bytes(range(0x30, 0x30 + width))
    sim16.store(p, data)
    assert sim16.load(p, width) == data


@pytest.mark.parametrize("width", [0, 3, 5, 16])
def test_bad_width_rejected(sim16, width):
    p = sim16.malloc(16)
    with pytest.raises(UsageError):
        sim16.load(p, width)
    with pytest.raises(UsageError):
        sim16.store(p, b"\x00" * width)


def test_access_may_not_wrap_address_space(sim16):
    near_top = pack((1 << 56) - 4, 0, sim16.cfg)
    with pytest.raises(UsageError):
        sim16.load(near_top, 8)


def test_match_all_memory_is_reachable_through_any_tag(sim16):
    # untagged scratch address, never allocated
    scratch = 0x9000
    for tag in (0, 1, 7, 255):
        sim16.engine.store(pack(scratch, tag, sim16.cfg), b"\x5a")
        assert sim16.engine.load(pack(scratch, tag, sim16.cfg), 1) == b"\x5a"


def test_untagged_pointer_cannot_reach_tagged_memory(sim16):
    p = sim16.malloc(16)
    addr, _ = unpack(p, sim16.cfg)
    with pytest.raises(TagMismatchError):
        sim16.load(pack(addr, 0, sim16.cfg), 1)


def test_mismatch_report_contents(sim16):
    p = sim16.malloc(16)
    addr, ptag = unpack(p, sim16.cfg)
    wrong = pack(addr, (ptag % 255) + 1 if (ptag % 255) + 1 != ptag else 1, sim16.cfg)
    with pytest.raises(TagMismatchError) as exc:
        sim16.load(wrong, 1)
    r = exc.value.report
    assert r.kind is FaultKind.TAG_MISMATCH
    assert r.access is AccessKind.LOAD
    assert r.mem_tag == ptag
    assert r.granule_base == addr - addr % 16
    assert r.chunk_state == "live"
    assert r.deferred is False


# ----------------------------------------------------------------------
# multi-granule accesses


def test_spanning_access_checks_every_granule(sim16):
    p = sim16.malloc(32)
    wide = offset_ptr(p, 12, sim16.cfg)  # bytes 12..19 span two granules
    sim16.store(wide, b"\x01" * 8)
    assert sim16.load(wide, 8) == b"\x01" * 8


def test_spanning_access_faults_on_second_granule(sim16):
    p = sim16.malloc(16)  # second granule stays untagged at first
    addr, ptag = unpack(p, sim16.cfg)
    # give the next granule a different tag by hand
    other = 1 if ptag != 1 else 2
    sim16.shadow.set_range(addr + 16, 16, other)
    wide = offset_ptr(p, 12, sim16.cfg)
    with pytest.raises(TagMismatchError) as exc:
        sim16.load(wide, 8)
    r = exc.value.report
    # first failing granule in address order is the second one
    assert r.granule_base == addr + 16
    assert r.mem_tag == other


# ----------------------------------------------------------------------
# trap modes


def test_precise_store_raises_and_suppresses_write():
    sim = Simulator(CFG16, seed=2)
    p = sim.malloc(16)
    sim.store(p, b"\x77" * 8)
    addr, ptag = unpack(p, sim.cfg)
    wrong = pack(addr, ptag ^ 0x01, sim.cfg)
    with pytest.raises(TagMismatchError):
        sim.store(wrong, b"\xff" * 8)
    assert sim.memory.read(addr, 8) == b"\x77" * 8


def test_imprecise_stores_defer_in_program_order():
    sim = imprecise_sim()
    p = sim.malloc(48)
    addr, ptag = unpack(p, sim.cfg)
    before = sim.memory.read(addr, 48)
    wrong = pack(addr, ptag ^ 0x01, sim.cfg)
    n = 5
    for i in range(n):
        sim.store(offset_ptr(wrong, 16 * (i % 3), sim.cfg), bytes([i]))
    reports = sim.sync()
    assert len(reports) == n
    assert all(r.deferred for r in reports)
    assert all(r.access is AccessKind.STORE for r in reports)
    # program order: the i-th report carries the i-th store's address
    for i, r in enumerate(reports):
        assert r.word == offset_ptr(wrong, 16 * (i % 3), sim.cfg)
    # zero memory mutations
    assert sim.memory.read(addr, 48) == before
    # the queue drained
    assert sim.sync() == []


def test_imprecise_mode_keeps_loads_precise():
    sim = imprecise_sim()
    p = sim.malloc(16)
    addr, ptag = unpack(p, sim.cfg)
    with pytest.raises(TagMismatchError):
        sim.load(pack(addr, ptag ^ 0x01, sim.cfg), 1)
    assert sim.sync() == []


def test_imprecise_matching_stores_still_commit():
    sim = imprecise_sim()
    p = sim.malloc(16)
    sim.store(p, b"\x3c" * 4)
    assert sim.load(p, 4) == b"\x3c" * 4
    assert sim.sync() == []


# ----------------------------------------------------------------------
# range checking


def test_range_check_accepts_owned_range(sim16):
    p = sim16.malloc(64)
    assert sim16.check_user_range(p, 64) is None


def test_range_check_zero_length_is_vacuous(sim16):
    assert sim16.check_user_range(0xDEAD, 0) is None


def test_range_check_negative_length_rejected(sim16):
    with pytest.raises(UsageError):
        sim16.check_user_range(0x1000, -1)


def test_range_check_flags_one_past_end(sim16):
    p = sim16.malloc(16)
    addr, ptag = unpack(p, sim16.cfg)
    other = 1 if ptag != 1 else 2
    sim16.shadow.set_range(addr + 16, 16, other)
    verdict = sim16.check_user_range(p, 17)
    assert isinstance(verdict, RangeCheckError)
    assert verdict.errno == EFAULT
    assert verdict.report.access is AccessKind.RANGE_CHECK
    assert verdict.report.granule_base == addr + 16


def test_range_check_never_raises_on_mismatch(sim16):
    p = sim16.malloc(16)
    sim16.free(p)
    verdict = sim16.check_user_range(p, 16)
    assert verdict is not None
    assert verdict.errno == EFAULT


@settings(max_examples=150, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=100_000),
    size=st.integers(min_value=1, max_value=96),
    start=st.integers(min_value=-8, max_value=104),
    length=st.integers(min_value=0, max_value=64),
)
def test_range_check_equals_byte_oracle(seed, size, start, length):
    """check_user_range agrees with probing every byte individually."""
    sim = Simulator(CFG16, seed=seed)
    sim.malloc(32)  # noise allocation to vary the layout
    p = sim.malloc(size)
    probe = offset_ptr(p, start, sim.cfg)
    verdict = sim.check_user_range(probe, length)
    assert (verdict is None) == byte_oracle_check(sim, probe, length)


# ----------------------------------------------------------------------
# wire format


def test_fault_render_golden_line():
    report = FaultReport(
        kind=FaultKind.TAG_MISMATCH,
        access=AccessKind.LOAD,
        word=0x0700_0000_1000_0040,
        ptr_tag=0x7,
        mem_tag=0x3,
        granule_base=0x1000_0040,
        chunk_id=12,
        chunk_state="freed",
    )
    assert report.render() == (
        "FAULT kind=tag-mismatch access=load ptr=0x0700000010000040"
        " ptag=0x7 mtag=0x3 chunk=12 state=freed deferred=0"
    )


def test_fault_render_without_provenance():
    report = FaultReport(
        kind=FaultKind.TAG_MISMATCH,
        access=AccessKind.STORE,
        word=0x1234,
        ptr_tag=0,
        mem_tag=5,
        granule_base=0x1230,
        deferred=True,
    )
    line = report.render()
    assert " chunk=- state=- deferred=1" in line


def test_fault_json_matches_render_fields():
    report = FaultReport(
        kind=FaultKind.DOUBLE_FREE,
        access=AccessKind.FREE,
        word=0xAB00_0000_0000_1000,
        ptr_tag=0xAB,
        mem_tag=0x11,
        granule_base=0x1000,
        chunk_id=3,
        chunk_state="freed",
    )
    d = report.to_json_dict()
    assert d == {
        "kind": "double-free",
        "access": "free",
        "ptr": "0xab00000000001000",
        "ptag": "0xab",
        "mtag": "0x11",
        "chunk": 3,
        "state": "freed",
        "deferred": 0,
    }


def test_fault_error_message_is_the_rendering(sim16):
    p = sim16.malloc(16)
    sim16.free(p)
    with pytest.raises(FaultError) as exc:
        sim16.load(p, 1)
    assert str(exc.value) == exc.value.report.render()
