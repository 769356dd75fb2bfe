import pytest
from hypothesis import given, strategies as st

from oracles import brute_force_apportion
from sliceforge.channel import channel_at
from sliceforge.domain import SliceKind
from sliceforge.scheduler import (AllocationError, PrbAllocation, allocation_from_slices, fractions_to_slice_prbs,
                                  largest_remainder, plan_service, rotate_active_set, serve_subframe,
                                  slice_to_ue_prbs)
from sliceforge.traffic import DownlinkBuffer, Packet


def test_rotation(cfg):
    assert rotate_active_set(cfg, 0).ue_ids == (0, 4, 8)
    assert rotate_active_set(cfg, 4).ue_ids == rotate_active_set(cfg, 0).ue_ids
    assert rotate_active_set(cfg, 2).ue_ids == (2, 6, 10)


def test_rotation_visits_everyone_once(cfg):
    seen = [u for k in range(cfg.group_count) for u in rotate_active_set(cfg, k).ue_ids]
    assert sorted(seen) == sorted(u.ue_id for u in cfg.ues)


def triple(d):
    return tuple(d[s] for s in SliceKind)


def test_fractions_examples():
    assert triple(fractions_to_slice_prbs((1 / 3, 1 / 3, 1 / 3), 52)) == (18, 17, 17)
    assert triple(fractions_to_slice_prbs((1, 0, 0), 52)) == (52, 0, 0)
    assert triple(fractions_to_slice_prbs((0.669, 0.268, 0.063), 52)) == (35, 14, 3)


@pytest.mark.parametrize("bad", [(0.5, 0.5, 0.5), (-0.1, 0.6, 0.5), (float("nan"), 0.5, 0.5), (1.0, 0.0)])
def test_fractions_reject_bad_input(bad):
    with pytest.raises(ValueError):
        fractions_to_slice_prbs(bad, 52)


@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3),
       st.integers(0, 200))
def test_fractions_sum_exactly(v, total):
    s = sum(v)
    fr = [x / s for x in v]
    if abs(sum(fr) - 1) > 1e-9:
        return
    out = fractions_to_slice_prbs(fr, total)
    assert sum(out.values()) == total and min(out.values()) >= 0


@given(st.lists(st.integers(0, 9), min_size=1, max_size=4).filter(any), st.integers(0, 12))
def test_largest_remainder_matches_oracle(d, total):
    assert tuple(largest_remainder(d, total)) == brute_force_apportion(d, total)


def test_slice_to_ue_examples():
    assert slice_to_ue_prbs(17, [(3, 100.0)]) == {3: 17}
    assert slice_to_ue_prbs(7, [(1, 110.0), (2, 100.0)]) == {1: 4, 2: 3}
    assert slice_to_ue_prbs(7, [(2, 100.0), (1, 110.0)]) == {1: 4, 2: 3}
    assert slice_to_ue_prbs(0, [(1, 110.0), (2, 100.0)]) == {1: 0, 2: 0}


def test_allocation_check():
    with pytest.raises(AllocationError):
        PrbAllocation({SliceKind.URLLC: 53, SliceKind.EMBB: 0, SliceKind.MMTC: 0}, {0: 53}, 52).check()
    with pytest.raises(AllocationError):
        PrbAllocation({SliceKind.URLLC: 5, SliceKind.EMBB: 0, SliceKind.MMTC: 0}, {0: 5}, 52).check([1])


def _channels(cfg, active, rate):
    out = {}
    for u in active:
        ch = channel_at(u, u.initial_distance, cfg)
        out[u.ue_id] = ch.__class__(**{**ch.__dict__, "per_prb_rate": rate})
    return out


def test_cell_cap_scaling(cfg):
    active = [cfg.ue(0), cfg.ue(4), cfg.ue(8)]
    ch = _channels(cfg, active, 40e6 / 48)
    alloc = allocation_from_slices({SliceKind.URLLC: 16, SliceKind.EMBB: 16, SliceKind.MMTC: 16}, active, ch, 52)
    plan = plan_service(alloc, ch, cfg)
    assert plan.scale == pytest.approx(0.7)
    assert sum(plan.rates.values()) == pytest.approx(28e6)

    ch = _channels(cfg, active, 10e6 / 48)
    assert plan_service(alloc, ch, cfg).scale == 1.0


def test_zero_grant_serves_nothing(cfg):
    active = [cfg.ue(0), cfg.ue(4), cfg.ue(8)]
    ch = _channels(cfg, active, 999e3)
    alloc = allocation_from_slices({SliceKind.URLLC: 0, SliceKind.EMBB: 26, SliceKind.MMTC: 26}, active, ch, 52)
    bufs = {u.ue_id: DownlinkBuffer() for u in active}
    for b in bufs.values():
        b.push(Packet(10_000, 0))
    served = serve_subframe(alloc, ch, bufs, cfg, 1)
    assert served[0] == 0 and served[4] > 0
