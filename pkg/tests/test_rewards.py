import pytest
from hypothesis import given, strategies as st

from sliceforge.domain import SliceKind
from sliceforge.rewards import KpiWindow, embb_reward, mmtc_reward, reward_from_kpis, total_reward, urllc_reward

ONES = {s: 1.0 for s in SliceKind}


@pytest.mark.parametrize("t,exp", [(250, 0), (750, -0.5), (1500, -1)])
def test_urllc(t, exp):
    assert urllc_reward(t, 500) == exp


@pytest.mark.parametrize("b,exp", [(3e5, 0), (1.5e5, -0.5), (0, -1)])
def test_embb(b, exp):
    assert embb_reward(b, 3e5) == exp


@pytest.mark.parametrize("b,exp", [(1e5, 0), (5e4, -0.5), (0, -1)])
def test_mmtc(b, exp):
    assert mmtc_reward(b, 1e5) == exp


def test_mmtc_idle_window():
    assert mmtc_reward(0, 0) == 0


def test_totals():
    assert total_reward(-0.5, 0, -1, ONES).total == -1.5
    assert total_reward(0, 0, 0, ONES).total == 0
    w = {SliceKind.URLLC: 2.0, SliceKind.EMBB: 1.0, SliceKind.MMTC: 1.0}
    assert total_reward(-1, 0, 0, w).total == -2


def test_embb_absent_scores_zero():
    assert reward_from_kpis(KpiWindow(t_avg=0, b_avg=0, b_target=0), 500, ONES).r_embb == 0


pos = st.floats(0, 1e9, allow_nan=False)


@given(pos, pos)
def test_urllc_monotone(a, b):
    lo, hi = sorted((a, b))
    assert urllc_reward(lo, 500) >= urllc_reward(hi, 500)


@given(pos, pos, st.floats(1, 1e7))
def test_ratio_rewards_monotone(a, b, target):
    lo, hi = sorted((a, b))
    assert embb_reward(lo, target) <= embb_reward(hi, target)
    assert mmtc_reward(lo, target) <= mmtc_reward(hi, target)


@given(st.floats(0, 1e7), st.floats(1, 1e7), st.integers(1, 1000))
def test_scale_invariance(b, target, k):
    assert embb_reward(k * b, k * target) == pytest.approx(embb_reward(b, target), abs=1e-12)
