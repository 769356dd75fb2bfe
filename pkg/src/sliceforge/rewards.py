"""Clipped per-slice rewards and their weighted total."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .domain import SliceKind


def _clip(x: float) -> float:
    return max(-1.0, min(0.0, x))


@dataclass(frozen=True)
class KpiWindow:
    t_avg: float = 0.0  # ms
    b_avg: float = 0.0  # bits/s
    b_target: float = 0.0  # bits/s
    b_received: float = 0.0  # bytes
    b_expected: float = 0.0  # bytes


@dataclass(frozen=True)
class RewardBreakdown:
    r_urllc: float
    r_embb: float
    r_mmtc: float
    total: float


def urllc_reward(t_avg: float, t_target: float) -> float:
    if t_target <= 0:
        raise ValueError("t_target must be positive")
    return _clip((t_target - t_avg) / t_target)


def embb_reward(b_avg: float, b_target: float) -> float:
    if b_target <= 0:
        raise ValueError("b_target must be positive")
    return _clip((b_avg - b_target) / b_target)


def mmtc_reward(b_received: float, b_expected: float) -> float:
    if b_expected == 0:
        return 0.0
    return _clip((b_received - b_expected) / b_expected)


def total_reward(r_urllc: float, r_embb: float, r_mmtc: float,
                 weights: Mapping[SliceKind, float]) -> RewardBreakdown:
    total = (weights[SliceKind.URLLC] * r_urllc + weights[SliceKind.EMBB] * r_embb
             + weights[SliceKind.MMTC] * r_mmtc)
    return RewardBreakdown(r_urllc, r_embb, r_mmtc, total)


def reward_from_kpis(kpi: KpiWindow, t_target: float,
                     weights: Mapping[SliceKind, float]) -> RewardBreakdown:
    """Weighted reward from one averaged KPI window.

    An eMBB target of zero means no eMBB UE was active, which scores 0.
    """
    r_e = embb_reward(kpi.b_avg, kpi.b_target) if kpi.b_target > 0 else 0.0
    return total_reward(urllc_reward(kpi.t_avg, t_target), r_e,
                        mmtc_reward(kpi.b_received, kpi.b_expected), weights)
