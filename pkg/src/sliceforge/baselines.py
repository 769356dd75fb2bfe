"""Non-learning allocators: equal, proportional, pre-allocated proportional
and proportional fair. All work per UE over the active set."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .domain import SliceKind, UeProfile
from .scheduler import largest_remainder

PF_RATE_FLOOR = 1.0  # bits/s


@dataclass(frozen=True)
class DemandEstimate:
    ue_id: int
    demand: float  # bits/s


def equal_allocation(ue_ids: Sequence[int], total_prbs: int) -> dict[int, int]:
    """Integer division; the remainder stays idle."""
    if not ue_ids:
        raise ValueError("need at least one active UE")
    share = total_prbs // len(ue_ids)
    return {uid: share for uid in ue_ids}


def demand_of(ue: UeProfile, requested_bitrate: float | None = None) -> DemandEstimate:
    """Offered load in bits/s: frequency times mean packet size for periodic
    traffic, the requested bitrate for eMBB."""
    t = ue.traffic
    if ue.slice == SliceKind.EMBB:
        if requested_bitrate is None:
            raise ValueError("eMBB demand needs the requested bitrate")
        return DemandEstimate(ue.ue_id, float(requested_bitrate))
    mean_bytes = (t.bytes_min + t.bytes_max) / 2.0
    return DemandEstimate(ue.ue_id, t.gen_freq * mean_bytes * 8.0)


def proportional_allocation(demands: Sequence[DemandEstimate], total_prbs: int) -> dict[int, int]:
    ids = [d.ue_id for d in demands]
    if sum(d.demand for d in demands) <= 0:
        return equal_allocation(ids, total_prbs)
    counts = largest_remainder([d.demand for d in demands], total_prbs)
    return dict(zip(ids, counts))


def preallocated_proportional(demands: Sequence[DemandEstimate], total_prbs: int) -> dict[int, int]:
    n = len(demands)
    if total_prbs < n:
        raise ValueError(f"{total_prbs} PRBs cannot guarantee one each to {n} UEs")
    rest = proportional_allocation(demands, total_prbs - n)
    return {uid: c + 1 for uid, c in rest.items()}


@dataclass
class PfState:
    """Exponentially averaged delivered rate per UE."""

    time_constant: float = 20.0
    avg_rate: dict[int, float] = field(default_factory=dict)

    def warm_start(self, rates: Mapping[int, float]) -> None:
        for uid, r in rates.items():
            if uid not in self.avg_rate:
                self.avg_rate[uid] = max(float(r), PF_RATE_FLOOR)

    def update(self, achieved: Mapping[int, float]) -> None:
        a = 1.0 / self.time_constant
        for uid, r in achieved.items():
            prev = self.avg_rate.get(uid, max(r, PF_RATE_FLOOR))
            self.avg_rate[uid] = max((1 - a) * prev + a * float(r), PF_RATE_FLOOR)


def pf_allocation(rates: Mapping[int, float], pf: PfState, total_prbs: int) -> dict[int, int]:
    """Apportion PRBs by the PF metric ``r_k / avg_k``.

    ``rates`` are per-PRB achievable rates; UEs seen for the first time are
    warm-started with their own rate. The caller feeds delivered rates back
    through :meth:`PfState.update` once the epoch has run.
    """
    pf.warm_start(rates)
    ids = list(rates)
    metric = [rates[uid] / pf.avg_rate[uid] for uid in ids]
    if sum(metric) <= 0:
        return equal_allocation(ids, total_prbs)
    return dict(zip(ids, largest_remainder(metric, total_prbs)))
