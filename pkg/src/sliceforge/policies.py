"""Baseline allocators wrapped in the policy interface used by the loop."""

from __future__ import annotations

from .agents.state import Observation
from .baselines import (PfState, demand_of, equal_allocation, pf_allocation, preallocated_proportional,
                        proportional_allocation)
from .scheduler import PrbAllocation, allocation_from_ues

BASELINES = ("equal", "prop", "prealloc", "pf")


class _Baseline:
    learning = False
    name = "baseline"

    def feedback(self, obs, reward, done, next_obs) -> None:  # pragma: no cover - never called
        pass

    def _demands(self, obs: Observation):
        return [demand_of(u, obs.requested.get(u.ue_id)) for u in obs.active]


class EqualPolicy(_Baseline):
    name = "equal"

    def allocate(self, obs: Observation) -> PrbAllocation:
        return allocation_from_ues(equal_allocation(obs.active_ids, obs.cfg.total_prbs), obs.active,
                                   obs.cfg.total_prbs)


class ProportionalPolicy(_Baseline):
    name = "prop"

    def allocate(self, obs: Observation) -> PrbAllocation:
        return allocation_from_ues(proportional_allocation(self._demands(obs), obs.cfg.total_prbs),
                                   obs.active, obs.cfg.total_prbs)


class PreallocatedPolicy(_Baseline):
    name = "prealloc"

    def allocate(self, obs: Observation) -> PrbAllocation:
        return allocation_from_ues(preallocated_proportional(self._demands(obs), obs.cfg.total_prbs),
                                   obs.active, obs.cfg.total_prbs)


class PfPolicy(_Baseline):
    """PF apportionment; the delivered rate of each epoch feeds the average.

    Delivered rate is learned from the environment's report, so the loop
    hands reports back through :meth:`observe_report`.
    """

    name = "pf"

    def __init__(self, time_constant: float = 20.0):
        self.state = PfState(time_constant)

    def allocate(self, obs: Observation) -> PrbAllocation:
        rates = {u.ue_id: obs.channels[u.ue_id].per_prb_rate for u in obs.active}
        return allocation_from_ues(pf_allocation(rates, self.state, obs.cfg.total_prbs), obs.active,
                                   obs.cfg.total_prbs)

    def observe_report(self, report, epoch_ms: int) -> None:
        secs = epoch_ms / 1000.0
        self.state.update({uid: t.served * 8.0 / secs for uid, t in report.totals.items()})


def make_baseline(name: str, time_constant: float = 20.0):
    if name == "equal":
        return EqualPolicy()
    if name == "prop":
        return ProportionalPolicy()
    if name == "prealloc":
        return PreallocatedPolicy()
    if name == "pf":
        return PfPolicy(time_constant)
    raise ValueError(f"unknown baseline {name!r}; choose from {', '.join(BASELINES)}")
