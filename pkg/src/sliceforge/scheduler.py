"""Slice-level PRB decisions to per-UE grants and per-subframe byte budgets.

Also owns the rotation of the three-UE active set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .channel import ChannelState
from .domain import SLICES, ScenarioConfig, SliceKind, UeProfile
from .traffic import DownlinkBuffer, serve


class AllocationError(ValueError):
    """An allocation broke the subframe limit or targeted an inactive UE."""


@dataclass(frozen=True)
class ActiveSet:
    epoch_index: int
    ue_ids: tuple[int, ...]


@dataclass
class PrbAllocation:
    per_slice: dict[SliceKind, int]
    per_ue: dict[int, int]
    total_prbs: int

    @property
    def used(self) -> int:
        return sum(self.per_ue.values())

    def triple(self) -> tuple[int, int, int]:
        return tuple(int(self.per_slice.get(s, 0)) for s in SLICES)  # type: ignore[return-value]

    def check(self, active: Sequence[int] | None = None) -> None:
        if any(v < 0 for v in self.per_slice.values()) or any(v < 0 for v in self.per_ue.values()):
            raise AllocationError(f"negative PRB count in {self}")
        if sum(self.per_slice.values()) > self.total_prbs:
            raise AllocationError(f"slice PRBs {self.triple()} exceed subframe limit {self.total_prbs}")
        if self.used != sum(self.per_slice.values()):
            raise AllocationError(f"per-UE sum {self.used} differs from slice sum {sum(self.per_slice.values())}")
        if active is not None:
            stray = set(self.per_ue) - set(active)
            if stray:
                raise AllocationError(f"PRBs granted to inactive UEs {sorted(stray)}")


def slice_members(cfg: ScenarioConfig) -> dict[SliceKind, list[UeProfile]]:
    members: dict[SliceKind, list[UeProfile]] = {s: [] for s in SLICES}
    for ue in sorted(cfg.ues, key=lambda u: u.ue_id):
        members[ue.slice].append(ue)
    return members


def rotate_active_set(cfg: ScenarioConfig, epoch_index: int) -> ActiveSet:
    """Group ``g = epoch mod group_count`` holds the ``g``-th UE of each slice."""
    members = slice_members(cfg)
    g = epoch_index % cfg.group_count
    return ActiveSet(epoch_index, tuple(members[s][g].ue_id for s in SLICES))


FRACTION_DENOMINATOR = 10**9


def largest_remainder(weights: Sequence[float | Fraction], total: int) -> list[int]:
    """Apportion ``total`` units in proportion to ``weights``.

    Floors every exact share, then hands the leftover units to the largest
    fractional parts; equal parts go to the lower index. Arithmetic is exact,
    so ties are real ties rather than float artefacts.
    """
    w = [Fraction(x) for x in weights]
    if any(x < 0 for x in w):
        raise ValueError("weights must be nonnegative")
    s = sum(w)
    if s <= 0:
        raise ValueError("weights must not all be zero")
    shares = [x * total / s for x in w]
    floors = [math.floor(q) for q in shares]
    left = total - sum(floors)
    order = sorted(range(len(w)), key=lambda i: (-(shares[i] - floors[i]), i))
    for i in order[:left]:
        floors[i] += 1
    return floors


def fractions_to_slice_prbs(fractions: Sequence[float], total_prbs: int) -> dict[SliceKind, int]:
    if len(fractions) != len(SLICES):
        raise ValueError("need one fraction per slice")
    for f in fractions:
        if not math.isfinite(f) or f < 0:
            raise ValueError(f"invalid slice fraction {f}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions sum to {sum(fractions)}, not 1")
    # floats such as 1/6 carry rounding error that would break exact ties;
    # the nearest rational with a modest denominator restores them
    exact = [Fraction(f).limit_denominator(FRACTION_DENOMINATOR) for f in fractions]
    counts = largest_remainder(exact, total_prbs)
    return dict(zip(SLICES, counts))


def slice_to_ue_prbs(slice_prbs: int, slice_ues: Sequence[tuple[int, float]]) -> dict[int, int]:
    """Even split inside a slice; leftovers go to the worst links first.

    ``slice_ues`` holds ``(ue_id, link_loss_db)`` pairs.
    """
    if not slice_ues:
        if slice_prbs > 0:
            raise AllocationError("PRBs granted to a slice with no active UE")
        return {}
    n = len(slice_ues)
    base, rem = divmod(int(slice_prbs), n)
    out = {uid: base for uid, _ in slice_ues}
    for uid, _ in sorted(slice_ues, key=lambda p: (-p[1], p[0]))[:rem]:
        out[uid] += 1
    return out


def allocation_from_slices(per_slice: Mapping[SliceKind, int], active: Sequence[UeProfile],
                           channels: Mapping[int, ChannelState], total_prbs: int) -> PrbAllocation:
    per_ue: dict[int, int] = {}
    for s in SLICES:
        ues = [(u.ue_id, channels[u.ue_id].link_loss) for u in active if u.slice == s]
        per_ue.update(slice_to_ue_prbs(int(per_slice.get(s, 0)), ues))
    alloc = PrbAllocation({s: int(per_slice.get(s, 0)) for s in SLICES}, per_ue, total_prbs)
    alloc.check([u.ue_id for u in active])
    return alloc


def allocation_from_ues(per_ue: Mapping[int, int], active: Sequence[UeProfile],
                        total_prbs: int) -> PrbAllocation:
    per_slice = {s: 0 for s in SLICES}
    for u in active:
        per_slice[u.slice] += int(per_ue.get(u.ue_id, 0))
    alloc = PrbAllocation(per_slice, {u.ue_id: int(per_ue.get(u.ue_id, 0)) for u in active}, total_prbs)
    alloc.check([u.ue_id for u in active])
    return alloc


@dataclass(frozen=True)
class ServicePlan:
    rates: dict[int, float]  # bits/s after the cell cap
    budgets: dict[int, int]  # bytes per subframe
    scale: float = 1.0


def plan_service(alloc: PrbAllocation, channels: Mapping[int, ChannelState],
                 cfg: ScenarioConfig) -> ServicePlan:
    """Per-UE rates under the shared cell cap and the resulting byte budgets."""
    cand = {uid: n * channels[uid].per_prb_rate for uid, n in alloc.per_ue.items()}
    total = sum(cand.values())
    scale = cfg.cell_cap / total if total > cfg.cell_cap else 1.0
    rates = {uid: r * scale for uid, r in cand.items()}
    budgets = {uid: math.floor(r * cfg.subframe / 8000.0) for uid, r in rates.items()}
    return ServicePlan(rates, budgets, scale)


def serve_subframe(alloc: PrbAllocation, channels: Mapping[int, ChannelState],
                   buffers: Mapping[int, DownlinkBuffer], cfg: ScenarioConfig,
                   now: int) -> dict[int, int]:
    plan = plan_service(alloc, channels, cfg)
    return {uid: serve(buffers[uid], plan.budgets[uid], now).bytes for uid in alloc.per_ue}
