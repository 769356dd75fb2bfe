"""Observation handed to a policy at the start of each epoch, and the
15-dimensional state vector the learning agents consume."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..channel import ChannelState
from ..domain import SLICES, ScenarioConfig, SliceKind, UeProfile

STATE_DIM = 15
DEMAND_SCALE = 5e6  # bits or bits/s
LINK_LOSS_OFFSET = 80.0  # dB
LINK_LOSS_SPAN = 60.0  # dB


@dataclass(frozen=True)
class Observation:
    epoch_index: int
    active: tuple[UeProfile, ...]  # slice-index order
    channels: Mapping[int, ChannelState]
    requested: Mapping[int, float]  # eMBB requested bitrate, bits/s
    pending_bits: Mapping[int, float]  # queued + this epoch's scheduled bits
    state: np.ndarray
    cfg: ScenarioConfig

    @property
    def active_ids(self) -> tuple[int, ...]:
        return tuple(u.ue_id for u in self.active)


def ue_demand_feature(ue: UeProfile, requested: Mapping[int, float],
                      pending_bits: Mapping[int, float]) -> float:
    # eMBB reports its bitrate; packetized slices report buffered bits
    raw = requested.get(ue.ue_id, 0.0) if ue.slice == SliceKind.EMBB else pending_bits.get(ue.ue_id, 0.0)
    return float(np.clip(raw / DEMAND_SCALE, 0.0, 2.0))


def link_loss_feature(link_loss_db: float) -> float:
    return float(np.clip((link_loss_db - LINK_LOSS_OFFSET) / LINK_LOSS_SPAN, 0.0, 2.0))


def build_state(active: Sequence[UeProfile], channels: Mapping[int, ChannelState],
                requested: Mapping[int, float], pending_bits: Mapping[int, float]) -> np.ndarray:
    """Per active UE, in slice order: one-hot slice, demand, link loss."""
    ordered = sorted(active, key=lambda u: (int(u.slice), u.ue_id))
    rows = []
    for ue in ordered:
        onehot = [1.0 if ue.slice == s else 0.0 for s in SLICES]
        rows.extend(onehot)
        rows.append(ue_demand_feature(ue, requested, pending_bits))
        rows.append(link_loss_feature(channels[ue.ue_id].link_loss))
    state = np.zeros(STATE_DIM)
    state[:len(rows)] = rows[:STATE_DIM]
    return state
