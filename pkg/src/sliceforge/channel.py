"""Per-UE link budget: free-space loss, a fixed single-tap gain, thermal
noise and a Doppler penalty folded into an SNR and a per-PRB rate."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, TextIO

from .domain import RngStream, ScenarioConfig, UeProfile

SPEED_OF_LIGHT = 2.998e8  # m/s
BOLTZMANN = 1.380649e-23  # J/K
FADING_TAP = complex(0.85, 0.25)


@dataclass(frozen=True)
class ChannelState:
    ue_id: int
    distance: float
    pathloss: float
    fading_gain: complex
    fading_gain_db: float
    doppler: float
    snr: float
    per_prb_rate: float

    @property
    def link_loss(self) -> float:
        """Path loss with the fading tap folded in (dB)."""
        return self.pathloss - self.fading_gain_db


def fspl_db(distance: float, freq: float) -> float:
    if not (distance > 0 and freq > 0):
        raise ValueError(f"fspl needs positive distance and frequency, got {distance}, {freq}")
    return 20.0 * math.log10(4.0 * math.pi * distance * freq / SPEED_OF_LIGHT)


def fading_power_gain_db(gain: complex) -> float:
    power = gain.real ** 2 + gain.imag ** 2
    if power <= 0:
        raise ValueError("fading gain must be nonzero")
    return 10.0 * math.log10(power)


def doppler_shift_hz(speed: float, freq: float) -> float:
    return (speed / 3.6) * freq / SPEED_OF_LIGHT


def noise_power_dbm(bandwidth: float, temperature: float) -> float:
    if not (bandwidth > 0 and temperature > 0):
        raise ValueError("noise power needs positive bandwidth and temperature")
    return 10.0 * math.log10(BOLTZMANN * temperature * bandwidth / 1e-3)


def doppler_penalty_db(doppler: float, cfg: ScenarioConfig) -> float:
    return min(cfg.doppler_penalty_cap_db, doppler / cfg.doppler_hz_per_db)


def snr_db(cfg: ScenarioConfig, pathloss: float, fading_db: float, doppler: float) -> float:
    noise = noise_power_dbm(cfg.total_bandwidth, cfg.noise_temperature)
    return cfg.tx_power - pathloss + fading_db - noise - doppler_penalty_db(doppler, cfg)


def per_prb_rate_bps(snr: float, cfg: ScenarioConfig) -> float:
    if snr == -math.inf:
        return 0.0
    # log2(1 + 10^(x/10)) without overflow at large x
    x = snr * math.log(10.0) / 10.0
    se = (x + math.log1p(math.exp(-x))) / math.log(2.0) if x > 0 else math.log1p(math.exp(x)) / math.log(2.0)
    return cfg.prb_bandwidth * cfg.link_efficiency * min(se, cfg.se_cap)


def max_per_prb_rate(cfg: ScenarioConfig) -> float:
    return cfg.prb_bandwidth * cfg.link_efficiency * cfg.se_cap


def channel_at(ue: UeProfile, distance: float, cfg: ScenarioConfig) -> ChannelState:
    pl = fspl_db(distance, cfg.carrier_freq)
    fade_db = fading_power_gain_db(FADING_TAP)
    fd = doppler_shift_hz(ue.speed, cfg.carrier_freq)
    snr = snr_db(cfg, pl, fade_db, fd)
    return ChannelState(
        ue_id=ue.ue_id,
        distance=distance,
        pathloss=pl,
        fading_gain=FADING_TAP,
        fading_gain_db=fade_db,
        doppler=fd,
        snr=snr,
        per_prb_rate=per_prb_rate_bps(snr, cfg),
    )


def initial_channel(ue: UeProfile, cfg: ScenarioConfig) -> ChannelState:
    return channel_at(ue, ue.initial_distance, cfg)


def reflect(x: float, lo: float, hi: float) -> float:
    """Fold ``x`` back into ``[lo, hi]`` by mirror reflection at the walls."""
    span = hi - lo
    if span <= 0:
        return lo
    y = (x - lo) % (2 * span)
    return lo + (y if y <= span else 2 * span - y)


def update_channel(ue: UeProfile, prev: ChannelState, epoch_index: int, rng: RngStream,
                   cfg: ScenarioConfig) -> ChannelState:
    """Advance one epoch of mobility and recompute the link budget.

    Mobile UEs take a step of ``speed * epoch`` metres in a random direction
    along a line, mirrored at the distance bounds. ``epoch_index`` is not
    used by the walk itself; the caller's substream carries the sequencing.
    """
    if ue.speed <= 0:
        return prev if prev.ue_id == ue.ue_id else replace(prev, ue_id=ue.ue_id)
    step = ue.speed / 3.6 * (cfg.epoch / 1000.0)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    distance = reflect(prev.distance + sign * step, cfg.min_distance, cfg.max_distance)
    return channel_at(ue, distance, cfg)


TRACE_COLUMNS = ("epoch", "ue_id", "distance_m", "pathloss_db", "snr_db", "per_prb_rate_bps")


def write_channel_trace(rows: Iterable[tuple[int, ChannelState]], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for epoch, ch in rows:
        w.writerow([epoch, ch.ue_id, repr(ch.distance), repr(ch.pathloss), repr(ch.snr),
                    repr(ch.per_prb_rate)])
