"""Scenario description, validation and seeded random substreams.

Every other module takes its constants from a :class:`ScenarioConfig` and its
randomness from :func:`rng_substream`, so a run is fully determined by the
config document plus its seed.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

RngStream = np.random.Generator


class SliceKind(enum.IntEnum):
    URLLC = 0
    EMBB = 1
    MMTC = 2

    @property
    def key(self) -> str:
        return self.name.lower()

    @classmethod
    def from_key(cls, key: str) -> "SliceKind":
        return cls[key.upper()]


SLICES = (SliceKind.URLLC, SliceKind.EMBB, SliceKind.MMTC)


@dataclass(frozen=True)
class TrafficGenSpec:
    """Downlink traffic recipe for one UE.

    Packetized kinds (URLLC, mMTC) use ``gen_freq`` and the byte range;
    eMBB uses the bitrate range and ignores the others.
    """

    kind: SliceKind
    gen_freq: float = 0.0
    bytes_min: int = 0
    bytes_max: int = 0
    bitrate_min: float = 0.0
    bitrate_max: float = 0.0
    jitter: bool = False

    @property
    def packetized(self) -> bool:
        return self.kind != SliceKind.EMBB


URLLC_TRAFFIC = TrafficGenSpec(SliceKind.URLLC, gen_freq=2.0, bytes_min=100_000, bytes_max=300_000)
EMBB_TRAFFIC = TrafficGenSpec(SliceKind.EMBB, bitrate_min=2e5, bitrate_max=4e5)
MMTC_TRAFFIC = TrafficGenSpec(SliceKind.MMTC, gen_freq=4.0, bytes_min=25_000, bytes_max=60_000)


@dataclass(frozen=True)
class UeProfile:
    ue_id: int
    slice: SliceKind
    speed: float  # km/h
    initial_distance: float  # m
    traffic: TrafficGenSpec


@dataclass(frozen=True)
class ScenarioConfig:
    ues: tuple[UeProfile, ...]
    total_prbs: int = 52
    carrier_freq: float = 3.5e9
    prb_bandwidth: float = 180e3
    tx_power: float = 30.0
    noise_temperature: float = 290.0
    link_efficiency: float = 0.75
    se_cap: float = 7.4
    cell_cap: float = 28e6
    subframe: int = 1
    kpi_period: int = 500
    epoch: int = 2000
    group_size: int = 3
    reward_weights: Mapping[SliceKind, float] = field(
        default_factory=lambda: {s: 1.0 for s in SLICES}
    )
    urllc_t_target: float = 500.0
    seed: int = 0
    # knobs below are modelling choices, exposed so they can be varied
    doppler_penalty_cap_db: float = 3.0
    doppler_hz_per_db: float = 100.0
    episode_epochs: int = 64
    pf_time_constant: float = 20.0
    min_distance: float = 500.0
    max_distance: float = 2000.0

    @property
    def group_count(self) -> int:
        return len(self.ues) // self.group_size if self.group_size > 0 else 0

    @property
    def total_bandwidth(self) -> float:
        return self.total_prbs * self.prb_bandwidth

    @property
    def samples_per_epoch(self) -> int:
        return self.epoch // self.kpi_period

    def ue(self, ue_id: int) -> UeProfile:
        for ue in self.ues:
            if ue.ue_id == ue_id:
                return ue
        raise KeyError(ue_id)

    def weight(self, kind: SliceKind) -> float:
        return float(self.reward_weights[kind])

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def rng_substream(seed: int, label: str, index: int = 0) -> RngStream:
    """Independent generator keyed by ``(seed, label, index)``.

    Substreams never share state, so consuming one (say, exploration noise)
    leaves every other stream's draws untouched.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=(_label_key(label), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def default_roster(seed: int, min_distance: float = 500.0,
                   max_distance: float = 2000.0) -> tuple[UeProfile, ...]:
    """Twelve UEs, four per slice, ids assigned slice-major.

    Slice member ``i`` of each slice lands in rotation group ``i``; the two
    stationary eMBB UEs are members 2 and 3.
    """
    rng = rng_substream(seed, "distance", 0)
    distances = rng.uniform(min_distance, max_distance, size=12)
    ues = []
    for k in range(12):
        kind = SLICES[k // 4]
        member = k % 4
        if kind == SliceKind.URLLC:
            speed, traffic = 40.0, URLLC_TRAFFIC
        elif kind == SliceKind.EMBB:
            speed, traffic = (40.0 if member < 2 else 0.0), EMBB_TRAFFIC
        else:
            speed, traffic = 0.0, MMTC_TRAFFIC
        ues.append(UeProfile(k, kind, speed, float(distances[k]), traffic))
    return tuple(ues)


def default_scenario(seed: int = 0) -> ScenarioConfig:
    return ScenarioConfig(ues=default_roster(seed), seed=seed)


def validate_scenario(cfg: ScenarioConfig) -> ValidationReport:
    """Collect every violated invariant; bad input never raises."""
    v: list[str] = []

    def check(cond: Any, msg: str) -> None:
        try:
            ok = bool(cond() if callable(cond) else cond)
        except Exception as exc:  # malformed fields are reported, not raised
            ok = False
            msg = f"{msg} ({exc})"
        if not ok:
            v.append(msg)

    check(lambda: cfg.subframe > 0, "subframe must be positive")
    check(lambda: cfg.kpi_period > 0, "kpi_period must be positive")
    check(lambda: cfg.epoch > 0, "epoch must be positive")
    check(lambda: cfg.kpi_period <= 0 or cfg.epoch % cfg.kpi_period == 0,
          "epoch not multiple of kpi_period")
    check(lambda: cfg.subframe <= 0 or cfg.kpi_period % cfg.subframe == 0,
          "kpi_period not multiple of subframe")
    n = len(cfg.ues)
    check(lambda: cfg.group_size > 0 and n % cfg.group_size == 0 and n > 0,
          "group_size does not partition roster")
    check(lambda: cfg.total_prbs >= cfg.group_size, "total_prbs smaller than active set")
    check(lambda: all(float(cfg.reward_weights[s]) >= 0 for s in SLICES),
          "reward weights must be nonnegative")
    check(lambda: 0 < cfg.link_efficiency <= 1, "link_efficiency must lie in (0, 1]")
    for name in ("carrier_freq", "prb_bandwidth", "noise_temperature", "se_cap",
                 "cell_cap", "urllc_t_target", "episode_epochs", "pf_time_constant"):
        check(lambda name=name: getattr(cfg, name) > 0, f"{name} must be positive")
    check(lambda: 0 < cfg.min_distance < cfg.max_distance, "distance bounds out of order")

    ids = [ue.ue_id for ue in cfg.ues]
    check(len(set(ids)) == len(ids), "ue_id not unique in roster")
    for ue in cfg.ues:
        check(lambda ue=ue: cfg.min_distance <= ue.initial_distance <= cfg.max_distance,
              f"ue {ue.ue_id}: initial_distance outside [{cfg.min_distance}, {cfg.max_distance}] m")
        check(lambda ue=ue: ue.speed >= 0, f"ue {ue.ue_id}: negative speed")
        t = ue.traffic
        check(lambda t=t, ue=ue: t.kind == ue.slice, f"ue {ue.ue_id}: traffic kind differs from slice")
        if t.packetized:
            check(lambda t=t: t.gen_freq > 0, f"ue {ue.ue_id}: gen_freq must be positive")
            check(lambda t=t: 0 <= t.bytes_min <= t.bytes_max, f"ue {ue.ue_id}: bytes_min > bytes_max")
        else:
            check(lambda t=t: 0 < t.bitrate_min <= t.bitrate_max,
                  f"ue {ue.ue_id}: bitrate range invalid")

    # each rotation group must hold one UE of every slice
    if not v:
        from .scheduler import slice_members  # local: scheduler imports domain

        members = slice_members(cfg)
        counts = {len(m) for m in members.values()}
        check(cfg.group_size == len(SLICES) and len(counts) == 1,
              "rotation groups need one UE per slice (equal slice populations, group_size 3)")
    return ValidationReport(tuple(v))


# --- scenario documents --------------------------------------------------

_TRAFFIC_FIELDS = {f.name for f in dataclasses.fields(TrafficGenSpec)}
_UE_FIELDS = {f.name for f in dataclasses.fields(UeProfile)}
_CFG_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)}


class ScenarioFormatError(ValueError):
    pass


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if f.name == "ues":
            val = [
                {
                    "ue_id": ue.ue_id,
                    "slice": ue.slice.key,
                    "speed": ue.speed,
                    "initial_distance": ue.initial_distance,
                    "traffic": {
                        **{k: getattr(ue.traffic, k) for k in sorted(_TRAFFIC_FIELDS) if k != "kind"},
                        "kind": ue.traffic.kind.key,
                    },
                }
                for ue in val
            ]
        elif f.name == "reward_weights":
            val = {s.key: float(val[s]) for s in SLICES}
        out[f.name] = val
    return out


def _reject_unknown(doc: Mapping[str, Any], allowed: set[str], where: str) -> None:
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ScenarioFormatError(f"unknown keys in {where}: {', '.join(extra)}")


def scenario_from_dict(doc: Mapping[str, Any]) -> ScenarioConfig:
    if not isinstance(doc, Mapping):
        raise ScenarioFormatError("scenario document must be an object")
    _reject_unknown(doc, _CFG_FIELDS, "scenario")
    if "ues" not in doc:
        raise ScenarioFormatError("scenario needs a 'ues' list")
    ues = []
    for i, u in enumerate(doc["ues"]):
        _reject_unknown(u, _UE_FIELDS, f"ues[{i}]")
        t = dict(u["traffic"])
        _reject_unknown(t, _TRAFFIC_FIELDS, f"ues[{i}].traffic")
        t["kind"] = SliceKind.from_key(t["kind"])
        ues.append(UeProfile(
            ue_id=int(u["ue_id"]),
            slice=SliceKind.from_key(u["slice"]),
            speed=float(u["speed"]),
            initial_distance=float(u["initial_distance"]),
            traffic=TrafficGenSpec(**t),
        ))
    kwargs = {k: v for k, v in doc.items() if k != "ues"}
    if "reward_weights" in kwargs:
        w = kwargs["reward_weights"]
        _reject_unknown(w, {s.key for s in SLICES}, "reward_weights")
        kwargs["reward_weights"] = {s: float(w.get(s.key, 1.0)) for s in SLICES}
    return ScenarioConfig(ues=tuple(ues), **kwargs)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=2) + "\n")


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
    return scenario_from_dict(doc)
