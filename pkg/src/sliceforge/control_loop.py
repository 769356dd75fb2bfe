"""The closed control loop: apply an allocation, run an epoch of subframes,
sample KPIs every KPI period, average them, score them, log them.

Each epoch is its own traffic run for the active group: the group's tasks are
drawn when the epoch opens, buffers start empty, and whatever is still queued
when the epoch closes is reported as leftover and dropped.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, Protocol, Sequence

from .agents.state import Observation, build_state
from .channel import ChannelState, initial_channel, update_channel
from .domain import SLICES, RngStream, ScenarioConfig, SliceKind, UeProfile, rng_substream
from .rewards import KpiWindow, RewardBreakdown, reward_from_kpis
from .scheduler import (PrbAllocation, plan_service, rotate_active_set, serve_subframe)
from .traffic import (DownlinkBuffer, Packet, draw_requested_bitrate, generate_arrivals, serve_span,
                      window_stats)

LOG_VERSION = 1
LOG_KIND = "sliceforge-kpi-log"
# head-of-line ages in the surrogate are capped here (ms) to keep logs finite
SURROGATE_LATENCY_CAP = 1e6


@dataclass(frozen=True)
class KpiSample:
    t: int
    ue_id: int
    slice: SliceKind
    dl_bitrate: float
    buffer_occupancy: int
    completed_latencies: tuple[int, ...]
    prbs: int
    link_loss: float
    bytes_served: int = 0
    bytes_generated: int = 0
    t_avg: float = 0.0


@dataclass(frozen=True)
class UeEpochTotals:
    generated: int
    served: int
    leftover: int
    distance: float
    link_loss: float


@dataclass
class EpochReport:
    epoch_index: int
    active_ues: tuple[int, ...]
    allocation: PrbAllocation
    kpi: KpiWindow
    reward: RewardBreakdown
    samples: list[KpiSample] = field(default_factory=list)
    totals: dict[int, UeEpochTotals] = field(default_factory=dict)
    urllc_latencies: tuple[int, ...] = ()
    wall_ms: float = field(default=0.0, compare=False)


class Policy(Protocol):
    name: str
    learning: bool

    def allocate(self, obs: Observation) -> PrbAllocation: ...

    def feedback(self, obs: Observation, reward: float, done: bool,
                 next_obs: Observation | None) -> None: ...


class SlicingEnv:
    """World state: channels for every UE, the epoch counter, per-episode
    eMBB targets, and the current epoch's pre-drawn tasks.

    With ``surrogate=True`` epochs are scored analytically from the
    allocated rates instead of being simulated subframe by subframe.
    """

    def __init__(self, cfg: ScenarioConfig, *, surrogate: bool = False, exact_subframes: bool = False,
                 seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.surrogate = surrogate
        self.exact_subframes = exact_subframes
        self.epoch_index = 0
        self.ues = {u.ue_id: u for u in cfg.ues}
        self.channels: dict[int, ChannelState] = {u.ue_id: initial_channel(u, cfg) for u in cfg.ues}
        self._chan_rng = {uid: rng_substream(self.seed, "channel", uid) for uid in self.ues}
        self._traffic_rng = {uid: rng_substream(self.seed, "traffic", uid) for uid in self.ues}
        self.requested: dict[int, float] = {}
        self._episode = -1
        self._obs: Observation | None = None
        self._tasks: dict[int, list[Packet]] = {}

    @property
    def sim_time(self) -> int:
        return self.epoch_index * self.cfg.epoch

    def done_after_current(self) -> bool:
        return (self.epoch_index + 1) % self.cfg.episode_epochs == 0

    def _start_episode_if_needed(self) -> None:
        episode = self.epoch_index // self.cfg.episode_epochs
        if episode == self._episode:
            return
        self._episode = episode
        rng = rng_substream(self.seed, "embb_rate", episode)
        self.requested = {
            u.ue_id: draw_requested_bitrate(u.traffic, rng)
            for u in sorted(self.ues.values(), key=lambda u: u.ue_id) if u.slice == SliceKind.EMBB
        }

    def observe(self) -> Observation:
        """Open the current epoch (drawing its tasks once) and describe it."""
        if self._obs is not None and self._obs.epoch_index == self.epoch_index:
            return self._obs
        self._start_episode_if_needed()
        cfg = self.cfg
        active_set = rotate_active_set(cfg, self.epoch_index)
        active = tuple(sorted((self.ues[i] for i in active_set.ue_ids), key=lambda u: (int(u.slice), u.ue_id)))
        t0, t1 = self.sim_time, self.sim_time + cfg.epoch
        self._tasks = {
            u.ue_id: generate_arrivals(u.traffic, t0, t1, self._traffic_rng[u.ue_id],
                                       kpi_period=cfg.kpi_period,
                                       requested_bitrate=self.requested.get(u.ue_id))
            for u in active
        }
        pending = {u.ue_id: 8.0 * sum(p.bytes for p in self._tasks[u.ue_id]) for u in active}
        req = {u.ue_id: self.requested[u.ue_id] for u in active if u.ue_id in self.requested}
        state = build_state(active, self.channels, req, pending)
        self._obs = Observation(self.epoch_index, active, dict(self.channels), req, pending, state, cfg)
        return self._obs

    def step(self, alloc: PrbAllocation) -> EpochReport:
        obs = self.observe()
        started = time.perf_counter()
        if self.surrogate:
            report = surrogate_epoch(self, obs, alloc)
        else:
            report = run_epoch(self, obs, alloc)
        report.wall_ms = (time.perf_counter() - started) * 1e3
        self._advance()
        return report

    def _advance(self) -> None:
        for uid in sorted(self.ues):
            self.channels[uid] = update_channel(self.ues[uid], self.channels[uid], self.epoch_index,
                                                self._chan_rng[uid], self.cfg)
        self.epoch_index += 1
        self._obs = None
        self._tasks = {}


def _slice_kpis(cfg: ScenarioConfig, active: Sequence[UeProfile], samples: Sequence[KpiSample],
                requested: dict[int, float]) -> KpiWindow:
    """Average the epoch's KPI samples into one window per slice."""
    n = cfg.samples_per_epoch
    by_t: dict[int, list[KpiSample]] = {}
    for s in samples:
        by_t.setdefault(s.t, []).append(s)
    times = sorted(by_t)
    if len(times) != n:
        raise RuntimeError(f"expected {n} KPI samples, got {len(times)}")
    urllc = [u.ue_id for u in active if u.slice == SliceKind.URLLC]
    embb = [u.ue_id for u in active if u.slice == SliceKind.EMBB]
    mmtc = [u.ue_id for u in active if u.slice == SliceKind.MMTC]
    t_avg = b_avg = b_rx = b_exp = 0.0
    for t in times:
        row = {s.ue_id: s for s in by_t[t]}
        if urllc:
            t_avg += sum(row[i].t_avg for i in urllc) / len(urllc)
        b_avg += sum(row[i].dl_bitrate for i in embb)
        b_rx += sum(row[i].bytes_served for i in mmtc)
        b_exp += sum(row[i].bytes_generated for i in mmtc)
    return KpiWindow(t_avg=t_avg / n, b_avg=b_avg / n, b_target=sum(requested[i] for i in embb),
                     b_received=b_rx / n, b_expected=b_exp / n)


def run_epoch(env: SlicingEnv, obs: Observation, alloc: PrbAllocation) -> EpochReport:
    """Simulate one epoch of 1 ms subframes under a fixed allocation.

    Service is constant between events (arrivals, KPI boundaries), so those
    stretches are drained in one exact step; ``env.exact_subframes`` ticks
    every subframe instead.
    """
    cfg = env.cfg
    active_ids = obs.active_ids
    alloc.check(active_ids)
    if sum(alloc.per_ue.values()) > cfg.total_prbs:
        raise RuntimeError("subframe limit exceeded")
    t0, t1 = env.sim_time, env.sim_time + cfg.epoch
    plan = plan_service(alloc, obs.channels, cfg)
    buffers = {uid: DownlinkBuffer() for uid in active_ids}
    tasks = {uid: list(env._tasks[uid]) for uid in active_ids}

    sf = cfg.subframe
    # arrivals are injected at the first subframe boundary at or after them
    arrivals: dict[int, list[tuple[int, Packet]]] = {}
    for uid, pkts in tasks.items():
        for p in pkts:
            at = t0 + -(-(p.enqueue_time - t0) // sf) * sf
            arrivals.setdefault(at, []).append((uid, Packet(p.bytes, p.enqueue_time)))
    sample_times = [t0 + (k + 1) * cfg.kpi_period for k in range(cfg.samples_per_epoch)]
    events = sorted(set(arrivals) | set(sample_times) | {t0})

    samples: list[KpiSample] = []
    urllc_lats: list[int] = []
    urllc_ids = {u.ue_id for u in obs.active if u.slice == SliceKind.URLLC}
    slice_of = {u.ue_id: u.slice for u in obs.active}
    for i, t in enumerate(events):
        if t in sample_times:
            for uid in active_ids:
                st = window_stats(buffers[uid], t)
                samples.append(KpiSample(
                    t=t, ue_id=uid, slice=slice_of[uid],
                    dl_bitrate=st.bytes_served * 8.0 / (cfg.kpi_period / 1000.0),
                    buffer_occupancy=st.occupancy, completed_latencies=st.latencies,
                    prbs=alloc.per_ue.get(uid, 0), link_loss=obs.channels[uid].link_loss,
                    bytes_served=st.bytes_served, bytes_generated=st.bytes_generated, t_avg=st.t_avg,
                ))
                if uid in urllc_ids:
                    urllc_lats.extend(st.latencies)
        if t >= t1:
            break
        for uid, pkt in arrivals.get(t, ()):
            buffers[uid].push(pkt)
        nxt = events[i + 1]
        n_sf = (nxt - t) // sf
        if env.exact_subframes:
            for k in range(n_sf):
                serve_subframe(alloc, obs.channels, buffers, cfg, now=t + (k + 1) * sf)
        else:
            for uid in active_ids:
                serve_span(buffers[uid], plan.budgets[uid], t, n_sf, sf)

    totals = {}
    for uid in active_ids:
        b = buffers[uid]
        totals[uid] = UeEpochTotals(b.generated_total, b.served_total, b.flush(),
                                    obs.channels[uid].distance, obs.channels[uid].link_loss)
    kpi = _slice_kpis(cfg, obs.active, samples, dict(obs.requested))
    reward = reward_from_kpis(kpi, cfg.urllc_t_target, cfg.reward_weights)
    return EpochReport(obs.epoch_index, active_ids, alloc, kpi, reward, samples, totals, tuple(urllc_lats))


def _fluid_fifo(packets: Sequence[Packet], rate_bps: float, t0: int, t1: int
                ) -> tuple[list[float], int]:
    """Fluid FIFO at a constant rate: per-packet latencies (ms) and bytes
    delivered by ``t1``."""
    bytes_per_ms = rate_bps / 8000.0
    lats: list[float] = []
    clock = float(t0)
    for p in packets:
        start = max(clock, float(p.enqueue_time))
        dur = p.bytes / bytes_per_ms if bytes_per_ms > 0 else math.inf
        clock = start + dur
        lats.append(min(clock - p.enqueue_time, SURROGATE_LATENCY_CAP))
    # bytes served by t1: work done = rate * busy time up to t1
    served = 0.0
    clock = float(t0)
    for p in packets:
        start = max(clock, float(p.enqueue_time))
        if start >= t1:
            break
        dur = p.bytes / bytes_per_ms if bytes_per_ms > 0 else math.inf
        served += min(p.bytes, (t1 - start) * bytes_per_ms)
        clock = start + dur
    return lats, int(served)


def surrogate_epoch(env: SlicingEnv, obs: Observation, alloc: PrbAllocation) -> EpochReport:
    """Score an allocation from rate-versus-demand arithmetic alone.

    Each UE is a fluid FIFO drained at its allocated (cell-capped) rate:
    URLLC latency is the mean packet sojourn, eMBB achieves
    ``min(rate, request)``, mMTC receives what the fluid queue delivers.
    """
    cfg = env.cfg
    alloc.check(obs.active_ids)
    plan = plan_service(alloc, obs.channels, cfg)
    t0, t1 = env.sim_time, env.sim_time + cfg.epoch
    n = cfg.samples_per_epoch
    urllc_t, embb_b, mmtc_rx, mmtc_exp = [], 0.0, 0.0, 0.0
    totals = {}
    for u in obs.active:
        pkts = env._tasks[u.ue_id]
        gen = sum(p.bytes for p in pkts)
        rate = plan.rates[u.ue_id]
        lats, served = _fluid_fifo(pkts, rate, t0, t1)
        if u.slice == SliceKind.URLLC:
            urllc_t.append(sum(lats) / len(lats) if lats else 0.0)
        elif u.slice == SliceKind.EMBB:
            embb_b += min(rate, gen * 8.0 / (cfg.epoch / 1000.0))
        else:
            mmtc_rx += served / n
            mmtc_exp += gen / n
        totals[u.ue_id] = UeEpochTotals(gen, served, gen - served, obs.channels[u.ue_id].distance,
                                        obs.channels[u.ue_id].link_loss)
    kpi = KpiWindow(
        t_avg=sum(urllc_t) / len(urllc_t) if urllc_t else 0.0,
        b_avg=embb_b,
        b_target=sum(obs.requested.values()),
        b_received=mmtc_rx,
        b_expected=mmtc_exp,
    )
    reward = reward_from_kpis(kpi, cfg.urllc_t_target, cfg.reward_weights)
    return EpochReport(obs.epoch_index, obs.active_ids, alloc, kpi, reward, [], totals)


def run_episode(policy: Policy, env: SlicingEnv, n_epochs: int,
                on_report=None) -> list[EpochReport]:
    """Drive ``policy`` for ``n_epochs`` epochs.

    Learning policies receive every reward through ``feedback`` and decide
    themselves when an update is due. ``on_report`` (if given) is called per
    epoch, which lets callers stream logs instead of holding reports.
    """
    reports: list[EpochReport] = []
    obs = env.observe()
    for k in range(n_epochs):
        alloc = policy.allocate(obs)
        done = env.done_after_current() or k == n_epochs - 1
        report = env.step(alloc)
        next_obs = env.observe()
        if policy.learning:
            policy.feedback(obs, report.reward.total, done, next_obs)
        hook = getattr(policy, "observe_report", None)
        if hook is not None:
            hook(report, env.cfg.epoch)
        if on_report is not None:
            on_report(report)
        else:
            reports.append(report)
        obs = next_obs
    return reports


# --- KPI log -------------------------------------------------------------

def report_to_dict(r: EpochReport) -> dict[str, Any]:
    a = r.allocation
    by_ue: dict[int, list[KpiSample]] = {}
    for s in r.samples:
        by_ue.setdefault(s.ue_id, []).append(s)
    ues = {}
    for uid in r.active_ues:
        tot = r.totals.get(uid)
        ss = sorted(by_ue.get(uid, []), key=lambda s: s.t)
        ues[str(uid)] = {
            "slice": ss[0].slice.key if ss else None,
            "generated_bytes": tot.generated if tot else 0,
            "served_bytes": tot.served if tot else 0,
            "leftover_bytes": tot.leftover if tot else 0,
            "distance_m": tot.distance if tot else None,
            "link_loss_db": tot.link_loss if tot else None,
            "samples": [
                {"t": s.t, "dl_bitrate_bps": s.dl_bitrate, "occupancy_bytes": s.buffer_occupancy,
                 "served_bytes": s.bytes_served, "generated_bytes": s.bytes_generated,
                 "t_avg_ms": s.t_avg, "latencies_ms": list(s.completed_latencies)}
                for s in ss
            ],
        }
    return {
        "v": LOG_VERSION,
        "epoch": r.epoch_index,
        "active_ues": list(r.active_ues),
        "alloc": {
            **{s.key: int(a.per_slice.get(s, 0)) for s in SLICES},
            "per_ue": {str(k): int(v) for k, v in a.per_ue.items()},
            "total_prbs": a.total_prbs,
        },
        "kpi": {
            "urllc": {"t_avg_ms": r.kpi.t_avg, "latencies_ms": list(r.urllc_latencies)},
            "embb": {"b_avg_bps": r.kpi.b_avg, "b_target_bps": r.kpi.b_target},
            "mmtc": {"b_received_bytes": r.kpi.b_received, "b_expected_bytes": r.kpi.b_expected},
        },
        "reward": {"urllc": r.reward.r_urllc, "embb": r.reward.r_embb, "mmtc": r.reward.r_mmtc,
                   "total": r.reward.total},
        "ues": ues,
    }


def report_from_dict(doc: dict[str, Any]) -> EpochReport:
    if doc.get("v") != LOG_VERSION:
        raise ValueError(f"unsupported KPI record version {doc.get('v')!r}")
    al = doc["alloc"]
    alloc = PrbAllocation({s: int(al[s.key]) for s in SLICES},
                          {int(k): int(v) for k, v in al["per_ue"].items()}, int(al["total_prbs"]))
    k = doc["kpi"]
    kpi = KpiWindow(t_avg=k["urllc"]["t_avg_ms"], b_avg=k["embb"]["b_avg_bps"],
                    b_target=k["embb"]["b_target_bps"], b_received=k["mmtc"]["b_received_bytes"],
                    b_expected=k["mmtc"]["b_expected_bytes"])
    rw = doc["reward"]
    reward = RewardBreakdown(rw["urllc"], rw["embb"], rw["mmtc"], rw["total"])
    samples, totals = [], {}
    for key, u in doc.get("ues", {}).items():
        uid = int(key)
        totals[uid] = UeEpochTotals(u["generated_bytes"], u["served_bytes"], u["leftover_bytes"],
                                    u["distance_m"], u["link_loss_db"])
        for s in u["samples"]:
            samples.append(KpiSample(
                t=s["t"], ue_id=uid, slice=SliceKind.from_key(u["slice"]), dl_bitrate=s["dl_bitrate_bps"],
                buffer_occupancy=s["occupancy_bytes"], completed_latencies=tuple(s["latencies_ms"]),
                prbs=alloc.per_ue.get(uid, 0), link_loss=u["link_loss_db"],
                bytes_served=s["served_bytes"], bytes_generated=s["generated_bytes"], t_avg=s["t_avg_ms"],
            ))
    # restore the in-memory ordering: sample time, then active-set order
    order = {uid: i for i, uid in enumerate(doc["active_ues"])}
    samples.sort(key=lambda s: (s.t, order[s.ue_id]))
    return EpochReport(int(doc["epoch"]), tuple(doc["active_ues"]), alloc, kpi, reward, samples, totals,
                       tuple(k["urllc"].get("latencies_ms", ())))


def log_header(policy: str, cfg: ScenarioConfig, **extra: Any) -> dict[str, Any]:
    return {"v": LOG_VERSION, "kind": LOG_KIND, "policy": policy, "seed": cfg.seed,
            "epoch_ms": cfg.epoch, "kpi_period_ms": cfg.kpi_period, **extra}


def _dumps(doc: dict[str, Any]) -> str:
    return json.dumps(doc, separators=(",", ":"), allow_nan=False)


class KpiLogWriter:
    """Append-only newline-delimited JSON writer; header line first."""

    def __init__(self, path: str | Path, header: dict[str, Any]):
        self.path = Path(path)
        try:
            self._fh: IO[str] = self.path.open("w", encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot open KPI log {self.path}: {exc}") from exc
        self._write(header)

    def _write(self, doc: dict[str, Any]) -> None:
        try:
            self._fh.write(_dumps(doc) + "\n")
        except OSError as exc:
            raise OSError(f"writing KPI log {self.path}: {exc}") from exc

    def append(self, report: EpochReport) -> None:
        self._write(report_to_dict(report))

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "KpiLogWriter":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def write_kpi_log(reports: Iterable[EpochReport], path: str | Path,
                  header: dict[str, Any] | None = None) -> Path:
    with KpiLogWriter(path, header or {"v": LOG_VERSION, "kind": LOG_KIND}) as w:
        for r in reports:
            w.append(r)
    return Path(path)


def iter_kpi_log(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield ``(line_number, record)`` pairs; line 1 is the header."""
    with Path(path).open(encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if line.strip():
                yield i, json.loads(line)


def read_kpi_log(path: str | Path) -> tuple[dict[str, Any], list[EpochReport]]:
    header: dict[str, Any] = {}
    reports = []
    for i, doc in iter_kpi_log(path):
        if i == 1:
            header = doc
        else:
            reports.append(report_from_dict(doc))
    return header, reports
