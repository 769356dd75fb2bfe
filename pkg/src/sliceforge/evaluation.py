"""CDF metrics over KPI logs and the comparison report."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

URLLC_LATENCY = "urllc_latency_ms"
EMBB_DELTA = "embb_delta_bitrate_bps"
MMTC_DELTA = "mmtc_delta_payload_bytes"
URLLC_PACKET_LATENCY = "urllc_packet_latency_ms"
METRICS = (URLLC_LATENCY, EMBB_DELTA, MMTC_DELTA)


@dataclass(frozen=True)
class MetricSample:
    policy: str
    metric: str
    value: float


@dataclass
class ExtractResult:
    policy: str
    samples: list[MetricSample] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def values(self, metric: str) -> list[float]:
        return [s.value for s in self.samples if s.metric == metric]


class EmpiricalCdf:
    """Right-continuous step function ``F(x) = #{samples <= x} / n``."""

    def __init__(self, samples: Iterable[float]):
        vals = np.sort(np.asarray(list(samples), dtype=np.float64))
        if vals.size == 0:
            raise ValueError("empirical CDF of an empty sample")
        self.values = vals

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / self.n


def empirical_cdf(samples: Iterable[float]) -> EmpiricalCdf:
    return EmpiricalCdf(samples)


def nearest_rank(cdf: EmpiricalCdf, p: float) -> float:
    rank = max(1, math.ceil(p / 100.0 * cdf.n))
    return float(cdf.values[rank - 1])


def summarize(cdf: EmpiricalCdf) -> dict[str, float]:
    return {
        "p50": nearest_rank(cdf, 50),
        "p90": nearest_rank(cdf, 90),
        "p95": nearest_rank(cdf, 95),
        "mean": float(np.mean(cdf.values)),
    }


def extract_metrics(path: str | Path, policy: str | None = None,
                    per_packet: bool = True) -> ExtractResult:
    """One sample per epoch and metric from a KPI log.

    Malformed lines are recorded (with line numbers) and skipped.
    """
    path = Path(path)
    res = ExtractResult(policy or path.stem)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                if lineno == 1 and "kind" in doc:
                    if policy is None and doc.get("policy"):
                        res.policy = str(doc["policy"])
                    continue
                k = doc["kpi"]
                rows = [
                    (URLLC_LATENCY, float(k["urllc"]["t_avg_ms"])),
                    (EMBB_DELTA, float(k["embb"]["b_avg_bps"]) - float(k["embb"]["b_target_bps"])),
                    (MMTC_DELTA, float(k["mmtc"]["b_received_bytes"]) - float(k["mmtc"]["b_expected_bytes"])),
                ]
                if per_packet:
                    rows += [(URLLC_PACKET_LATENCY, float(x)) for x in k["urllc"].get("latencies_ms", ())]
                if not all(math.isfinite(v) for _, v in rows):
                    raise ValueError("non-finite metric value")
            except (ValueError, KeyError, TypeError) as exc:
                msg = f"{path}:{lineno}: malformed record ({exc})"
                log.warning(msg)
                res.errors.append(msg)
                continue
            res.samples.extend(MetricSample(res.policy, m, v) for m, v in rows)
    return res


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(per_policy: Mapping[str, Mapping[str, Sequence[float]]], out_dir: str | Path,
                per_packet: bool = True) -> list[Path]:
    """Write one ``cdf_<metric>.csv`` per metric plus ``summary.csv``.

    Policies keep their mapping order; rows within a policy ascend by value.
    """
    if not per_policy:
        raise ValueError("report needs at least one policy")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    metrics = list(METRICS)
    if per_packet and any(per_policy[p].get(URLLC_PACKET_LATENCY) for p in per_policy):
        metrics.append(URLLC_PACKET_LATENCY)

    written = []
    summary_rows = []
    for metric in metrics:
        path = out / f"cdf_{metric}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["policy", "value", "cdf"])
            for pol, by_metric in per_policy.items():
                vals = by_metric.get(metric) or []
                if not vals:
                    continue
                cdf = empirical_cdf(vals)
                for v, f in zip(cdf.values, cdf(cdf.values)):
                    w.writerow([pol, _fmt(v), _fmt(f)])
                s = summarize(cdf)
                summary_rows.append([pol, metric, _fmt(s["p50"]), _fmt(s["p90"]), _fmt(s["p95"]),
                                     _fmt(s["mean"])])
        written.append(path)
    spath = out / "summary.csv"
    with spath.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "metric", "p50", "p90", "p95", "mean"])
        w.writerows(summary_rows)
    written.append(spath)
    return written


def report_from_logs(paths: Sequence[str | Path], out_dir: str | Path,
                     per_packet: bool = True) -> tuple[list[Path], list[str]]:
    """Extract every log, de-duplicate policy names, emit the report.

    Returns the written files and all malformed-line messages.
    """
    per_policy: dict[str, dict[str, list[float]]] = {}
    errors: list[str] = []
    for i, p in enumerate(paths):
        res = extract_metrics(p, per_packet=per_packet)
        errors.extend(res.errors)
        name = res.policy
        if name in per_policy:
            new = f"{name}#{i}"
            log.warning("policy name %r from %s already used; reporting it as %r", name, p, new)
            name = new
        per_policy[name] = {m: res.values(m) for m in (*METRICS, URLLC_PACKET_LATENCY)}
    return emit_report(per_policy, out_dir, per_packet=per_packet), errors
