"""Produce KPI logs for several policies and turn them into CDF tables.

Run: python demos/04_cdf_report.py [out_dir]
"""

import sys
import tempfile
from pathlib import Path

from sliceforge import default_scenario
from sliceforge.control_loop import SlicingEnv, log_header, run_episode, write_kpi_log
from sliceforge.evaluation import report_from_logs
from sliceforge.policies import BASELINES, make_baseline

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="sliceforge-report-"))
cfg = default_scenario(seed=0)

logs = []
for name in BASELINES:
    path = out / f"{name}.jsonl"
    out.mkdir(parents=True, exist_ok=True)
    write_kpi_log(run_episode(make_baseline(name), SlicingEnv(cfg), 300), path, log_header(name, cfg))
    logs.append(path)

files, errors = report_from_logs(logs, out / "report")
print("wrote", *[f.name for f in files], sep="\n  ")
print()
print((out / "report" / "summary.csv").read_text())
