"""``sliceforge`` command line: scenario authoring, training, runs, reports.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .agents import (AGENT_KINDS, load_checkpoint, make_agent, pretrain, save_checkpoint)
from .control_loop import KpiLogWriter, SlicingEnv, log_header, run_episode
from .domain import (ScenarioConfig, ScenarioFormatError, default_scenario, load_scenario,
                     scenario_to_dict, validate_scenario)
from .evaluation import report_from_logs
from .neural import CheckpointError
from .policies import BASELINES, make_baseline

log = logging.getLogger("sliceforge")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
CURVE_FIELDS = ("phase", "step", "mean_reward", "actor_loss", "critic_loss", "epsilon", "replay_size")


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # bad flags are validation errors, not runtime ones
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _configure_logging() -> None:
    raw = os.environ.get("SLICEFORGE_LOG_LEVEL", "info").strip().lower()
    level = LOG_LEVELS.get(raw)
    pkg = logging.getLogger("sliceforge")
    pkg.setLevel(level or logging.INFO)
    for h in [h for h in pkg.handlers if getattr(h, "_sliceforge_cli", False)]:
        pkg.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._sliceforge_cli = True  # type: ignore[attr-defined]
    pkg.addHandler(handler)
    if level is None:
        log.warning("ignoring SLICEFORGE_LOG_LEVEL=%r; expected one of %s", raw, ", ".join(LOG_LEVELS))


def _resolve_scenario(path: str | None, seed: int | None) -> ScenarioConfig:
    if path is None:
        cfg = default_scenario(0 if seed is None else seed)
    else:
        try:
            cfg = load_scenario(path)
        except OSError as exc:
            raise ValidationError(f"cannot read scenario {path}: {exc}") from exc
        except (ScenarioFormatError, TypeError, KeyError, ValueError) as exc:
            raise ValidationError(f"invalid scenario {path}: {exc}") from exc
        if seed is not None:
            cfg = cfg.replace(seed=seed)
    report = validate_scenario(cfg)
    if not report.ok:
        raise ValidationError("scenario failed validation: " + "; ".join(report.violations))
    return cfg


def _write_json(path: Path, doc: dict[str, Any]) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _snapshot(out: Path, command: str, cfg: ScenarioConfig, **extra: Any) -> None:
    _write_json(out / "config.json", {"command": command, "version": __version__,
                                      "scenario": scenario_to_dict(cfg), **extra})


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cell(v: Any) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def write_curve(path: Path, rows: Sequence[dict[str, Any]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_FIELDS)
        for r in rows:
            w.writerow([_cell(r.get(k)) for k in CURVE_FIELDS])


# --- subcommands ---------------------------------------------------------

def cmd_config_default(args: argparse.Namespace) -> int:
    doc = json.dumps(scenario_to_dict(default_scenario(args.seed)), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(doc, encoding="utf-8")
    else:
        sys.stdout.write(doc)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    if args.pretrain_steps < 0 or args.epochs < 0:
        raise ValidationError("--pretrain-steps and --epochs must be nonnegative")
    cfg = _resolve_scenario(args.scenario, args.seed)
    seed = cfg.seed
    out = _outdir(args.out)
    _snapshot(out, "train", cfg, agent=args.agent, seed=seed, pretrain_steps=args.pretrain_steps,
              epochs=args.epochs)

    agent = make_agent(args.agent, seed=seed, total_prbs=cfg.total_prbs)
    log.info("pre-training %s on the surrogate for %d steps", args.agent, args.pretrain_steps)
    pretrain(agent, SlicingEnv(cfg, surrogate=True, seed=seed), args.pretrain_steps)
    n_pre = len(agent.history)

    log.info("online training for %d epochs", args.epochs)
    header = log_header(agent.name, cfg, phase="online", agent=args.agent)
    with KpiLogWriter(out / "kpi_log.jsonl", header) as writer:
        run_episode(agent, SlicingEnv(cfg, seed=seed), args.epochs, on_report=writer.append)

    rows = [{"phase": "pretrain" if i < n_pre else "online", **h} for i, h in enumerate(agent.history)]
    write_curve(out / "curve.csv", rows)
    save_checkpoint(agent, out / "checkpoint.json", scenario=scenario_to_dict(cfg))
    log.info("wrote %s", out)
    return EXIT_OK


def _make_policy(spec: str, cfg: ScenarioConfig):
    kind, _, ckpt = spec.partition(":")
    if kind in BASELINES and not ckpt:
        return make_baseline(kind, cfg.pf_time_constant)
    if kind in AGENT_KINDS:
        if not ckpt:
            raise ValidationError(f"--policy {kind} needs a checkpoint: {kind}:path/to/checkpoint.json")
        agent = load_checkpoint(ckpt, seed=cfg.seed)
        if agent.kind != kind:
            raise CheckpointError(f"{ckpt} holds a {agent.kind} agent, not {kind}")
        if getattr(agent, "total_prbs", cfg.total_prbs) != cfg.total_prbs:
            raise CheckpointError(f"{ckpt} was trained for {agent.total_prbs} PRBs, scenario has "
                                  f"{cfg.total_prbs}")
        agent.training = False
        return agent
    raise ValidationError(f"unknown policy {spec!r}; choose from {', '.join(BASELINES)}, ppo:ckpt, dqn:ckpt")


def cmd_run(args: argparse.Namespace) -> int:
    if args.epochs < 0:
        raise ValidationError("--epochs must be nonnegative")
    cfg = _resolve_scenario(args.scenario, args.seed)
    policy = _make_policy(args.policy, cfg)
    out = _outdir(args.out)
    _snapshot(out, "run", cfg, policy=args.policy, seed=cfg.seed, epochs=args.epochs)
    with KpiLogWriter(out / "kpi_log.jsonl", log_header(policy.name, cfg)) as writer:
        run_episode(policy, SlicingEnv(cfg, seed=cfg.seed), args.epochs, on_report=writer.append)
    log.info("wrote %s", out / "kpi_log.jsonl")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    for p in args.inputs:
        if not Path(p).is_file():
            raise ValidationError(f"cannot read KPI log {p}")
    written, errors = report_from_logs(args.inputs, args.out, per_packet=not args.no_packet_latency)
    for path in written:
        log.info("wrote %s", path)
    if errors:
        log.error("%d malformed log line(s) skipped", len(errors))
        return EXIT_VALIDATION
    return EXIT_OK


# --- wiring --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sliceforge", description="Closed-loop RAN slicing simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cfgp = sub.add_parser("config", help="scenario authoring")
    cfg_sub = cfgp.add_subparsers(dest="config_command", required=True, parser_class=_Parser)
    d = cfg_sub.add_parser("default", help="print the default scenario as JSON")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", help="write to this file instead of stdout")
    d.set_defaults(func=cmd_config_default)

    t = sub.add_parser("train", help="surrogate pre-training then online training")
    t.add_argument("--agent", choices=AGENT_KINDS, default="ppo")
    t.add_argument("--scenario")
    t.add_argument("--seed", type=int)
    t.add_argument("--pretrain-steps", type=int, default=20000)
    t.add_argument("--epochs", type=int, default=2000)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", help="evaluation run of a baseline or a checkpoint")
    r.add_argument("--policy", required=True, help="equal|prop|prealloc|pf|ppo:CKPT|dqn:CKPT")
    r.add_argument("--scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--epochs", type=int, default=500)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="CDF comparison CSVs from KPI logs")
    rep.add_argument("--inputs", nargs="+", required=True)
    rep.add_argument("--out", required=True)
    rep.add_argument("--no-packet-latency", action="store_true",
                     help="skip the per-packet URLLC latency CDF")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (CheckpointError, OSError, FloatingPointError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
