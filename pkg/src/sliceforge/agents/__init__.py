"""Learning agents (PPO, DQN), their shared state encoding, the surrogate
pre-training phase and checkpoint documents."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ..neural import CHECKPOINT_VERSION, CheckpointError
from .dqn import DqnAgent, DqnConfig
from .ppo import PpoAgent, PpoConfig
from .state import STATE_DIM, Observation, build_state

AGENT_KINDS = ("ppo", "dqn")


def make_agent(kind: str, seed: int = 0, total_prbs: int = 52, config: dict | None = None):
    if kind == "ppo":
        return PpoAgent(PpoConfig(**(config or {})), seed=seed)
    if kind == "dqn":
        return DqnAgent(DqnConfig(**(config or {})), seed=seed, total_prbs=total_prbs)
    raise ValueError(f"unknown agent {kind!r}")


def pretrain(agent, surrogate_env, steps: int):
    """Run the ordinary select/store/update cycle against the analytic
    surrogate environment; the weights it leaves behind seed online
    training. Returns the agent."""
    if steps <= 0:
        return agent
    if not surrogate_env.surrogate:
        raise ValueError("pretraining expects a surrogate environment")
    from ..control_loop import run_episode  # control_loop imports this package

    run_episode(agent, surrogate_env, steps, on_report=lambda r: None)
    return agent


def checkpoint_dict(agent, scenario: dict[str, Any] | None = None) -> dict[str, Any]:
    doc = {"format_version": CHECKPOINT_VERSION, "agent": agent.kind, **agent.to_dict()}
    if scenario is not None:
        doc["scenario"] = scenario
    return doc


def save_checkpoint(agent, path: str | Path, scenario: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(checkpoint_dict(agent, scenario), separators=(",", ":")) + "\n")
    return path


def load_checkpoint(path: str | Path, seed: int = 0):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('format_version')!r}")
    kind = doc.get("agent")
    if kind == "ppo":
        return PpoAgent.from_dict(doc, seed=seed)
    if kind == "dqn":
        return DqnAgent.from_dict(doc, seed=seed)
    raise CheckpointError(f"{path}: unknown agent type {kind!r}")


__all__ = [
    "AGENT_KINDS", "DqnAgent", "DqnConfig", "PpoAgent", "PpoConfig", "STATE_DIM", "Observation",
    "build_state", "make_agent", "pretrain", "checkpoint_dict", "save_checkpoint", "load_checkpoint",
]
