"""Checkpoint files: model weights plus the config that shaped them.

The payload is restricted to plain containers, primitives, and tensors
so files load under ``torch.load(weights_only=True)``.
"""

from __future__ import annotations

from pathlib import Path

import torch

from .config import PolicyConfig
from .policy import ActorCritic

__all__ = ["save_checkpoint", "load_checkpoint", "load_policy"]

FORMAT = "drl-agent-checkpoint"
VERSION = 1


def save_checkpoint(
    path: str | Path,
    *,
    config: PolicyConfig,
    model_state: dict,
    final_model_state: dict | None = None,
    optimizer_state: dict | None = None,
    meta: dict | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "config": config.to_dict(),
        "model": model_state,
        "final_model": final_model_state,
        "optimizer": optimizer_state,
        "meta": meta or {},
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> dict:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise ValueError(f"{path} is not a drl-agent checkpoint")
    if payload.get("version") != VERSION:
        raise ValueError(
            f"unsupported checkpoint version {payload.get('version')}")
    return payload


def load_policy(path: str | Path, *, final: bool = False
                ) -> tuple[ActorCritic, PolicyConfig, dict]:
    """Rebuild the policy from a checkpoint.

    ``final=True`` loads the last epoch's weights instead of the
    best-validation weights.
    """
    payload = load_checkpoint(path)
    config = PolicyConfig.from_dict(payload["config"])
    policy = ActorCritic(config)
    state = payload["final_model"] if final else payload["model"]
    if state is None:
        state = payload["model"]
    policy.load_state_dict(state)
    policy.train(False)
    return policy, config, payload.get("meta", {})
