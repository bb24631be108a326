"""End-to-end training: environment pool, PPO epochs, validation.

An *epoch* is one update cycle: ``update_interval`` sampled episodes
collected from a small pool of scheduling servers, followed by one PPO
update.  The pool's instances are regenerated every
``instance_change_interval`` episodes so the policy sees a stream of
problems rather than memorizing one.  A fixed held-out set of generated
instances is played greedily every ``val_every`` epochs; the weights
with the best validation mean makespan become the checkpoint's primary
model (the last epoch's weights are stored alongside).
"""

from __future__ import annotations

import copy
import json
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .config import PolicyConfig
from .driver import ActionStats, policy_decider, run_episodes
from .endpoint import Endpoint, generate_instance_file
from .policy import ActorCritic
from .ppo import PPO

__all__ = ["TrainSettings", "TrainResult", "train"]


@dataclass
class TrainSettings:
    jobs: int = 5
    machines: int = 3
    epochs: int = 200
    seed: int = 0
    gen_config: dict = field(default_factory=dict)
    reward: str = "est:mean/mean/max"
    val_instances: int = 20
    val_every: int = 10
    env_batch: int = 3
    server_cmd: str = "ipps"
    workdir: str | None = None
    device: str = "cpu"


@dataclass
class TrainResult:
    epoch0_val: float
    best_val: float
    best_epoch: int
    final_val: float
    curve: list[dict]
    episodes: int
    updates: int
    stats: ActionStats
    checkpoint: Path | None
    seconds: float


def _mean_makespan(results) -> float:
    return float(np.mean([r.makespan for r in results]))


def train(
    settings: TrainSettings,
    config: PolicyConfig | None = None,
    *,
    out: str | Path | None = None,
    progress: Callable[[str], None] | None = None,
) -> TrainResult:
    config = config or PolicyConfig()
    say = progress or (lambda line: None)
    started = time.monotonic()

    torch.manual_seed(settings.seed)
    act_rng = np.random.default_rng(settings.seed)
    update_rng = np.random.default_rng(settings.seed + 1)

    tmpdir: str | None = None
    if settings.workdir is None:
        tmpdir = tempfile.mkdtemp(prefix="drl-agent-train-")
        workdir = Path(tmpdir)
    else:
        workdir = Path(settings.workdir)
        workdir.mkdir(parents=True, exist_ok=True)

    cfg_path: Path | None = None
    if settings.gen_config:
        cfg_path = workdir / "generator.json"
        cfg_path.write_text(json.dumps(settings.gen_config))

    # Disjoint seed streams for training and validation instances.
    train_seed_base = settings.seed * 1_000_000
    val_seed_base = train_seed_base + 500_000

    def make_instance(path: Path, seed: int) -> Path:
        return generate_instance_file(
            path, jobs=settings.jobs, machines=settings.machines,
            seed=seed, cfg_path=cfg_path, server_cmd=settings.server_cmd)

    policy = ActorCritic(config).to(settings.device)
    ppo = PPO(policy, config, device=settings.device)
    stats = ActionStats()

    val_endpoints: list[Endpoint] = []
    pool: list[Endpoint] = []
    next_train_seed = train_seed_base

    def spawn_pool() -> None:
        nonlocal next_train_seed
        for i in range(settings.env_batch):
            path = make_instance(workdir / f"train_{i}.json", next_train_seed)
            next_train_seed += 1
            pool.append(Endpoint.spawn(
                path, server_cmd=settings.server_cmd,
                reward=settings.reward))

    def rotate_pool() -> None:
        while pool:
            pool.pop().close()
        spawn_pool()

    def validate() -> float:
        decide = policy_decider(policy, "greedy", device=settings.device)
        results = run_episodes(val_endpoints, decide,
                               limit=len(val_endpoints))
        return _mean_makespan(results)

    try:
        for i in range(settings.val_instances):
            path = make_instance(workdir / f"val_{i:03d}.json",
                                 val_seed_base + i)
            val_endpoints.append(Endpoint.spawn(
                path, server_cmd=settings.server_cmd, reward="naive"))
        spawn_pool()

        epoch0_val = validate()
        best_val = epoch0_val
        best_epoch = 0
        final_val = epoch0_val
        best_state = copy.deepcopy(
            {k: v.cpu() for k, v in policy.state_dict().items()})
        say(f"epoch 0: val mean makespan {epoch0_val:.2f}")

        curve: list[dict] = []
        episodes_done = 0
        episodes_since_rotation = 0
        decide_sample = policy_decider(policy, "sample", act_rng,
                                       device=settings.device)

        for epoch in range(1, settings.epochs + 1):
            if episodes_since_rotation >= config.instance_change_interval:
                rotate_pool()
                episodes_since_rotation = 0
            results = run_episodes(pool, decide_sample,
                                   limit=config.update_interval,
                                   record=True, stats=stats)
            episodes_done += len(results)
            episodes_since_rotation += len(results)
            update = ppo.update(results, update_rng)

            entry = {
                "epoch": epoch,
                "train_mean_makespan": _mean_makespan(results),
                "loss": update.loss,
                "policy_loss": update.policy_loss,
                "value_loss": update.value_loss,
                "entropy": update.entropy,
                "clip_eps": update.clip_eps,
                "entropy_coeff": update.entropy_coeff,
            }
            if epoch % settings.val_every == 0 or epoch == settings.epochs:
                val = validate()
                final_val = val
                entry["val_mean_makespan"] = val
                if val < best_val:
                    best_val = val
                    best_epoch = epoch
                    best_state = copy.deepcopy(
                        {k: v.cpu() for k, v in policy.state_dict().items()})
                say(f"epoch {epoch}: val mean makespan {val:.2f} "
                    f"(best {best_val:.2f} @ {best_epoch}), "
                    f"train {entry['train_mean_makespan']:.2f}")
            curve.append(entry)
    finally:
        for ep in val_endpoints + pool:
            ep.close()
        if tmpdir is not None:
            shutil.rmtree(tmpdir, ignore_errors=True)

    seconds = time.monotonic() - started
    checkpoint_path: Path | None = None
    if out is not None:
        final_state = {k: v.cpu() for k, v in policy.state_dict().items()}
        meta = {
            "jobs": settings.jobs,
            "machines": settings.machines,
            "epochs": settings.epochs,
            "seed": settings.seed,
            "gen_config": settings.gen_config,
            "reward": settings.reward,
            "val_instances": settings.val_instances,
            "epoch0_val": epoch0_val,
            "best_val": best_val,
            "best_epoch": best_epoch,
            "final_val": final_val,
            "episodes": episodes_done,
            "updates": ppo.updates_done,
            "curve": curve,
            "actions": stats.actions,
            "wait_actions": stats.wait_actions,
            "illegal_actions": stats.illegal,
            "error_replies": stats.error_replies,
            "seconds": seconds,
        }
        checkpoint_path = save_checkpoint(
            out, config=config, model_state=best_state,
            final_model_state=final_state, optimizer_state=ppo.state(),
            meta=meta)
        say(f"checkpoint written to {checkpoint_path}")

    return TrainResult(
        epoch0_val=epoch0_val, best_val=best_val, best_epoch=best_epoch,
        final_val=final_val, curve=curve, episodes=episodes_done,
        updates=ppo.updates_done, stats=stats,
        checkpoint=checkpoint_path, seconds=seconds)
