"""PPO over recorded episodes.

One update cycle consumes the transitions of a batch of episodes:
per-episode discounted returns (no GAE) minus the stored value baseline
give advantages, and ``k_epochs`` passes over shuffled minibatches apply
the clipped-surrogate loss plus ``vf_coeff`` times the value MSE minus
the entropy bonus.  The clip range grows per completed update as
``min(eps_clip * clip_multi**k, clip_ub)`` and the entropy coefficient
decays by ``entropy_discount``.  Returns are divided by a running
standard deviation (``return_scale="auto"``) so the critic target scale
is instance-family independent; advantages are batch-normalized.  Both
knobs sit in :class:`~drl_agent.config.PolicyConfig`.

A non-finite loss raises :class:`~drl_agent.errors.TrainingAborted`
carrying the loss parts and ratio statistics.  :func:`gradient_check`
verifies the analytic gradient of the full loss against central finite
differences in double precision.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import torch

from .batch import PackedBatch
from .config import PolicyConfig
from .driver import EpisodeResult, Transition
from .errors import TrainingAborted
from .policy import ActorCritic

__all__ = ["PPO", "UpdateStats", "RunningScale", "discounted_returns",
           "gradient_check"]


def discounted_returns(rewards: list[float], gamma: float) -> np.ndarray:
    """Plain discounted return-to-go per step."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        if math.isnan(rewards[i]):
            raise ValueError(f"reward at step {i} was never filled")
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


class RunningScale:
    """Running standard deviation of return samples (Welford batches)."""

    def __init__(self, fixed: float | None = None):
        self.fixed = fixed
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, values: np.ndarray) -> None:
        if self.fixed is not None or len(values) == 0:
            return
        n = len(values)
        mean = float(values.mean())
        m2 = float(((values - mean) ** 2).sum())
        delta = mean - self.mean
        total = self.count + n
        self.m2 += m2 + delta ** 2 * self.count * n / total
        self.mean += delta * n / total
        self.count = total

    @property
    def scale(self) -> float:
        if self.fixed is not None:
            return self.fixed
        if self.count < 2:
            return 1.0
        return max(math.sqrt(self.m2 / (self.count - 1)), 1e-4)

    def state(self) -> dict:
        return {"fixed": self.fixed, "count": self.count,
                "mean": self.mean, "m2": self.m2}

    @classmethod
    def from_state(cls, data: dict) -> "RunningScale":
        out = cls(data.get("fixed"))
        out.count = int(data.get("count", 0))
        out.mean = float(data.get("mean", 0.0))
        out.m2 = float(data.get("m2", 0.0))
        return out


@dataclass
class UpdateStats:
    update_index: int
    transitions: int
    clip_eps: float
    entropy_coeff: float
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    ratio_min: float
    ratio_max: float
    return_scale: float


def _loss_parts(
    policy: ActorCritic,
    snapshots: list,
    local_slots: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    returns: torch.Tensor,
    clip_eps: float,
    vf_coeff: float,
    entropy_coeff: float,
    dtype: torch.dtype = torch.float32,
    device: torch.device | str = "cpu",
) -> tuple[torch.Tensor, dict[str, float], torch.Tensor]:
    """Full PPO loss on one minibatch; also returns the ratio tensor."""
    batch = PackedBatch.build(snapshots, device=device, dtype=dtype)
    out = policy(batch)
    new_log_probs = policy.log_prob_of(out, batch, local_slots)
    ratio = torch.exp(new_log_probs - old_log_probs)
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    policy_loss = -torch.minimum(unclipped, clipped).mean()
    value_loss = torch.nn.functional.mse_loss(out.value, returns)
    entropy = out.entropy.mean()
    loss = policy_loss + vf_coeff * value_loss - entropy_coeff * entropy
    parts = {
        "policy_loss": float(policy_loss.detach()),
        "value_loss": float(value_loss.detach()),
        "entropy": float(entropy.detach()),
    }
    return loss, parts, ratio.detach()


class PPO:
    """Optimizer state and update rule around one policy."""

    def __init__(self, policy: ActorCritic, config: PolicyConfig,
                 device: torch.device | str = "cpu"):
        self.policy = policy
        self.config = config
        self.device = device
        self.optimizer = torch.optim.Adam(
            policy.parameters(), lr=config.lr, betas=config.betas)
        self.updates_done = 0
        fixed = (None if config.return_scale == "auto"
                 else float(config.return_scale))
        self.return_scale = RunningScale(fixed)

    @property
    def clip_eps(self) -> float:
        return self.config.clip_at(self.updates_done)

    @property
    def entropy_coeff(self) -> float:
        return self.config.entropy_at(self.updates_done)

    def prepare(self, episodes: list[EpisodeResult]):
        """Flatten episodes into per-transition training arrays."""
        transitions: list[Transition] = []
        returns_parts = []
        for ep in episodes:
            if not ep.transitions:
                raise ValueError("episode carries no recorded transitions")
            transitions.extend(ep.transitions)
            returns_parts.append(discounted_returns(
                [t.reward for t in ep.transitions], self.config.gamma))
        returns = np.concatenate(returns_parts)
        self.return_scale.update(returns)
        scaled = returns / self.return_scale.scale
        values = np.array([t.value for t in transitions])
        advantages = scaled - values
        if self.config.advantage_norm and len(advantages) > 1:
            advantages = ((advantages - advantages.mean())
                          / max(float(advantages.std()), 1e-8))
        return transitions, scaled, advantages

    def update(self, episodes: list[EpisodeResult],
               rng: np.random.Generator) -> UpdateStats:
        transitions, scaled_returns, advantages = self.prepare(episodes)
        n = len(transitions)
        clip_eps = self.clip_eps
        entropy_coeff = self.entropy_coeff
        dtype = torch.float32
        old = torch.as_tensor(
            np.array([t.log_prob for t in transitions]), dtype=dtype)
        adv = torch.as_tensor(advantages, dtype=dtype)
        ret = torch.as_tensor(scaled_returns, dtype=dtype)
        slots = torch.as_tensor(
            np.array([t.local_slot for t in transitions], dtype=np.int64))

        totals = {"loss": 0.0, "policy_loss": 0.0, "value_loss": 0.0,
                  "entropy": 0.0}
        ratio_min, ratio_max = math.inf, -math.inf
        batches = 0
        for _ in range(self.config.k_epochs):
            order = rng.permutation(n)
            for lo in range(0, n, self.config.minibatch):
                idx = order[lo:lo + self.config.minibatch]
                idx_t = torch.as_tensor(idx)
                loss, parts, ratio = _loss_parts(
                    self.policy,
                    [transitions[i].snapshot for i in idx],
                    slots[idx_t], old[idx_t], adv[idx_t], ret[idx_t],
                    clip_eps, self.config.vf_coeff, entropy_coeff,
                    dtype=dtype, device=self.device)
                if not torch.isfinite(loss):
                    raise TrainingAborted(
                        "non-finite loss", {
                            "update": self.updates_done, "minibatch": batches,
                            **parts,
                            "ratio_min": float(ratio.min()) if len(ratio) else 0,
                            "ratio_max": float(ratio.max()) if len(ratio) else 0,
                            "advantage_absmax": float(adv.abs().max()),
                            "return_scale": self.return_scale.scale,
                        })
                self.optimizer.zero_grad()
                loss.backward()
                self.optimizer.step()
                totals["loss"] += float(loss.detach())
                for key, val in parts.items():
                    totals[key] += val
                if len(ratio):
                    ratio_min = min(ratio_min, float(ratio.min()))
                    ratio_max = max(ratio_max, float(ratio.max()))
                batches += 1
        self.updates_done += 1
        return UpdateStats(
            update_index=self.updates_done, transitions=n,
            clip_eps=clip_eps, entropy_coeff=entropy_coeff,
            loss=totals["loss"] / batches,
            policy_loss=totals["policy_loss"] / batches,
            value_loss=totals["value_loss"] / batches,
            entropy=totals["entropy"] / batches,
            ratio_min=ratio_min if batches else 0.0,
            ratio_max=ratio_max if batches else 0.0,
            return_scale=self.return_scale.scale,
        )

    def state(self) -> dict:
        return {
            "updates_done": self.updates_done,
            "optimizer": self.optimizer.state_dict(),
            "return_scale": self.return_scale.state(),
        }


def gradient_check(
    policy: ActorCritic,
    transitions: list[Transition],
    config: PolicyConfig,
    *,
    n_coords: int = 60,
    fd_eps: float = 1e-5,
    offset: float = 1e-3,
    seed: int = 0,
) -> dict:
    """Analytic vs central-difference gradients of the PPO loss.

    Runs in double precision on a frozen micro-batch.  The behavior
    policy's log-probs are taken before the parameters are nudged by a
    small random offset, so the ratios sit away from the r=1 crease of
    the clipped surrogate.  Returns the worst relative error
    ``|a - n| / max(|a|, |n|, 1e-6)`` over ``n_coords`` sampled
    parameter coordinates.
    """
    check = copy.deepcopy(policy).to(torch.float64)
    check.train(False)
    snapshots = [t.snapshot for t in transitions]
    slots = torch.as_tensor([t.local_slot for t in transitions],
                            dtype=torch.int64)
    returns = np.concatenate([discounted_returns(
        [t.reward for t in transitions], config.gamma)])
    scale = max(float(returns.std()), 1e-4)
    ret = torch.as_tensor(returns / scale, dtype=torch.float64)

    batch = PackedBatch.build(snapshots, dtype=torch.float64)
    with torch.no_grad():
        out = check(batch)
        old = check.log_prob_of(out, batch, slots).clone()
        values = out.value.clone()
    adv = ret - values
    if len(adv) > 1:
        adv = (adv - adv.mean()) / adv.std().clamp(min=1e-8)

    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in check.parameters():
            p.add_(offset * torch.randn(p.shape, generator=gen,
                                        dtype=p.dtype))

    def loss_value() -> torch.Tensor:
        loss, _, _ = _loss_parts(
            check, snapshots, slots, old, adv, ret,
            clip_eps=config.eps_clip, vf_coeff=config.vf_coeff,
            entropy_coeff=config.entropy_coeff, dtype=torch.float64)
        return loss

    loss = loss_value()
    check.zero_grad()
    loss.backward()
    params = [p for p in check.parameters()]
    grads = [p.grad.detach().clone() if p.grad is not None
             else torch.zeros_like(p) for p in params]
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    coords = rng.choice(total, size=min(n_coords, total), replace=False)

    worst = 0.0
    checked = []
    bounds = np.cumsum([0] + sizes)
    for flat_index in sorted(int(c) for c in coords):
        which = int(np.searchsorted(bounds, flat_index, side="right")) - 1
        local = flat_index - bounds[which]
        p = params[which]
        with torch.no_grad():
            base = p.view(-1)[local].item()
            p.view(-1)[local] = base + fd_eps
            up = float(loss_value())
            p.view(-1)[local] = base - fd_eps
            down = float(loss_value())
            p.view(-1)[local] = base
        numeric = (up - down) / (2 * fd_eps)
        analytic = float(grads[which].view(-1)[local])
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, rel)
        checked.append(rel)
    return {
        "max_rel_err": worst,
        "mean_rel_err": float(np.mean(checked)) if checked else 0.0,
        "coords": len(checked),
        "loss": float(loss.detach()),
    }
