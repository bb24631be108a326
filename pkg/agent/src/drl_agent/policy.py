"""Actor-critic heads over the graph encoder.

Every eligible ``(job, op, machine)`` pair becomes one action slot scored
by an MLP on ``[h_op || h_machine || h_job || h_graph]``.  When waiting
is allowed it adds one more slot whose priority attends over the future
pairs: the pair MLP's scores over the future set, softmaxed, weight a
second MLP's values; with no future pairs the priority is a learned
scalar.  A masked softmax over the slots of each state yields the policy
distribution — its support is exactly the action mask by construction.
The critic reads the pooled graph embedding.  Hidden activations are
tanh, keeping the loss surface smooth for finite-difference checks.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from .batch import PackedBatch
from .config import PolicyConfig
from .hgat import HGATEncoder

__all__ = ["ActorCritic", "PolicyOutput"]


def _mlp(in_dim: int, hidden: tuple[int, ...]) -> nn.Sequential:
    layers: list[nn.Module] = []
    prev = in_dim
    for width in hidden:
        layers += [nn.Linear(prev, width), nn.Tanh()]
        prev = width
    layers.append(nn.Linear(prev, 1))
    return nn.Sequential(*layers)


def _segment_log_softmax(values: torch.Tensor, index: torch.Tensor,
                         n_segments: int) -> torch.Tensor:
    """Log-softmax of ``values`` grouped by ``index`` (every group must be
    non-empty among the segments actually referenced)."""
    m = torch.full((n_segments,), -torch.inf,
                   dtype=values.dtype, device=values.device)
    m.scatter_reduce_(0, index, values.detach(), reduce="amax")
    m = torch.where(torch.isfinite(m), m, torch.zeros_like(m))
    z = torch.exp(values - m[index])
    denom = torch.zeros_like(m).index_add_(0, index, z)
    return values - m[index] - torch.log(denom.clamp(min=1e-38))[index]


class PolicyOutput(NamedTuple):
    slot_logits: torch.Tensor  # [S]
    log_probs: torch.Tensor    # [S] log pi per slot, normalized per state
    value: torch.Tensor        # [B]
    entropy: torch.Tensor      # [B]


class ActorCritic(nn.Module):
    def __init__(self, config: PolicyConfig):
        super().__init__()
        self.config = config
        self.encoder = HGATEncoder(config)
        pair_dim = 3 * config.hidden_dim + self.encoder.graph_dim
        self.pair_mlp = _mlp(pair_dim, config.actor_hidden)
        self.wait_mlp = _mlp(pair_dim, config.actor_hidden)
        self.wait_bias = nn.Parameter(torch.zeros(1))
        self.critic = _mlp(self.encoder.graph_dim, config.critic_hidden)

    def _pair_inputs(self, h: dict[str, torch.Tensor],
                     op_rows: torch.Tensor, machine_rows: torch.Tensor,
                     job_rows: torch.Tensor,
                     graph_rows: torch.Tensor) -> torch.Tensor:
        return torch.cat([
            h["op"][op_rows], h["machine"][machine_rows],
            h["job"][job_rows], h["graph"][graph_rows],
        ], dim=-1)

    def forward(self, batch: PackedBatch) -> PolicyOutput:
        h = self.encoder(batch)
        slot_logits = h["graph"].new_zeros(batch.n_slots)

        if len(batch.pair_slot):
            pair_in = self._pair_inputs(h, batch.pair_op, batch.pair_machine,
                                        batch.pair_job, batch.pair_graph)
            pair_scores = self.pair_mlp(pair_in).squeeze(-1)
            slot_logits = slot_logits.index_copy(0, batch.pair_slot,
                                                 pair_scores)

        if len(batch.wait_slot):
            wait_vals = self.wait_bias.expand(batch.n_graphs).clone()
            if len(batch.future_op):
                fut_in = self._pair_inputs(
                    h, batch.future_op, batch.future_machine,
                    batch.future_job, batch.future_graph)
                logits = self.pair_mlp(fut_in).squeeze(-1)
                log_alpha = _segment_log_softmax(logits, batch.future_graph,
                                                 batch.n_graphs)
                weighted = torch.exp(log_alpha) * self.wait_mlp(fut_in).squeeze(-1)
                summed = torch.zeros_like(wait_vals).index_add_(
                    0, batch.future_graph, weighted)
                has_future = torch.zeros(
                    batch.n_graphs, dtype=torch.bool, device=summed.device)
                has_future[batch.future_graph] = True
                wait_vals = torch.where(has_future, summed, wait_vals)
            slot_logits = slot_logits.index_copy(
                0, batch.wait_slot, wait_vals[batch.wait_graph])

        log_probs = _segment_log_softmax(slot_logits, batch.slot_graph,
                                         batch.n_graphs)
        probs = torch.exp(log_probs)
        entropy = torch.zeros(
            batch.n_graphs, dtype=log_probs.dtype,
            device=log_probs.device).index_add_(
            0, batch.slot_graph, -probs * log_probs)
        value = self.critic(h["graph"]).squeeze(-1)
        return PolicyOutput(slot_logits, log_probs, value, entropy)

    # ------------------------------------------------------------------
    # acting (no grad)

    @torch.inference_mode()
    def act(
        self,
        batch: PackedBatch,
        mode: str,
        rng: np.random.Generator | None = None,
    ) -> tuple[list[int], np.ndarray, np.ndarray]:
        """Pick one slot per state.

        Returns local slot indices (pair order then wait), their log
        probabilities, and the state values.  ``mode`` is ``"greedy"``
        (argmax) or ``"sample"`` (needs ``rng``).
        """
        if mode not in ("greedy", "sample"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "sample" and rng is None:
            raise ValueError("sample mode needs an rng")
        out = self.forward(batch)
        log_probs = out.log_probs.to(torch.float64).cpu().numpy()
        chosen: list[int] = []
        chosen_logp = np.zeros(batch.n_graphs)
        for i in range(batch.n_graphs):
            lo = int(batch.slot_offset[i])
            count = int(batch.slot_count[i])
            if count == 0:
                raise RuntimeError(f"state {i} has an empty action space")
            segment = log_probs[lo:lo + count]
            if mode == "greedy":
                local = int(np.argmax(segment))
            else:
                p = np.exp(segment)
                p /= p.sum()
                local = int(rng.choice(count, p=p))
            chosen.append(local)
            chosen_logp[i] = segment[local]
        value = out.value.to(torch.float64).cpu().numpy()
        return chosen, chosen_logp, value

    def log_prob_of(self, out: PolicyOutput, batch: PackedBatch,
                    local_slots: torch.Tensor) -> torch.Tensor:
        """Log probabilities of stored local slot choices (differentiable)."""
        offsets = torch.as_tensor(batch.slot_offset,
                                  device=out.log_probs.device)
        return out.log_probs[offsets + local_slots]
