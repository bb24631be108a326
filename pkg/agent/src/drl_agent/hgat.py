"""Heterogeneous graph-attention encoder over scheduling snapshots.

Five typed relations are aggregated, each with its own attention
parameters per layer:

- ``op<-op``: an operation hears its unfinished gating predecessors,
- ``op<-machine`` / ``machine<-op``: capability edges in both directions,
  with the processing time feeding the score and the message,
- ``combination<-op``: a routing alternative hears its member operations,
- ``job<-combination``: a job hears its surviving alternatives.

Scoring is GATv2-style: ``a^T leaky_relu(W_dst h_i + W_src h_j +
theta_e t_ij)`` per head, softmaxed over the in-neighborhood plus a
self-loop that uses a separate self projection for both score and value.
A node with no in-edges under a relation therefore attends to itself
with weight one and its output is a plain linear transform of its own
features.  Relation outputs targeting the same node type are averaged,
passed through ELU, and the per-layer results are combined by
elementwise max (jumping knowledge).  The graph embedding concatenates
mean-pooled operation, machine, and job embeddings; combination
embeddings are produced but take no further part downstream.
"""

from __future__ import annotations

from typing import NamedTuple

import torch
from torch import nn

from .batch import PackedBatch
from .config import PolicyConfig
from .snapshot import COMBINATION_DIM, JOB_DIM, MACHINE_DIM, OP_DIM

__all__ = ["RELATIONS", "Relation", "RelationAttention", "HGATEncoder",
           "segment_mean"]

IN_DIMS = {"op": OP_DIM, "machine": MACHINE_DIM,
           "combination": COMBINATION_DIM, "job": JOB_DIM}


class Relation(NamedTuple):
    name: str
    src: str
    dst: str
    has_edge_feature: bool


RELATIONS = (
    Relation("op_pred", "op", "op", False),
    Relation("op_from_machine", "machine", "op", True),
    Relation("machine_from_op", "op", "machine", True),
    Relation("comb_from_op", "op", "combination", False),
    Relation("job_from_comb", "combination", "job", False),
)


def _edges_for(batch: PackedBatch, name: str) -> tuple[torch.Tensor, torch.Tensor | None]:
    if name == "op_pred":
        return batch.op_op, None
    if name == "op_from_machine":
        return batch.op_machine.flip(1), batch.op_machine_t
    if name == "machine_from_op":
        return batch.op_machine, batch.op_machine_t
    if name == "comb_from_op":
        return batch.op_comb, None
    if name == "job_from_comb":
        return batch.comb_job, None
    raise KeyError(name)


def segment_mean(values: torch.Tensor, index: torch.Tensor,
                 n_segments: int) -> torch.Tensor:
    """Mean of ``values`` rows grouped by ``index``; empty groups are zero."""
    out = values.new_zeros((n_segments, values.shape[-1]))
    out.index_add_(0, index, values)
    counts = torch.zeros(n_segments, dtype=values.dtype, device=values.device)
    counts.index_add_(0, index, torch.ones_like(index, dtype=values.dtype))
    return out / counts.clamp(min=1).unsqueeze(-1)


class RelationAttention(nn.Module):
    """One relation's multi-head GATv2 aggregation for one layer."""

    def __init__(self, in_src: int, in_dst: int, hidden: int, heads: int,
                 has_edge_feature: bool, leaky_slope: float):
        super().__init__()
        if hidden % heads:
            raise ValueError(f"hidden {hidden} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = hidden // heads
        self.w_src = nn.Linear(in_src, hidden, bias=False)
        self.w_dst = nn.Linear(in_dst, hidden, bias=False)
        self.w_self = nn.Linear(in_dst, hidden, bias=False)
        self.attn = nn.Parameter(torch.empty(heads, self.head_dim))
        nn.init.xavier_uniform_(self.attn)
        self.theta_e = (nn.Parameter(torch.zeros(hidden))
                        if has_edge_feature else None)
        if has_edge_feature:
            nn.init.uniform_(self.theta_e, -0.5, 0.5)
        self.leaky_slope = leaky_slope

    def forward(
        self,
        h_src: torch.Tensor,
        h_dst: torch.Tensor,
        edges: torch.Tensor,          # [E, 2] (src_row, dst_row)
        edge_t: torch.Tensor | None,  # [E] or None
        return_attention: bool = False,
    ):
        n_dst, h, d = h_dst.shape[0], self.heads, self.head_dim
        q = self.w_dst(h_dst)                       # [N, h*d]
        v_self = self.w_self(h_dst)                 # [N, h*d]
        pre_s = nn.functional.leaky_relu(q + v_self, self.leaky_slope)
        score_s = (pre_s.view(n_dst, h, d) * self.attn).sum(-1)   # [N, h]

        src_rows, dst_rows = edges[:, 0], edges[:, 1]
        v_edge = self.w_src(h_src)[src_rows]        # [E, h*d]
        if self.theta_e is not None and edge_t is not None:
            v_edge = v_edge + edge_t.unsqueeze(-1) * self.theta_e
        pre_e = nn.functional.leaky_relu(q[dst_rows] + v_edge, self.leaky_slope)
        score_e = (pre_e.view(-1, h, d) * self.attn).sum(-1)      # [E, h]

        # numerically stable softmax over {self} + in-edges per dst node
        m = score_s.detach().clone()
        if len(score_e):
            m.scatter_reduce_(0, dst_rows.unsqueeze(-1).expand(-1, h),
                              score_e.detach(), reduce="amax")
        z_s = torch.exp(score_s - m)                              # [N, h]
        z_e = torch.exp(score_e - m[dst_rows])                    # [E, h]
        denom = z_s + torch.zeros_like(z_s).index_add_(0, dst_rows, z_e)
        out = z_s.unsqueeze(-1) * v_self.view(n_dst, h, d)
        if len(z_e):
            weighted = z_e.unsqueeze(-1) * v_edge.view(-1, h, d)
            out = out + torch.zeros_like(out).index_add_(0, dst_rows, weighted)
        out = (out / denom.unsqueeze(-1)).reshape(n_dst, h * d)
        if return_attention:
            alpha_self = z_s / denom
            alpha_edge = z_e / denom[dst_rows]
            return out, (alpha_self, alpha_edge, dst_rows)
        return out


class HGATLayer(nn.Module):
    """All relations of one layer; outputs the next embedding per type."""

    def __init__(self, in_dims: dict[str, int], hidden: int, heads: int,
                 leaky_slope: float):
        super().__init__()
        self.relations = nn.ModuleDict({
            r.name: RelationAttention(in_dims[r.src], in_dims[r.dst], hidden,
                                      heads, r.has_edge_feature, leaky_slope)
            for r in RELATIONS
        })

    def forward(self, h: dict[str, torch.Tensor], batch: PackedBatch,
                return_attention: bool = False):
        per_dst: dict[str, list[torch.Tensor]] = {t: [] for t in IN_DIMS}
        attention: dict[str, tuple] = {}
        for rel in RELATIONS:
            edges, edge_t = _edges_for(batch, rel.name)
            module = self.relations[rel.name]
            result = module(h[rel.src], h[rel.dst], edges, edge_t,
                            return_attention)
            if return_attention:
                result, attention[rel.name] = result
            per_dst[rel.dst].append(result)
        out = {
            t: nn.functional.elu(torch.stack(parts).mean(0))
            for t, parts in per_dst.items() if parts
        }
        for t in IN_DIMS:           # types no relation targets keep zeros
            if t not in out:
                out[t] = h[t].new_zeros((h[t].shape[0], 0))
        if return_attention:
            return out, attention
        return out


class HGATEncoder(nn.Module):
    """Stacked layers + jumping knowledge + graph pooling."""

    def __init__(self, config: PolicyConfig):
        super().__init__()
        self.config = config
        dims = dict(IN_DIMS)
        layers = []
        for heads in config.heads:
            layers.append(HGATLayer(dims, config.hidden_dim, heads,
                                    config.leaky_slope))
            dims = {t: config.hidden_dim for t in dims}
        self.layers = nn.ModuleList(layers)

    @property
    def graph_dim(self) -> int:
        """Width of the pooled graph embedding (op, machine, job parts)."""
        return 3 * self.config.hidden_dim

    def forward(self, batch: PackedBatch) -> dict[str, torch.Tensor]:
        h = {"op": batch.x_op, "machine": batch.x_machine,
             "combination": batch.x_comb, "job": batch.x_job}
        per_layer: list[dict[str, torch.Tensor]] = []
        for layer in self.layers:
            h = layer(h, batch)
            per_layer.append(h)
        final = {
            t: torch.stack([out[t] for out in per_layer]).max(0).values
            for t in IN_DIMS
        }
        h_t = torch.cat([
            segment_mean(final["op"], batch.g_op, batch.n_graphs),
            segment_mean(final["machine"], batch.g_machine, batch.n_graphs),
            segment_mean(final["job"], batch.g_job, batch.n_graphs),
        ], dim=-1)
        final["graph"] = h_t
        return final
