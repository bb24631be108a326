"""Pack decoded snapshots into one batched graph.

Batching concatenates every node type across snapshots (with row offsets
applied to edges, pairs, and future pairs) and records which graph each
node, pair, and action slot belongs to, so a single forward pass scores
any number of states.  Action slots are laid out per graph as the masked
pairs in mask order followed by the waiting slot when allowed; the local
slot index is what policies sample and what training replays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .snapshot import (COMBINATION_DIM, JOB_DIM, MACHINE_DIM, OP_DIM,
                       Snapshot)

__all__ = ["PackedBatch"]


def _cat_rows(arrays: list[np.ndarray], width: int) -> np.ndarray:
    if not arrays:
        return np.zeros((0, width), dtype=np.float32)
    return np.concatenate(arrays, axis=0)


@dataclass
class PackedBatch:
    """Tensors for one forward pass over ``n_graphs`` states."""

    n_graphs: int
    # node features and graph membership per type
    x_op: torch.Tensor          # [N_op, 5]
    x_machine: torch.Tensor     # [N_ma, 6]
    x_comb: torch.Tensor        # [N_cb, 2]
    x_job: torch.Tensor         # [N_jb, 1]
    g_op: torch.Tensor          # [N_op] graph index
    g_machine: torch.Tensor
    g_comb: torch.Tensor
    g_job: torch.Tensor
    # edges (global rows)
    op_op: torch.Tensor         # [E1, 2]
    op_machine: torch.Tensor    # [E2, 2]
    op_machine_t: torch.Tensor  # [E2]
    op_comb: torch.Tensor       # [E3, 2]
    comb_job: torch.Tensor      # [E4, 2]
    # action slots: per graph, pairs in mask order then optional wait
    slot_graph: torch.Tensor    # [S] graph index per slot
    slot_offset: np.ndarray     # [B] first slot row of each graph
    slot_count: np.ndarray      # [B] number of slots of each graph
    pair_slot: torch.Tensor     # [P] slot row of each pair
    pair_op: torch.Tensor       # [P] global op row
    pair_machine: torch.Tensor  # [P]
    pair_job: torch.Tensor      # [P]
    pair_graph: torch.Tensor    # [P]
    wait_slot: torch.Tensor     # [W] slot row of each waiting slot
    wait_graph: torch.Tensor    # [W] graph index of each waiting slot
    # future pairs (attention pool for the waiting priority)
    future_op: torch.Tensor     # [F]
    future_machine: torch.Tensor
    future_job: torch.Tensor
    future_graph: torch.Tensor

    @property
    def n_slots(self) -> int:
        return int(self.slot_graph.shape[0])

    @classmethod
    def build(
        cls,
        snapshots: list[Snapshot],
        device: torch.device | str = "cpu",
        dtype: torch.dtype = torch.float32,
    ) -> "PackedBatch":
        n = len(snapshots)
        if n == 0:
            raise ValueError("cannot pack zero snapshots")
        off_op = np.zeros(n, dtype=np.int64)
        off_ma = np.zeros(n, dtype=np.int64)
        off_cb = np.zeros(n, dtype=np.int64)
        off_jb = np.zeros(n, dtype=np.int64)
        for i, s in enumerate(snapshots[:-1]):
            off_op[i + 1] = off_op[i] + len(s.x_op)
            off_ma[i + 1] = off_ma[i] + len(s.x_machine)
            off_cb[i + 1] = off_cb[i] + len(s.x_comb)
            off_jb[i + 1] = off_jb[i] + len(s.x_job)

        def graph_index(counts: list[int]) -> np.ndarray:
            return np.repeat(np.arange(n, dtype=np.int64), counts)

        g_op = graph_index([len(s.x_op) for s in snapshots])
        g_ma = graph_index([len(s.x_machine) for s in snapshots])
        g_cb = graph_index([len(s.x_comb) for s in snapshots])
        g_jb = graph_index([len(s.x_job) for s in snapshots])

        def edges(attr: str, src_off: np.ndarray, dst_off: np.ndarray) -> np.ndarray:
            parts = []
            for i, s in enumerate(snapshots):
                e = getattr(s, attr)
                if len(e):
                    parts.append(e + np.array([[src_off[i], dst_off[i]]]))
            if not parts:
                return np.zeros((0, 2), dtype=np.int64)
            return np.concatenate(parts, axis=0)

        op_op = edges("op_op", off_op, off_op)
        op_ma = edges("op_machine", off_op, off_ma)
        op_cb = edges("op_comb", off_op, off_cb)
        cb_jb = edges("comb_job", off_cb, off_jb)
        om_t = (np.concatenate([s.op_machine_t for s in snapshots])
                if any(len(s.op_machine_t) for s in snapshots)
                else np.zeros(0, dtype=np.float32))

        slot_offset = np.zeros(n, dtype=np.int64)
        slot_count = np.zeros(n, dtype=np.int64)
        slot_graph_parts: list[np.ndarray] = []
        pair_slot, pair_rows, pair_graph = [], [], []
        wait_slot, wait_graph = [], []
        future_rows, future_graph = [], []
        next_slot = 0
        for i, s in enumerate(snapshots):
            p = len(s.mask_pairs)
            count = p + (1 if s.wait_allowed else 0)
            slot_offset[i], slot_count[i] = next_slot, count
            slot_graph_parts.append(np.full(count, i, dtype=np.int64))
            if p:
                pair_slot.append(np.arange(next_slot, next_slot + p, dtype=np.int64))
                pair_rows.append(s.pair_rows
                                 + np.array([[off_op[i], off_ma[i], off_jb[i]]]))
                pair_graph.append(np.full(p, i, dtype=np.int64))
            if s.wait_allowed:
                wait_slot.append(next_slot + p)
                wait_graph.append(i)
            if len(s.future_rows):
                future_rows.append(s.future_rows
                                   + np.array([[off_op[i], off_ma[i], off_jb[i]]]))
                future_graph.append(np.full(len(s.future_rows), i, dtype=np.int64))
            next_slot += count

        def cat2(parts: list[np.ndarray]) -> np.ndarray:
            return (np.concatenate(parts, axis=0) if parts
                    else np.zeros((0, 3), dtype=np.int64))

        pair = cat2(pair_rows)
        future = cat2(future_rows)
        t = torch.as_tensor
        return cls(
            n_graphs=n,
            x_op=t(_cat_rows([s.x_op for s in snapshots], OP_DIM),
                   dtype=dtype, device=device),
            x_machine=t(_cat_rows([s.x_machine for s in snapshots], MACHINE_DIM),
                        dtype=dtype, device=device),
            x_comb=t(_cat_rows([s.x_comb for s in snapshots], COMBINATION_DIM),
                     dtype=dtype, device=device),
            x_job=t(_cat_rows([s.x_job for s in snapshots], JOB_DIM),
                    dtype=dtype, device=device),
            g_op=t(g_op, device=device), g_machine=t(g_ma, device=device),
            g_comb=t(g_cb, device=device), g_job=t(g_jb, device=device),
            op_op=t(op_op, device=device),
            op_machine=t(op_ma, device=device),
            op_machine_t=t(np.asarray(om_t, dtype=np.float32),
                           dtype=dtype, device=device),
            op_comb=t(op_cb, device=device),
            comb_job=t(cb_jb, device=device),
            slot_graph=t(np.concatenate(slot_graph_parts)
                         if slot_graph_parts else np.zeros(0, np.int64),
                         device=device),
            slot_offset=slot_offset, slot_count=slot_count,
            pair_slot=t(np.concatenate(pair_slot)
                        if pair_slot else np.zeros(0, np.int64), device=device),
            pair_op=t(pair[:, 0], device=device),
            pair_machine=t(pair[:, 1], device=device),
            pair_job=t(pair[:, 2], device=device),
            pair_graph=t(np.concatenate(pair_graph)
                         if pair_graph else np.zeros(0, np.int64), device=device),
            wait_slot=t(np.asarray(wait_slot, dtype=np.int64), device=device),
            wait_graph=t(np.asarray(wait_graph, dtype=np.int64), device=device),
            future_op=t(future[:, 0], device=device),
            future_machine=t(future[:, 1], device=device),
            future_job=t(future[:, 2], device=device),
            future_graph=t(np.concatenate(future_graph)
                           if future_graph else np.zeros(0, np.int64),
                           device=device),
        )
