"""Decode wire-protocol state payloads into typed arrays.

The server's ``state`` message carries a heterogeneous graph: four node
types (ops, machines, combinations, jobs) with fixed-width feature rows,
four edge lists whose entries are row indices into those node arrays
(``op_machine`` edges carry the processing time), an action mask of
``(job, op, machine)`` id triples plus a waiting flag, and the not yet
eligible ``future_pairs``.  This module turns one payload into a
:class:`Snapshot` of numpy arrays with the mask and future triples
resolved to node rows, validating everything it touches.

Time-valued features arrive raw, in instance time units.  With
``normalize=True`` the decoder rescales them by the snapshot's mean
processing time so the policy sees the same magnitudes on every instance
family: durations are divided by the scale, and clock-anchored columns
(machine ``idle_at``, combination ``estimated_completion``) are first
recentered at the current clock.  Counts, flags, and ratio features pass
through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SnapshotError

__all__ = [
    "OP_DIM", "MACHINE_DIM", "COMBINATION_DIM", "JOB_DIM",
    "Snapshot", "decode_state", "parse_hello",
]

# feature widths of the wire format, schema 1
OP_DIM = 5
MACHINE_DIM = 6
COMBINATION_DIM = 2
JOB_DIM = 1

# column indices of time-valued features (see the wire format docs)
_OP_WAITING, _OP_REMAINING = 3, 4
_MA_IDLE_AT, _MA_IDLE_TIME, _MA_REMAINING = 1, 4, 5
_CB_ESTIMATED = 0


@dataclass(frozen=True)
class Hello:
    """The per-episode handshake: which instance the server is playing."""

    episode: int
    name: str
    machines: int
    jobs: int
    regular_ops: int


@dataclass(frozen=True)
class Snapshot:
    """One decoded state: node features, edges, and the action space.

    Edge arrays hold row indices; ``pair_rows`` / ``future_rows`` map each
    ``(job, op, machine)`` triple of the mask / future set to its
    ``(op_row, machine_row, job_row)``.  ``scale`` is the normalization
    divisor that was applied (1.0 when normalization is off).
    """

    seq: int
    clock: float
    done: bool
    reward: float | None
    x_op: np.ndarray          # [n_op, 5] float32
    x_machine: np.ndarray     # [n_machine, 6] float32
    x_comb: np.ndarray        # [n_comb, 2] float32
    x_job: np.ndarray         # [n_job, 1] float32
    op_op: np.ndarray         # [e1, 2] int64 (pred_row, succ_row)
    op_machine: np.ndarray    # [e2, 2] int64 (op_row, machine_row)
    op_machine_t: np.ndarray  # [e2] float32 processing times (scaled)
    op_comb: np.ndarray       # [e3, 2] int64 (op_row, comb_row)
    comb_job: np.ndarray      # [e4, 2] int64 (comb_row, job_row)
    mask_pairs: tuple[tuple[int, int, int], ...]
    pair_rows: np.ndarray     # [n_pairs, 3] int64 (op_row, machine_row, job_row)
    wait_allowed: bool
    future_pairs: tuple[tuple[int, int, int], ...]
    future_rows: np.ndarray   # [n_future, 3] int64
    scale: float

    @property
    def n_actions(self) -> int:
        """Size of the action space: eligible pairs plus waiting."""
        return len(self.mask_pairs) + (1 if self.wait_allowed else 0)

    @property
    def node_counts(self) -> dict[str, int]:
        return {
            "op": len(self.x_op),
            "machine": len(self.x_machine),
            "combination": len(self.x_comb),
            "job": len(self.x_job),
        }


def parse_hello(msg: dict) -> Hello:
    """Validate and unpack a ``hello`` message."""
    try:
        if msg["type"] != "hello":
            raise SnapshotError(f"expected hello, got {msg['type']!r}")
        if msg["schema"] != 1:
            raise SnapshotError(f"unsupported schema {msg['schema']!r}")
        inst = msg["instance"]
        return Hello(
            episode=int(msg["episode"]),
            name=str(inst["name"]),
            machines=int(inst["machines"]),
            jobs=int(inst["jobs"]),
            regular_ops=int(inst["regular_ops"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SnapshotError):
            raise
        raise SnapshotError(f"malformed hello: {exc!r}") from exc


def _features(block: dict, width: int, what: str) -> np.ndarray:
    rows = block.get("features")
    if rows is None:
        raise SnapshotError(f"{what}: missing features")
    if len(rows) != len(block.get("ids", ())):
        raise SnapshotError(
            f"{what}: {len(block['ids'])} ids but {len(rows)} feature rows"
        )
    try:
        arr = np.asarray(rows, dtype=np.float32)
    except ValueError as exc:
        raise SnapshotError(f"{what}: ragged or non-numeric features") from exc
    if arr.size == 0:
        return np.zeros((0, width), dtype=np.float32)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise SnapshotError(
            f"{what}: expected {width}-wide feature rows, got shape {arr.shape}"
        )
    return arr


def _edge_array(rows, n_src: int, n_dst: int, what: str) -> np.ndarray:
    if not rows:
        return np.zeros((0, 2), dtype=np.int64)
    arr = np.asarray(rows, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise SnapshotError(f"{what}: entries must be [src_row, dst_row]")
    if arr.size and (
        arr[:, 0].min() < 0 or arr[:, 0].max() >= n_src
        or arr[:, 1].min() < 0 or arr[:, 1].max() >= n_dst
    ):
        raise SnapshotError(
            f"{what}: row index out of range ({n_src} src rows, {n_dst} dst rows)"
        )
    return arr


def _resolve_pairs(
    triples,
    op_row: dict[tuple[int, int], int],
    machine_row: dict[int, int],
    job_row: dict[int, int],
    what: str,
) -> tuple[tuple[tuple[int, int, int], ...], np.ndarray]:
    out_ids: list[tuple[int, int, int]] = []
    rows = np.zeros((len(triples), 3), dtype=np.int64)
    for i, entry in enumerate(triples):
        if len(entry) != 3:
            raise SnapshotError(f"{what}[{i}]: need [job, op, machine]")
        j, o, m = (int(v) for v in entry)
        try:
            rows[i, 0] = op_row[(j, o)]
            rows[i, 1] = machine_row[m]
            rows[i, 2] = job_row[j]
        except KeyError as exc:
            raise SnapshotError(
                f"{what}[{i}]: pair ({j}, {o}, {m}) references unknown node {exc}"
            ) from exc
        out_ids.append((j, o, m))
    return tuple(out_ids), rows


def decode_state(msg: dict, *, normalize: bool = True) -> Snapshot:
    """Decode one ``state`` message; raises :class:`SnapshotError` on
    anything that does not match the wire format."""
    if msg.get("type") != "state":
        raise SnapshotError(f"expected state, got {msg.get('type')!r}")
    try:
        seq = int(msg["seq"])
        clock = float(msg["clock"])
        done = bool(msg["done"])
        reward = msg["reward"]
        ops, machines = msg["ops"], msg["machines"]
        combinations, jobs = msg["combinations"], msg["jobs"]
        edges, mask = msg["edges"], msg["mask"]
        future = msg["future_pairs"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"malformed state: {exc!r}") from exc
    reward = None if reward is None else float(reward)

    x_op = _features(ops, OP_DIM, "ops")
    x_machine = _features(machines, MACHINE_DIM, "machines")
    x_comb = _features(combinations, COMBINATION_DIM, "combinations")
    x_job = _features(jobs, JOB_DIM, "jobs")
    n_op, n_ma = len(x_op), len(x_machine)
    n_cb, n_jb = len(x_comb), len(x_job)

    try:
        op_row = {(int(j), int(o)): i for i, (j, o) in enumerate(ops["ids"])}
        machine_row = {int(m): i for i, m in enumerate(machines["ids"])}
        job_row = {int(j): i for i, j in enumerate(jobs["ids"])}
    except (TypeError, ValueError) as exc:
        raise SnapshotError(f"malformed node ids: {exc!r}") from exc

    op_op = _edge_array(edges.get("op_op"), n_op, n_op, "edges.op_op")
    op_comb = _edge_array(edges.get("op_combination"), n_op, n_cb,
                          "edges.op_combination")
    comb_job = _edge_array(edges.get("combination_job"), n_cb, n_jb,
                           "edges.combination_job")
    om_rows = edges.get("op_machine") or []
    om = np.zeros((len(om_rows), 2), dtype=np.int64)
    om_t = np.zeros(len(om_rows), dtype=np.float32)
    for i, entry in enumerate(om_rows):
        if len(entry) != 3:
            raise SnapshotError(f"edges.op_machine[{i}]: need [op, machine, time]")
        om[i, 0], om[i, 1], om_t[i] = int(entry[0]), int(entry[1]), float(entry[2])
    if len(om) and (
        om[:, 0].min() < 0 or om[:, 0].max() >= n_op
        or om[:, 1].min() < 0 or om[:, 1].max() >= n_ma
    ):
        raise SnapshotError("edges.op_machine: row index out of range")

    mask_pairs, pair_rows = _resolve_pairs(
        mask.get("pairs", ()), op_row, machine_row, job_row, "mask.pairs")
    future_pairs, future_rows = _resolve_pairs(
        future, op_row, machine_row, job_row, "future_pairs")

    scale = 1.0
    if normalize:
        scale = float(om_t.mean()) if len(om_t) else 1.0
        if not np.isfinite(scale) or scale <= 0:
            scale = 1.0
        x_op = x_op.copy()
        x_op[:, _OP_WAITING] /= scale
        x_op[:, _OP_REMAINING] /= scale
        x_machine = x_machine.copy()
        x_machine[:, _MA_IDLE_AT] = (x_machine[:, _MA_IDLE_AT] - clock) / scale
        x_machine[:, _MA_IDLE_TIME] /= scale
        x_machine[:, _MA_REMAINING] /= scale
        x_comb = x_comb.copy()
        x_comb[:, _CB_ESTIMATED] = (x_comb[:, _CB_ESTIMATED] - clock) / scale
        om_t = om_t / scale

    return Snapshot(
        seq=seq, clock=clock, done=done, reward=reward,
        x_op=x_op, x_machine=x_machine, x_comb=x_comb, x_job=x_job,
        op_op=op_op, op_machine=om, op_machine_t=om_t,
        op_comb=op_comb, comb_job=comb_job,
        mask_pairs=mask_pairs, pair_rows=pair_rows,
        wait_allowed=bool(mask.get("wait", False)),
        future_pairs=future_pairs, future_rows=future_rows,
        scale=scale,
    )
