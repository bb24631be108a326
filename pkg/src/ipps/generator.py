"""Synthetic instance generator.

Each job is grown in four steps: a main chain of operations between the
start and end supernodes; OR-connector groups spliced onto existing AND
edges (the original edge is dropped and >= 2 alternative branches are
inserted, merging at the edge's destination — behind a fresh zero-time
join supernode when the destination already merges other paths); optional
parallel AND paths inside branches; machine options and integer processing
times drawn per operation.  Nesting arises naturally because later groups
may splice edges inside earlier branches.

Randomness is a named portable stream: job ``j`` of an instance seeded
``s`` always draws from ``numpy.random.default_rng([s, _JOB_SALT, j])``,
retries included, so output is byte-for-byte reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .combinations import COMBINATION_CAP, enumerate_combinations
from .errors import CombinationExplosionError, GenerationError
from .model import Edge, EdgeKind, InstanceSpec, JobGraph, Operation, OpKind, validate_instance

__all__ = ["GenConfig", "generate_job", "generate_instance"]

_JOB_SALT = 7919


@dataclass(frozen=True)
class GenConfig:
    """Knobs for one job's structure and assignment."""

    main_ops: tuple[int, int] = (3, 6)
    or_groups: tuple[int, int] = (1, 3)
    branches_per_group: tuple[int, int] = (2, 3)
    branch_ops: tuple[int, int] = (1, 3)
    and_path_prob: float = 0.3
    and_path_ops: tuple[int, int] = (1, 2)
    machine_prob: float = 0.3
    time_range: tuple[int, int] = (1, 99)
    min_regular_ops: int | None = None
    max_regular_ops: int | None = None
    max_combinations: int = COMBINATION_CAP
    retry_budget: int = 100

    def __post_init__(self):
        for name in ("main_ops", "or_groups", "branches_per_group", "branch_ops",
                     "and_path_ops", "time_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name}: bad range ({lo}, {hi})")
        if self.branches_per_group[0] < 2:
            raise ValueError("a connector needs >= 2 alternative branches")
        if self.branch_ops[0] < 1:
            raise ValueError("every branch needs >= 1 operation")
        if self.time_range[0] < 1:
            raise ValueError("processing times must be >= 1")


def _randint(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    lo, hi = bounds
    return int(rng.integers(lo, hi + 1))


class _JobDraft:
    """Mutable job under construction."""

    def __init__(self, job_id: int):
        self.job_id = job_id
        self.kinds: dict[int, OpKind] = {0: OpKind.START}
        self.edges: list[tuple[int, int, EdgeKind]] = []
        self.next_id = 1

    def new_op(self, kind: OpKind = OpKind.OP) -> int:
        i = self.next_id
        self.next_id += 1
        self.kinds[i] = kind
        return i

    def link(self, src: int, dst: int, kind: EdgeKind = EdgeKind.AND) -> None:
        self.edges.append((src, dst, kind))

    def in_degree(self, node: int) -> int:
        return sum(1 for _s, d, _k in self.edges if d == node)

    def has_or_out(self, node: int) -> bool:
        return any(s == node and k is EdgeKind.OR for s, d, k in self.edges)

    def chain(self, n: int) -> list[int]:
        ids = [self.new_op() for _ in range(n)]
        for a, b in zip(ids, ids[1:]):
            self.link(a, b)
        return ids


def _insert_or_group(draft: _JobDraft, edge_idx: int, config: GenConfig,
                     rng: np.random.Generator) -> None:
    src, dst, _kind = draft.edges.pop(edge_idx)
    # when the destination already merges other paths, the new branches meet
    # at a fresh zero-time supernode instead, keeping one join per connector
    if draft.in_degree(dst) >= 1:
        join = draft.new_op(OpKind.JOIN)
        draft.link(join, dst)
    else:
        join = dst
    for _ in range(_randint(rng, config.branches_per_group)):
        ops = draft.chain(_randint(rng, config.branch_ops))
        draft.link(src, ops[0], EdgeKind.OR)
        draft.link(ops[-1], join)
        # optional parallel AND path across one edge of this branch
        if rng.random() < config.and_path_prob:
            segment = ops + [join]
            i = int(rng.integers(len(segment) - 1))
            u, v = segment[i], segment[i + 1]
            par = draft.chain(_randint(rng, config.and_path_ops))
            draft.link(u, par[0])
            draft.link(par[-1], v)


def _draft_structure(job_id: int, config: GenConfig, rng: np.random.Generator) -> _JobDraft:
    draft = _JobDraft(job_id)
    main = draft.chain(_randint(rng, config.main_ops))
    end = draft.new_op(OpKind.END)
    draft.link(0, main[0])
    draft.link(main[-1], end)
    for _ in range(_randint(rng, config.or_groups)):
        eligible = [
            i for i, (s, _d, k) in enumerate(draft.edges)
            if k is EdgeKind.AND and not draft.has_or_out(s)
        ]
        if not eligible:
            break
        _insert_or_group(draft, int(rng.choice(eligible)), config, rng)
    return draft


def _assign_machines(draft: _JobDraft, machine_count: int, config: GenConfig,
                     rng: np.random.Generator) -> tuple[Operation, ...]:
    ops = []
    for op_id in sorted(draft.kinds):
        kind = draft.kinds[op_id]
        if kind is not OpKind.OP:
            ops.append(Operation(draft.job_id, op_id, kind))
            continue
        picks = [m for m in range(machine_count) if rng.random() < config.machine_prob]
        if not picks:
            picks = [int(rng.integers(machine_count))]
        options = tuple(
            (m, _randint(rng, config.time_range)) for m in picks
        )
        ops.append(Operation(draft.job_id, op_id, kind, options))
    return tuple(ops)


def generate_job(
    job_id: int,
    machine_count: int,
    config: GenConfig = GenConfig(),
    rng: np.random.Generator | int = 0,
) -> JobGraph:
    """One job; retries (within the same stream) until constraints hold."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    for _attempt in range(config.retry_budget):
        draft = _draft_structure(job_id, config, rng)
        n_regular = sum(1 for k in draft.kinds.values() if k is OpKind.OP)
        if config.max_regular_ops is not None and n_regular > config.max_regular_ops:
            continue
        if config.min_regular_ops is not None and n_regular < config.min_regular_ops:
            continue
        ops = _assign_machines(draft, machine_count, config, rng)
        job = JobGraph(job_id, ops, tuple(Edge(s, d, k) for s, d, k in draft.edges))
        try:
            enumerate_combinations(job, cap=config.max_combinations)
        except CombinationExplosionError:
            continue
        return job
    raise GenerationError(
        f"job {job_id}: no draft satisfied the constraints in "
        f"{config.retry_budget} attempts"
    )


def generate_instance(
    job_count: int,
    machine_count: int,
    config: GenConfig = GenConfig(),
    seed: int = 0,
    name: str = "",
) -> InstanceSpec:
    """A full instance; per-job streams are derived from the seed."""
    if job_count < 1 or machine_count < 1:
        raise ValueError("need >= 1 job and >= 1 machine")
    jobs = tuple(
        generate_job(j, machine_count, config, np.random.default_rng([seed, _JOB_SALT, j]))
        for j in range(job_count)
    )
    spec = InstanceSpec(
        machine_count=machine_count,
        jobs=jobs,
        name=name or f"gen-{job_count}x{machine_count}-s{seed}",
        time_scale=1,
    )
    validate_instance(spec)
    return spec
