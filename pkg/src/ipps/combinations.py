"""Routing combinations: the operation sets induced by OR-branch choices.

Fixing one outgoing branch per reachable OR-connector of a job yields the
set of operations actually executed for that routing.  Distinct choice
assignments can induce the same operation set; combinations are
deduplicated by set, so the combinations of a job are pairwise
incomparable under set inclusion.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CombinationExplosionError
from .model import InstanceSpec, JobGraph, OpKind

__all__ = [
    "Combination",
    "COMBINATION_CAP",
    "enumerate_combinations",
    "enumerate_all",
    "combination_min_work",
    "job_min_work",
    "instance_lower_bound",
    "surviving_after",
    "regular_preds_within",
]

COMBINATION_CAP = 10_000
_WORK_CAP = 200_000  # guard on raw choice assignments explored


@dataclass(frozen=True)
class Combination:
    """One routing of a job.

    ``ops`` includes supernodes; ``regular_ops`` is the schedulable subset.
    ``choices`` records one witness assignment (connector -> branch head)
    that induces this op set.
    """

    job_id: int
    index: int
    ops: frozenset[int]
    regular_ops: frozenset[int]
    choices: tuple[tuple[int, int], ...]


def enumerate_combinations(job: JobGraph, cap: int = COMBINATION_CAP) -> tuple[Combination, ...]:
    """All distinct routings of a job, in deterministic order.

    Raises :class:`CombinationExplosionError` beyond ``cap`` distinct
    combinations (or a fixed multiple of raw assignments explored).
    """
    labels = job.region_labels()
    connectors = [c for c in job.topo_order() if job.or_heads(c)]
    regular = {o.op_id for o in job.regular_ops}

    seen: dict[frozenset[int], tuple[tuple[int, int], ...]] = {}
    order: list[frozenset[int]] = []
    explored = 0

    def member_ops(assignment: dict[int, int]) -> frozenset[int]:
        return frozenset(
            v for v, lab in labels.items()
            if all(assignment.get(c) == h for c, h in lab)
        )

    def active_unassigned(assignment: dict[int, int]) -> int | None:
        for c in connectors:
            if c in assignment:
                continue
            if all(assignment.get(cc) == hh for cc, hh in labels[c]):
                return c  # reachable under current choices
        return None

    def rec(assignment: dict[int, int]) -> None:
        nonlocal explored
        c = active_unassigned(assignment)
        if c is None:
            explored += 1
            if explored > _WORK_CAP:
                raise CombinationExplosionError(job.job_id, cap)
            ops = member_ops(assignment)
            if ops not in seen:
                if len(seen) >= cap:
                    raise CombinationExplosionError(job.job_id, cap)
                seen[ops] = tuple(sorted(assignment.items()))
                order.append(ops)
            return
        for head in job.or_heads(c):
            assignment[c] = head
            rec(assignment)
            del assignment[c]

    rec({})
    return tuple(
        Combination(job.job_id, i, ops, ops & regular, seen[ops])
        for i, ops in enumerate(order)
    )


def enumerate_all(spec: InstanceSpec, cap: int = COMBINATION_CAP) -> dict[int, tuple[Combination, ...]]:
    return {job.job_id: enumerate_combinations(job, cap) for job in spec.jobs}


def combination_min_work(job: JobGraph, comb: Combination) -> int:
    """Sum of min-machine times over the combination's regular ops (grains)."""
    return sum(job.op(o).min_time for o in comb.regular_ops)


def job_min_work(job: JobGraph, combs: tuple[Combination, ...] | None = None) -> int:
    """Least total work over all routings of the job (a makespan lower bound)."""
    combs = combs if combs is not None else enumerate_combinations(job)
    if not combs:
        return 0
    return min(combination_min_work(job, c) for c in combs)


def instance_lower_bound(spec: InstanceSpec) -> int:
    """max over jobs of the job's least total work (grains).

    Every job must fully process some routing on machines no faster than
    each op's best option, so no schedule finishes before this value.
    """
    if not spec.jobs:
        return 0
    return max(job_min_work(j) for j in spec.jobs)


def surviving_after(combs: tuple[Combination, ...], scheduled_ops: set[int]) -> set[int]:
    """Indices of combinations consistent with the ops scheduled so far."""
    return {c.index for c in combs if scheduled_ops <= c.ops}


def regular_preds_within(job: JobGraph, comb: Combination) -> dict[int, frozenset[int]]:
    """Immediate regular predecessors inside a combination, supernodes contracted.

    For each regular op of the combination, the regular ops that gate it:
    direct predecessors within the combination, looking through zero-time
    supernodes.
    """
    out: dict[int, frozenset[int]] = {}
    for o in comb.regular_ops:
        acc: set[int] = set()
        stack = [e.src for e in job.preds(o) if e.src in comb.ops]
        while stack:
            p = stack.pop()
            if job.op(p).kind is OpKind.OP:
                acc.add(p)
            else:
                stack.extend(e.src for e in job.preds(p) if e.src in comb.ops)
        out[o] = frozenset(acc)
    return out
