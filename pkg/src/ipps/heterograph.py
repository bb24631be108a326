"""Heterogeneous residual-graph view of a scheduling state.

Four node types — operations, machines, combinations, jobs — connected by
prerequisite (op→op), membership (op↔combination), ownership
(combination↔job), and capability (op↔machine, carrying the processing
time) edges.  The graph is residual: completed and pruned operations are
absent, dead combinations are absent, finished jobs are absent, and
machines no incident operation can use are absent, so node counts only
shrink over an episode.

An op→op edge runs from each live *gating* predecessor: the immediate
predecessors of the residual structure, read through supernodes (which
never execute).  Completed predecessors have left the graph, so the
remaining in-edges are exactly the outstanding gates, and the
"number of prerequisites" feature is that in-degree.

All time-valued features are in instance time units (floats), raw and
unnormalized.  Eligible pairs and the waiting flag mirror the action
space; future pairs are the pre-feasible × capable pairs not currently
eligible.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .env import EstimateConfig, OpStatus, SchedulingEnv
from .model import OpKind

__all__ = ["OP_FEATURES", "MACHINE_FEATURES", "COMBINATION_FEATURES",
           "JOB_FEATURES", "GraphSnapshot", "encode"]

# feature vector layouts (order is part of the format)
OP_FEATURES = (
    "prerequisite_count",
    "scheduled",
    "feasible",
    "waiting_time",
    "remaining_time",
)
MACHINE_FEATURES = (
    "neighbor_ops",
    "idle_at",
    "utilization",
    "working",
    "idle_time",
    "remaining_time",
)
COMBINATION_FEATURES = ("estimated_completion", "ratio_to_job_min")
JOB_FEATURES = ("ratio_to_max_job",)


@dataclass(frozen=True)
class GraphSnapshot:
    """One encoded state; ids are raw, edges are row indices."""

    clock: float
    done: bool
    reward: float | None
    op_ids: tuple[tuple[int, int], ...]
    op_features: tuple[tuple[float, ...], ...]
    machine_ids: tuple[int, ...]
    machine_features: tuple[tuple[float, ...], ...]
    combination_ids: tuple[tuple[int, int], ...]
    combination_features: tuple[tuple[float, ...], ...]
    job_ids: tuple[int, ...]
    job_features: tuple[tuple[float, ...], ...]
    op_op_edges: tuple[tuple[int, int], ...]
    op_combination_edges: tuple[tuple[int, int], ...]
    combination_job_edges: tuple[tuple[int, int], ...]
    op_machine_edges: tuple[tuple[int, int, float], ...]
    mask_pairs: tuple[tuple[int, int, int], ...]
    wait_allowed: bool
    future_pairs: tuple[tuple[int, int, int], ...]

    @property
    def node_counts(self) -> dict[str, int]:
        return {
            "op": len(self.op_ids),
            "machine": len(self.machine_ids),
            "combination": len(self.combination_ids),
            "job": len(self.job_ids),
        }

    def to_json(self) -> dict:
        return {
            "clock": self.clock,
            "done": self.done,
            "reward": self.reward,
            "ops": {"ids": [list(r) for r in self.op_ids],
                    "features": [list(f) for f in self.op_features]},
            "machines": {"ids": list(self.machine_ids),
                         "features": [list(f) for f in self.machine_features]},
            "combinations": {"ids": [list(r) for r in self.combination_ids],
                             "features": [list(f) for f in self.combination_features]},
            "jobs": {"ids": list(self.job_ids),
                     "features": [list(f) for f in self.job_features]},
            "edges": {
                "op_op": [list(e) for e in self.op_op_edges],
                "op_combination": [list(e) for e in self.op_combination_edges],
                "combination_job": [list(e) for e in self.combination_job_edges],
                "op_machine": [list(e) for e in self.op_machine_edges],
            },
            "mask": {"pairs": [list(p) for p in self.mask_pairs],
                     "wait": self.wait_allowed},
            "future_pairs": [list(p) for p in self.future_pairs],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GraphSnapshot":
        edges = data["edges"]
        return cls(
            clock=float(data["clock"]),
            done=bool(data["done"]),
            reward=None if data.get("reward") is None else float(data["reward"]),
            op_ids=tuple((int(a), int(b)) for a, b in data["ops"]["ids"]),
            op_features=tuple(tuple(map(float, f)) for f in data["ops"]["features"]),
            machine_ids=tuple(int(m) for m in data["machines"]["ids"]),
            machine_features=tuple(tuple(map(float, f)) for f in data["machines"]["features"]),
            combination_ids=tuple((int(a), int(b)) for a, b in data["combinations"]["ids"]),
            combination_features=tuple(tuple(map(float, f)) for f in data["combinations"]["features"]),
            job_ids=tuple(int(j) for j in data["jobs"]["ids"]),
            job_features=tuple(tuple(map(float, f)) for f in data["jobs"]["features"]),
            op_op_edges=tuple((int(a), int(b)) for a, b in edges["op_op"]),
            op_combination_edges=tuple((int(a), int(b)) for a, b in edges["op_combination"]),
            combination_job_edges=tuple((int(a), int(b)) for a, b in edges["combination_job"]),
            op_machine_edges=tuple((int(a), int(b), float(t)) for a, b, t in edges["op_machine"]),
            mask_pairs=tuple((int(a), int(b), int(c)) for a, b, c in data["mask"]["pairs"]),
            wait_allowed=bool(data["mask"]["wait"]),
            future_pairs=tuple((int(a), int(b), int(c)) for a, b, c in data["future_pairs"]),
        )


def _gating_preds(env: SchedulingEnv, job_id: int, op_id: int,
                  live: set[tuple[int, int]]) -> set[tuple[int, int]]:
    """Live regular predecessors reached through supernodes only."""
    job = env.spec.job(job_id)
    out: set[tuple[int, int]] = set()
    stack = [e.src for e in job.preds(op_id)]
    seen: set[int] = set()
    while stack:
        p = stack.pop()
        if p in seen:
            continue
        seen.add(p)
        ref = (job_id, p)
        if env.status[ref] in (OpStatus.DONE, OpStatus.PRUNED):
            continue
        if job.op(p).kind is OpKind.OP:
            if ref in live:
                out.add(ref)
            continue
        stack.extend(e.src for e in job.preds(p))
    return out


def encode(
    env: SchedulingEnv,
    estimate: EstimateConfig | None = None,
    reward: float | None = None,
) -> GraphSnapshot:
    """Snapshot the current state of a live environment."""
    estimate = estimate or EstimateConfig(op_agg="mean", job_agg="mean")
    spec = env.spec
    unit = spec.time_scale

    def units(grains) -> float:
        if isinstance(grains, Fraction):
            return float(grains / unit)
        return grains / unit

    live_jobs = [j for j in spec.job_ids if j not in env.finished_jobs]
    live_ops = [
        ref for ref, st in sorted(env.status.items())
        if st in (OpStatus.UNSCHEDULED, OpStatus.IN_PROGRESS)
        and env._ops[ref].kind is OpKind.OP
    ]
    live_set = set(live_ops)
    op_index = {ref: i for i, ref in enumerate(live_ops)}

    in_progress_end = {
        (j, pair[0]): pair[1] for j, pair in env.job_op.items() if pair is not None
    }
    pre_feasible = set(env.pre_feasible_ops())

    op_op = []
    prereq_count = dict.fromkeys(live_ops, 0)
    for ref in live_ops:
        for src in sorted(_gating_preds(env, ref[0], ref[1], live_set)):
            op_op.append((op_index[src], op_index[ref]))
            prereq_count[ref] += 1

    op_feat = []
    for ref in live_ops:
        scheduled = env.status[ref] is OpStatus.IN_PROGRESS
        feasible = ref in pre_feasible
        waiting = env.clock - env.pre_feasible_at[ref] if feasible else 0
        remaining = in_progress_end[ref] - env.clock if scheduled else 0
        op_feat.append((
            float(prereq_count[ref]),
            1.0 if scheduled else 0.0,
            1.0 if feasible else 0.0,
            units(waiting),
            units(remaining),
        ))

    op_mach = []
    machine_neighbors: dict[int, int] = {}
    for ref in live_ops:
        for m, t in env._ops[ref].machines:
            machine_neighbors[m] = machine_neighbors.get(m, 0) + 1
            op_mach.append((ref, m, t))
    machine_ids = tuple(sorted(machine_neighbors))
    machine_index = {m: i for i, m in enumerate(machine_ids)}
    op_machine_edges = tuple(
        (op_index[ref], machine_index[m], units(t)) for ref, m, t in op_mach
    )
    machine_feat = tuple(
        (
            float(machine_neighbors[m]),
            units(env.machine_idle_at(m)),
            float(env.machine_utilization(m)),
            1.0 if env.machine_op[m] is not None else 0.0,
            units(env.machine_idle_time(m)),
            units(env.machine_remaining(m)),
        )
        for m in machine_ids
    )

    comb_ids: list[tuple[int, int]] = []
    comb_feat: list[tuple[float, float]] = []
    op_comb = []
    comb_job = []
    job_index = {j: i for i, j in enumerate(live_jobs)}
    for j in live_jobs:
        by_index = {c.index: c for c in env.combos[j]}
        ests = {
            h: env.estimate_combination(j, h, estimate.op_agg)
            for h in sorted(env.surviving[j])
        }
        floor = min(ests.values())
        for h, est in ests.items():
            ci = len(comb_ids)
            comb_ids.append((j, h))
            comb_feat.append((units(est), float(Fraction(est) / floor) if floor else 0.0))
            comb_job.append((ci, job_index[j]))
            for op_id in sorted(by_index[h].regular_ops):
                if (j, op_id) in live_set:
                    op_comb.append((op_index[(j, op_id)], ci))

    job_ests = {j: env.estimate_job(j, estimate) for j in live_jobs}
    top = max(job_ests.values(), default=0)
    job_feat = tuple(
        (float(Fraction(job_ests[j]) / top) if top else 0.0,) for j in live_jobs
    )

    space = env.action_space()
    mask_pairs = tuple((a.job_id, a.op_id, a.machine) for a in space.pairs)
    masked = set(mask_pairs)
    future = tuple(
        (j, o, m)
        for (j, o) in sorted(pre_feasible)
        for m in env._ops[(j, o)].machine_ids
        if (j, o, m) not in masked
    )

    return GraphSnapshot(
        clock=units(env.clock),
        done=env.done,
        reward=reward,
        op_ids=tuple(live_ops),
        op_features=tuple(op_feat),
        machine_ids=machine_ids,
        machine_features=machine_feat,
        combination_ids=tuple(comb_ids),
        combination_features=tuple(comb_feat),
        job_ids=tuple(live_jobs),
        job_features=job_feat,
        op_op_edges=tuple(op_op),
        op_combination_edges=tuple(op_comb),
        combination_job_edges=tuple(comb_job),
        op_machine_edges=op_machine_edges,
        mask_pairs=mask_pairs,
        wait_allowed=space.wait,
        future_pairs=future,
    )
