"""Greedy dispatching baselines.

List scheduling over a fixed routing: each repeat first picks one
combination per job uniformly at random, then builds a schedule by
repeatedly taking the set of ready operations that can start earliest
(ties resolved by an operation rule), assigning a machine (by a machine
rule, which may queue the operation on a busy machine), and committing
the start.  Jobs execute one operation at a time.

Operation rules: ``mwkr`` (most remaining work, optimistic machine
times), ``mor`` (most remaining operations), ``fifo`` (longest-ready
first), ``muhammad`` (probabilistic priority from banded remaining-work
ratios).  Machine rules: ``spt`` (shortest processing time), ``eet``
(earliest end time), ``lum`` (least utilized so far).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .combinations import Combination, enumerate_all, regular_preds_within
from .model import InstanceSpec
from .schedule import Schedule, ScheduleRecord

__all__ = [
    "OP_RULES",
    "MACHINE_RULES",
    "GreedyResult",
    "greedy_schedule",
    "run_greedy",
    "best_greedy",
]

OP_RULES = ("mwkr", "mor", "fifo", "muhammad")
MACHINE_RULES = ("spt", "eet", "lum")

_REPEAT_SALT = 104729

# remaining-work ratio bands -> priority class
_PRIORITY_BANDS = ((0.95, 5), (0.85, 4), (0.70, 3), (0.50, 2))


def _priority_class(ratio: float) -> int:
    for floor, cls in _PRIORITY_BANDS:
        if ratio >= floor:
            return cls
    return 1


@dataclass(frozen=True)
class GreedyResult:
    """Best repeat of one rule pairing."""

    op_rule: str
    machine_rule: str
    schedule: Schedule
    makespan: int
    combination_choice: dict[int, int]  # job id -> combination index
    makespans: tuple[int, ...]  # one per repeat, repeat order

    @property
    def mean_makespan(self) -> float:
        return sum(self.makespans) / len(self.makespans)


class _Dispatcher:
    """One list-scheduling pass over a fixed combination choice."""

    def __init__(self, spec: InstanceSpec, chosen: dict[int, Combination],
                 work_measure: str = "min"):
        if work_measure not in ("min", "mean"):
            raise ValueError(f"work_measure must be min|mean, got {work_measure!r}")
        self.spec = spec
        self.machine_free = dict.fromkeys(spec.machine_ids, 0)
        self.machine_load = dict.fromkeys(spec.machine_ids, 0)
        self.job_free = dict.fromkeys(chosen, 0)
        self.remaining_work: dict[int, float] = {}
        self.remaining_ops: dict[int, int] = {}
        self.pred_wait: dict[tuple[int, int], int] = {}
        self.succs: dict[tuple[int, int], list[tuple[int, int]]] = {}
        self.pred_end: dict[tuple[int, int], int] = {}
        self.ready: dict[tuple[int, int], int] = {}  # ref -> time all preds ended
        self.records: list[ScheduleRecord] = []
        self.times: dict[tuple[int, int], dict[int, int]] = {}
        self.work: dict[tuple[int, int], float] = {}
        for job_id, comb in chosen.items():
            job = spec.job(job_id)
            preds = regular_preds_within(job, comb)
            self.remaining_ops[job_id] = len(comb.regular_ops)
            for op_id in comb.regular_ops:
                ref = (job_id, op_id)
                op = job.op(op_id)
                self.times[ref] = dict(op.machines)
                if work_measure == "min":
                    self.work[ref] = op.min_time
                else:
                    self.work[ref] = sum(t for _m, t in op.machines) / len(op.machines)
                self.pred_wait[ref] = len(preds[op_id])
                self.pred_end[ref] = 0
                for p in preds[op_id]:
                    self.succs.setdefault((job_id, p), []).append(ref)
                if not preds[op_id]:
                    self.ready[ref] = 0
            self.remaining_work[job_id] = sum(
                self.work[(job_id, o)] for o in comb.regular_ops
            )
        # banded priorities from total machining time, fixed for the pass
        total = dict(self.remaining_work)
        top = max(total.values(), default=0)
        self.priority_class = {
            j: _priority_class(w / top) if top else 1 for j, w in total.items()
        }

    def start_bound(self, ref: tuple[int, int]) -> int:
        """Earliest start ignoring machine availability."""
        return max(self.pred_end[ref], self.job_free[ref[0]])

    def est(self, ref: tuple[int, int], machine: int) -> int:
        return max(self.start_bound(ref), self.machine_free[machine])

    def commit(self, ref: tuple[int, int], machine: int) -> None:
        job_id, op_id = ref
        start = self.est(ref, machine)
        end = start + self.times[ref][machine]
        self.records.append(ScheduleRecord(job_id, op_id, machine, start, end))
        self.machine_free[machine] = end
        self.machine_load[machine] += end - start
        self.job_free[job_id] = end
        self.remaining_work[job_id] -= self.work[ref]
        self.remaining_ops[job_id] -= 1
        del self.ready[ref]
        for succ in self.succs.get(ref, ()):
            self.pred_end[succ] = max(self.pred_end[succ], end)
            self.pred_wait[succ] -= 1
            if self.pred_wait[succ] == 0:
                self.ready[succ] = self.pred_end[succ]

    def candidates(self) -> tuple[int, list[tuple[int, int]]]:
        """Ready ops achieving the earliest achievable start."""
        machine_free = self.machine_free
        best: int | None = None
        cands: list[tuple[int, int]] = []
        for ref in self.ready:
            bound = max(self.pred_end[ref], self.job_free[ref[0]])
            t = min(max(bound, machine_free[m]) for m in self.times[ref])
            if best is None or t < best:
                best, cands = t, [ref]
            elif t == best:
                cands.append(ref)
        cands.sort()
        return best, cands


def _pick_op(
    dispatcher: _Dispatcher,
    cands: list[tuple[int, int]],
    rule: str,
    rng: np.random.Generator,
) -> tuple[int, int]:
    if len(cands) == 1:
        return cands[0]
    if rule == "mwkr":
        return max(cands, key=lambda r: (dispatcher.remaining_work[r[0]], (-r[0], -r[1])))
    if rule == "mor":
        return max(cands, key=lambda r: (dispatcher.remaining_ops[r[0]], (-r[0], -r[1])))
    if rule == "fifo":
        return min(cands, key=lambda r: (dispatcher.ready[r], r))
    if rule == "muhammad":
        jobs = sorted({r[0] for r in cands})
        classes = [dispatcher.priority_class[j] for j in jobs]
        total = sum(classes)
        probs = [c / total for c in classes]
        job = jobs[int(rng.choice(len(jobs), p=probs))]
        return min(r for r in cands if r[0] == job)
    raise ValueError(f"unknown operation rule: {rule!r}")


def _pick_machine(dispatcher: _Dispatcher, ref: tuple[int, int], rule: str) -> int:
    times = dispatcher.times[ref]
    if rule == "spt":
        return min(times, key=lambda m: (times[m], m))
    if rule == "eet":
        return min(times, key=lambda m: (dispatcher.est(ref, m) + times[m], m))
    if rule == "lum":
        return min(times, key=lambda m: (dispatcher.machine_load[m], m))
    raise ValueError(f"unknown machine rule: {rule!r}")


def greedy_schedule(
    spec: InstanceSpec,
    chosen: dict[int, Combination],
    op_rule: str = "mwkr",
    machine_rule: str = "spt",
    rng: np.random.Generator | int = 0,
    work_measure: str = "min",
) -> Schedule:
    """One dispatching pass for a fixed combination per job."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    dispatcher = _Dispatcher(spec, chosen, work_measure)
    while dispatcher.ready:
        _t, cands = dispatcher.candidates()
        ref = _pick_op(dispatcher, cands, op_rule, rng)
        machine = _pick_machine(dispatcher, ref, machine_rule)
        dispatcher.commit(ref, machine)
    return Schedule(dispatcher.records)


def run_greedy(
    spec: InstanceSpec,
    op_rule: str = "mwkr",
    machine_rule: str = "spt",
    repeats: int = 50,
    seed: int = 0,
    work_measure: str = "min",
) -> GreedyResult:
    """Best of ``repeats`` passes, each with fresh uniform routing choices."""
    all_combos = enumerate_all(spec)
    job_ids = spec.job_ids
    best_sched: Schedule | None = None
    best_choice: dict[int, int] = {}
    makespans: list[int] = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, _REPEAT_SALT, r])
        choice = {j: int(rng.integers(len(all_combos[j]))) for j in job_ids}
        chosen = {j: all_combos[j][i] for j, i in choice.items()}
        sched = greedy_schedule(spec, chosen, op_rule, machine_rule, rng, work_measure)
        makespans.append(sched.makespan)
        if best_sched is None or sched.makespan < best_sched.makespan:
            best_sched, best_choice = sched, choice
    return GreedyResult(
        op_rule, machine_rule, best_sched, best_sched.makespan,
        best_choice, tuple(makespans),
    )


def best_greedy(
    spec: InstanceSpec,
    repeats: int = 50,
    seed: int = 0,
    op_rules: tuple[str, ...] = OP_RULES,
    machine_rules: tuple[str, ...] = MACHINE_RULES,
    work_measure: str = "min",
) -> dict[tuple[str, str], GreedyResult]:
    """Every rule pairing; identical seeds so routing draws are shared."""
    return {
        (o, m): run_greedy(spec, o, m, repeats, seed, work_measure)
        for o in op_rules
        for m in machine_rules
    }
