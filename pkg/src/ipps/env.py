"""Event-driven scheduling environment over AND/OR job graphs.

Decision points sit at operation completion times.  An action either
assigns a feasible operation to an idle capable machine (a pair) or waits
for the next completion.  Scheduling an operation discards every routing
combination of its job that does not contain it; operations left in no
surviving combination are pruned and stop gating their successors.

Semantics in brief:

* a pair is legal iff the op is unscheduled, all its non-pruned direct
  predecessors are done, its job is idle, and the machine is idle;
* Wait is offered iff at least one operation is in progress;
* after a pair, the clock stays put while further pairs are available at
  the same instant; otherwise the clock advances by exactly one completion
  instant, applying all simultaneous completions atomically;
* zero-time supernodes complete automatically once their predecessors are
  done, but only when they belong to every surviving combination of their
  job (completing one never commits a routing choice);
* rewards are makespan deltas: the naive variant uses the running maximum
  record end, the estimated variant uses aggregated completion estimates
  (see :class:`EstimateConfig`); both telescope over an episode.

All times are exact integers in grains.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .combinations import Combination, enumerate_all
from .errors import DeadStateError, IllegalActionError
from .model import InstanceSpec, OpKind, Operation
from .schedule import Schedule, ScheduleRecord

__all__ = [
    "OpStatus",
    "Action",
    "WAIT",
    "ActionSpace",
    "StepResult",
    "EstimateConfig",
    "RewardSpec",
    "SchedulingEnv",
    "RolloutResult",
    "rollout",
    "RandomPolicy",
    "random_rollout",
]

from enum import IntEnum


class OpStatus(IntEnum):
    UNSCHEDULED = 0
    IN_PROGRESS = 1
    DONE = 2
    PRUNED = 3


@dataclass(frozen=True, order=True)
class Action:
    """A scheduling decision: a (job, op, machine) pair, or Wait.

    Wait is the singleton :data:`WAIT` (all fields None).
    """

    job_id: int | None = None
    op_id: int | None = None
    machine: int | None = None

    @property
    def is_wait(self) -> bool:
        return self.job_id is None

    @staticmethod
    def pair(job_id: int, op_id: int, machine: int) -> "Action":
        return Action(job_id, op_id, machine)


WAIT = Action()


@dataclass(frozen=True)
class ActionSpace:
    pairs: tuple[Action, ...]
    wait: bool

    def __contains__(self, action: Action) -> bool:
        return (action.is_wait and self.wait) or action in self.pairs

    def __len__(self) -> int:
        return len(self.pairs) + (1 if self.wait else 0)

    @property
    def all(self) -> tuple[Action, ...]:
        return self.pairs + ((WAIT,) if self.wait else ())


@dataclass(frozen=True)
class StepResult:
    reward: int | float
    done: bool
    clock: int


@dataclass(frozen=True)
class EstimateConfig:
    """How completion estimates are aggregated.

    * ``op_agg``   — per-op estimated time over machine options: min | mean
    * ``job_agg``  — per-job over surviving combinations: min | mean
    * ``total_agg``— over jobs: max over all | mean over unfinished
    """

    op_agg: str = "min"
    job_agg: str = "min"
    total_agg: str = "max"

    def __post_init__(self):
        if self.op_agg not in ("min", "mean"):
            raise ValueError(f"op_agg must be min|mean, got {self.op_agg!r}")
        if self.job_agg not in ("min", "mean"):
            raise ValueError(f"job_agg must be min|mean, got {self.job_agg!r}")
        if self.total_agg not in ("max", "mean"):
            raise ValueError(f"total_agg must be max|mean, got {self.total_agg!r}")

    @staticmethod
    def all_configs() -> tuple["EstimateConfig", ...]:
        return tuple(
            EstimateConfig(o, j, t)
            for o in ("min", "mean")
            for j in ("min", "mean")
            for t in ("max", "mean")
        )


@dataclass(frozen=True)
class RewardSpec:
    """Reward definition: negative makespan/estimate deltas per step."""

    kind: str = "naive"  # naive | estimated
    estimate: EstimateConfig = field(default_factory=EstimateConfig)
    include_in_progress: bool = True  # naive: count in-progress record ends

    def __post_init__(self):
        if self.kind not in ("naive", "estimated"):
            raise ValueError(f"reward kind must be naive|estimated, got {self.kind!r}")

    @staticmethod
    def naive(include_in_progress: bool = True) -> "RewardSpec":
        return RewardSpec("naive", EstimateConfig(), include_in_progress)

    @staticmethod
    def estimated(config: EstimateConfig | None = None) -> "RewardSpec":
        return RewardSpec("estimated", config or EstimateConfig())


class SchedulingEnv:
    """Exact MDP over an instance.  Construct, then :meth:`reset`."""

    def __init__(
        self,
        spec: InstanceSpec,
        reward: RewardSpec | None = None,
        combinations: Mapping[int, tuple[Combination, ...]] | None = None,
    ):
        self.spec = spec
        self.reward_spec = reward or RewardSpec.naive()
        self.combos: dict[int, tuple[Combination, ...]] = (
            dict(combinations) if combinations is not None else enumerate_all(spec)
        )
        # static helpers
        self._ops: dict[tuple[int, int], Operation] = {}
        self._op_combos: dict[tuple[int, int], frozenset[int]] = {}
        self._phat: dict[str, dict[tuple[int, int], int | Fraction]] = {"min": {}, "mean": {}}
        for job in spec.jobs:
            for op in job.ops:
                self._ops[op.ref] = op
                self._op_combos[op.ref] = frozenset(
                    c.index for c in self.combos[job.job_id] if op.op_id in c.ops
                )
                if op.kind is OpKind.OP:
                    times = [t for _, t in op.machines]
                    self._phat["min"][op.ref] = min(times)
                    mean = Fraction(sum(times), len(times))
                    self._phat["mean"][op.ref] = int(mean) if mean.denominator == 1 else mean
        self.reset()

    # ------------------------------------------------------------------
    # lifecycle
    # ------------------------------------------------------------------

    def reset(self) -> "SchedulingEnv":
        spec = self.spec
        self.clock: int = 0
        self.done: bool = False
        self.records: list[ScheduleRecord] = []
        self.status: dict[tuple[int, int], OpStatus] = {
            ref: OpStatus.UNSCHEDULED for ref in self._ops
        }
        self.pred_pending: dict[tuple[int, int], int] = {}
        self.feasible_at: dict[tuple[int, int], int] = {}
        # pre-feasibility: no predecessor is still unscheduled (started counts)
        self._unsched_gate: dict[tuple[int, int], int] = {}
        self.pre_feasible_at: dict[tuple[int, int], int] = {}
        self.surviving: dict[int, set[int]] = {
            j.job_id: {c.index for c in self.combos[j.job_id]} for j in spec.jobs
        }
        self.finished_jobs: set[int] = set()
        self.machine_op: dict[int, tuple[int, int] | None] = {m: None for m in spec.machine_ids}
        self.machine_end: dict[int, int] = {m: 0 for m in spec.machine_ids}
        self.machine_busy_accum: dict[int, int] = {m: 0 for m in spec.machine_ids}
        self.machine_cur_start: dict[int, int | None] = {m: None for m in spec.machine_ids}
        self.machine_idle_since: dict[int, int] = {m: 0 for m in spec.machine_ids}
        self.job_op: dict[int, tuple[int, int] | None] = {j: None for j in spec.job_ids}
        self.job_front: dict[int, int] = {j: 0 for j in spec.job_ids}
        self._events: list[tuple[int, int, int, int]] = []  # (end, job, op, machine)
        self._max_end: int = 0
        self._max_end_done: int = 0
        self._ready: set[tuple[int, int]] = set()
        self._version: int = 0
        self._space_cache: tuple[int, ActionSpace] | None = None
        # estimate bookkeeping: per job/combination, total and started p-hat sums
        self._full_sum: dict[str, dict[int, dict[int, int | Fraction]]] = {"min": {}, "mean": {}}
        self._started_sum: dict[str, dict[int, dict[int, int | Fraction]]] = {"min": {}, "mean": {}}
        for job in spec.jobs:
            for agg in ("min", "mean"):
                self._full_sum[agg][job.job_id] = {
                    c.index: sum(self._phat[agg][(job.job_id, o)] for o in c.regular_ops)
                    for c in self.combos[job.job_id]
                }
                self._started_sum[agg][job.job_id] = {
                    c.index: 0 for c in self.combos[job.job_id]
                }

        for job in spec.jobs:
            for op in job.ops:
                self.pred_pending[op.ref] = len(job.preds(op.op_id))
                self._unsched_gate[op.ref] = self.pred_pending[op.ref]
        for job in spec.jobs:
            for op in job.ops:
                if self.pred_pending[op.ref] == 0:
                    self._mark_pred_clear(op.ref)
                if self._unsched_gate[op.ref] == 0:
                    self._mark_gate_clear(op.ref)
        self._settle()
        return self

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def action_space(self) -> ActionSpace:
        if self._space_cache and self._space_cache[0] == self._version:
            return self._space_cache[1]
        pairs: list[Action] = []
        if not self.done:
            for j, o in sorted(self._ready):
                if self.job_op[j] is not None:
                    continue
                op = self._ops[(j, o)]
                for m, _t in op.machines:
                    if self.machine_op[m] is None:
                        pairs.append(Action(j, o, m))
        space = ActionSpace(tuple(pairs), wait=bool(self._events) and not self.done)
        self._space_cache = (self._version, space)
        return space

    def feasible_ops(self) -> tuple[tuple[int, int], ...]:
        """Ops whose non-pruned predecessors are all done (job-busy included)."""
        return tuple(sorted(self._ready))

    def pre_feasible_ops(self) -> tuple[tuple[int, int], ...]:
        """Ops with no unscheduled gate: every live predecessor at least started."""
        return tuple(sorted(
            ref for ref, st in self.status.items()
            if st is OpStatus.UNSCHEDULED
            and self._ops[ref].kind is OpKind.OP
            and self._unsched_gate[ref] == 0
        ))

    def eligible_combinations(self, job_id: int) -> tuple[Combination, ...]:
        return tuple(c for c in self.combos[job_id] if c.index in self.surviving[job_id])

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.records)

    @property
    def makespan(self) -> int:
        return self._max_end

    def in_progress(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted((j, o) for (_e, j, o, _m) in self._events))

    # ------------------------------------------------------------------
    # rewards / estimates
    # ------------------------------------------------------------------

    def naive_total(self, include_in_progress: bool = True) -> int:
        """Running makespan T(s): max record end (optionally completed only)."""
        return self._max_end if include_in_progress else self._max_end_done

    def estimate_combination(
        self, job_id: int, comb_index: int, op_agg: str = "mean"
    ) -> int | Fraction:
        """Estimated completion of one surviving combination of one job."""
        if comb_index not in self.surviving[job_id]:
            raise KeyError(f"combination {comb_index} of job {job_id} is not surviving")
        if job_id in self.finished_jobs:
            return self.job_front[job_id]
        front = max(self.clock, self.job_front[job_id])
        v = (front + self._full_sum[op_agg][job_id][comb_index]
             - self._started_sum[op_agg][job_id][comb_index])
        if isinstance(v, Fraction) and v.denominator == 1:
            return int(v)
        return v

    def estimate_job(self, job_id: int, config: EstimateConfig) -> int | Fraction:
        """Estimated completion of one job under a config (exact arithmetic)."""
        if job_id in self.finished_jobs:
            return self.job_front[job_id]
        front = max(self.clock, self.job_front[job_id])
        full = self._full_sum[config.op_agg][job_id]
        started = self._started_sum[config.op_agg][job_id]
        vals = [front + full[h] - started[h] for h in self.surviving[job_id]]
        if config.job_agg == "min":
            return min(vals)
        mean = Fraction(sum(vals)) / len(vals)
        return int(mean) if mean.denominator == 1 else mean

    def estimate_total(self, config: EstimateConfig | None = None) -> int | Fraction:
        """Estimated makespan T-hat(s) under a config."""
        config = config or self.reward_spec.estimate
        if config.total_agg == "max":
            vals = [self.estimate_job(j, config) for j in self.spec.job_ids]
            return max(vals) if vals else 0
        unfinished = [j for j in self.spec.job_ids if j not in self.finished_jobs]
        if not unfinished:
            return self._max_end  # terminal: the realized makespan
        vals = [self.estimate_job(j, config) for j in unfinished]
        mean = Fraction(sum(vals)) / len(vals)
        return int(mean) if mean.denominator == 1 else mean

    def _reward_base(self) -> int | Fraction:
        if self.reward_spec.kind == "naive":
            return self.naive_total(self.reward_spec.include_in_progress)
        return self.estimate_total(self.reward_spec.estimate)

    # ------------------------------------------------------------------
    # transitions
    # ------------------------------------------------------------------

    def step(self, action: Action) -> StepResult:
        if self.done:
            raise IllegalActionError("episode is over")
        before = self._reward_base()
        if action.is_wait:
            if not self._events:
                raise IllegalActionError("cannot wait: nothing is in progress")
            self._advance_one_instant()
        else:
            self._apply_pair(action)
            if not self.action_space().pairs:
                if self._events:
                    self._advance_one_instant()
                elif not self.done:
                    raise DeadStateError(
                        "no pairs available and nothing in progress, but jobs are unfinished"
                    )
        after = self._reward_base()
        reward = before - after
        if isinstance(reward, Fraction):
            reward = int(reward) if reward.denominator == 1 else float(reward)
        return StepResult(reward, self.done, self.clock)

    def _apply_pair(self, action: Action) -> None:
        ref = (action.job_id, action.op_id)
        op = self._ops.get(ref)
        if op is None:
            raise IllegalActionError(f"unknown op {ref}")
        if op.kind is not OpKind.OP:
            raise IllegalActionError(f"op {ref} is a supernode")
        st = self.status[ref]
        if st is OpStatus.PRUNED:
            raise IllegalActionError(f"op {ref} was pruned by an earlier routing choice")
        if st is not OpStatus.UNSCHEDULED:
            raise IllegalActionError(f"op {ref} already scheduled")
        if self.pred_pending[ref] > 0:
            raise IllegalActionError(f"op {ref} has unfinished prerequisites")
        if self.job_op[action.job_id] is not None:
            raise IllegalActionError(f"job {action.job_id} is busy")
        if action.machine not in op.machine_ids:
            raise IllegalActionError(f"op {ref} cannot run on machine {action.machine}")
        if self.machine_op[action.machine] is None and self.machine_cur_start[action.machine] is not None:
            raise IllegalActionError("machine bookkeeping corrupted")  # pragma: no cover
        if self.machine_op[action.machine] is not None:
            raise IllegalActionError(f"machine {action.machine} is busy")

        p = op.time_on(action.machine)
        start, end = self.clock, self.clock + p
        self.records.append(ScheduleRecord(action.job_id, action.op_id, action.machine, start, end))
        self.status[ref] = OpStatus.IN_PROGRESS
        self._ready.discard(ref)
        self.machine_op[action.machine] = ref
        self.machine_end[action.machine] = end
        self.machine_cur_start[action.machine] = start
        self.job_op[action.job_id] = (action.op_id, end)
        self.job_front[action.job_id] = max(self.job_front[action.job_id], end)
        heapq.heappush(self._events, (end, action.job_id, action.op_id, action.machine))
        self._max_end = max(self._max_end, end)
        for e in self.spec.job(action.job_id).succs(action.op_id):
            self._release_gate((action.job_id, e.dst))

        # routing: combinations without this op die; ops in no survivor are pruned
        keep = self.surviving[action.job_id] & self._op_combos[ref]
        if keep != self.surviving[action.job_id]:
            self._prune_to(action.job_id, keep)
        for agg in ("min", "mean"):
            started = self._started_sum[agg][action.job_id]
            phat = self._phat[agg][ref]
            for h in self.surviving[action.job_id]:
                started[h] += phat
        self._settle()
        self._version += 1

    def _prune_to(self, job_id: int, keep: set[int]) -> None:
        self.surviving[job_id] = keep
        job = self.spec.job(job_id)
        for op in job.ops:
            ref = op.ref
            if self.status[ref] is OpStatus.UNSCHEDULED and not (self._op_combos[ref] & keep):
                self.status[ref] = OpStatus.PRUNED
                self._ready.discard(ref)
                self.feasible_at.pop(ref, None)
                self.pre_feasible_at.pop(ref, None)
                for e in job.succs(op.op_id):
                    self._release_pred((job_id, e.dst))
                    self._release_gate((job_id, e.dst))

    def _release_pred(self, ref: tuple[int, int]) -> None:
        self.pred_pending[ref] -= 1
        if self.pred_pending[ref] == 0:
            self._mark_pred_clear(ref)

    def _release_gate(self, ref: tuple[int, int]) -> None:
        self._unsched_gate[ref] -= 1
        if self._unsched_gate[ref] == 0:
            self._mark_gate_clear(ref)

    def _mark_pred_clear(self, ref: tuple[int, int]) -> None:
        if self.status[ref] is OpStatus.UNSCHEDULED:
            self.feasible_at.setdefault(ref, self.clock)
            if self._ops[ref].kind is OpKind.OP:
                self._ready.add(ref)

    def _mark_gate_clear(self, ref: tuple[int, int]) -> None:
        if self.status[ref] is OpStatus.UNSCHEDULED and self._ops[ref].kind is OpKind.OP:
            self.pre_feasible_at.setdefault(ref, self.clock)

    def _advance_one_instant(self) -> None:
        t = self._events[0][0]
        self.clock = t
        while self._events and self._events[0][0] == t:
            _end, j, o, m = heapq.heappop(self._events)
            ref = (j, o)
            self.status[ref] = OpStatus.DONE
            self.machine_op[m] = None
            self.machine_busy_accum[m] += t - self.machine_cur_start[m]
            self.machine_cur_start[m] = None
            self.machine_idle_since[m] = t
            self.job_op[j] = None
            self._max_end_done = max(self._max_end_done, t)
            for e in self.spec.job(j).succs(o):
                self._release_pred((j, e.dst))
        self._settle()
        self._version += 1

    def _settle(self) -> None:
        """Auto-complete supernodes that are unconditionally required and gated clear."""
        changed = True
        while changed:
            changed = False
            for job in self.spec.jobs:
                if job.job_id in self.finished_jobs:
                    continue
                surv = self.surviving[job.job_id]
                for op in job.ops:
                    if op.kind is OpKind.OP:
                        continue
                    ref = op.ref
                    if self.status[ref] is not OpStatus.UNSCHEDULED:
                        continue
                    if self.pred_pending[ref] > 0:
                        continue
                    if not surv <= self._op_combos[ref]:
                        continue  # would commit a routing choice; a pair must do that
                    self.status[ref] = OpStatus.DONE
                    changed = True
                    for e in job.succs(op.op_id):
                        self._release_pred((job.job_id, e.dst))
                        self._release_gate((job.job_id, e.dst))
                    if op.kind is OpKind.END:
                        self.finished_jobs.add(job.job_id)
        if len(self.finished_jobs) == len(self.spec.jobs):
            self.done = True
        self._version += 1

    # ------------------------------------------------------------------
    # snapshot / restore (search support)
    # ------------------------------------------------------------------

    def snapshot(self) -> tuple:
        """Cheap copy of the mutable state; restore with :meth:`restore`."""
        return (
            self.clock,
            self.done,
            list(self.records),
            dict(self.status),
            dict(self.pred_pending),
            dict(self.feasible_at),
            {j: set(s) for j, s in self.surviving.items()},
            set(self.finished_jobs),
            dict(self.machine_op),
            dict(self.machine_end),
            dict(self.machine_busy_accum),
            dict(self.machine_cur_start),
            dict(self.machine_idle_since),
            dict(self.job_op),
            dict(self.job_front),
            list(self._events),
            self._max_end,
            self._max_end_done,
            set(self._ready),
            {agg: {j: dict(hs) for j, hs in per.items()} for agg, per in self._started_sum.items()},
            dict(self._unsched_gate),
            dict(self.pre_feasible_at),
        )

    def restore(self, snap: tuple) -> None:
        (
            self.clock,
            self.done,
            records,
            status,
            pred_pending,
            feasible_at,
            surviving,
            finished,
            machine_op,
            machine_end,
            machine_busy_accum,
            machine_cur_start,
            machine_idle_since,
            job_op,
            job_front,
            events,
            self._max_end,
            self._max_end_done,
            ready,
            started,
            unsched_gate,
            pre_feasible_at,
        ) = snap
        self.records = list(records)
        self.status = dict(status)
        self.pred_pending = dict(pred_pending)
        self.feasible_at = dict(feasible_at)
        self.surviving = {j: set(s) for j, s in surviving.items()}
        self.finished_jobs = set(finished)
        self.machine_op = dict(machine_op)
        self.machine_end = dict(machine_end)
        self.machine_busy_accum = dict(machine_busy_accum)
        self.machine_cur_start = dict(machine_cur_start)
        self.machine_idle_since = dict(machine_idle_since)
        self.job_op = dict(job_op)
        self.job_front = dict(job_front)
        self._events = list(events)
        self._ready = set(ready)
        self._started_sum = {agg: {j: dict(hs) for j, hs in per.items()} for agg, per in started.items()}
        self._unsched_gate = dict(unsched_gate)
        self.pre_feasible_at = dict(pre_feasible_at)
        self._version += 1
        self._space_cache = None

    # ------------------------------------------------------------------
    # machine statistics (graph features)
    # ------------------------------------------------------------------

    def machine_utilization(self, machine: int) -> Fraction:
        busy = self.machine_busy_accum[machine]
        if self.machine_op[machine] is not None:
            busy += self.clock - self.machine_cur_start[machine]
        return Fraction(busy, max(self.clock, self.spec.time_scale))

    def machine_idle_at(self, machine: int) -> int:
        if self.machine_op[machine] is not None:
            return self.machine_end[machine]
        return self.machine_idle_since[machine]

    def machine_idle_time(self, machine: int) -> int:
        if self.machine_op[machine] is not None:
            return 0
        return self.clock - self.machine_idle_since[machine]

    def machine_remaining(self, machine: int) -> int:
        if self.machine_op[machine] is None:
            return 0
        return self.machine_end[machine] - self.clock


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RolloutResult:
    schedule: Schedule
    makespan: int
    rewards: tuple
    total_reward: int | float
    steps: int


Policy = Callable[[SchedulingEnv], Action]


def rollout(
    env_or_spec: SchedulingEnv | InstanceSpec,
    policy: Policy,
    *,
    reward: RewardSpec | None = None,
) -> RolloutResult:
    """Run one episode to termination under a policy."""
    if isinstance(env_or_spec, SchedulingEnv):
        env = env_or_spec
        env.reset()
    else:
        env = SchedulingEnv(env_or_spec, reward=reward)
    rewards: list[int | float] = []
    steps = 0
    while not env.done:
        action = policy(env)
        result = env.step(action)
        rewards.append(result.reward)
        steps += 1
    total: int | float = sum(rewards)
    return RolloutResult(env.schedule, env.makespan, tuple(rewards), total, steps)


@dataclass
class RandomPolicy:
    """Uniform over the current action space.

    With ``include_wait=False`` the policy never waits voluntarily (it still
    must wait when no pair is available).
    """

    rng: np.random.Generator
    include_wait: bool = True

    def __call__(self, env: SchedulingEnv) -> Action:
        space = env.action_space()
        options: list[Action] = list(space.pairs)
        if space.wait and self.include_wait:
            options.append(WAIT)
        if not options:
            return WAIT  # forced
        return options[int(self.rng.integers(len(options)))]


def random_rollout(
    spec: InstanceSpec,
    seed: int | np.random.Generator = 0,
    *,
    include_wait: bool = True,
    reward: RewardSpec | None = None,
) -> RolloutResult:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rollout(spec, RandomPolicy(rng, include_wait), reward=reward)
