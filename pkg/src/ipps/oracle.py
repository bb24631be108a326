"""Exact references for small instances.

* :func:`brute_force_optimum` — memoized exhaustive search over the
  environment's decision tree (waiting included or excluded), returning a
  provably optimal makespan and one optimal schedule.
* :func:`canonicalize` — left-shift a feasible schedule until every start
  is 0 or coincides with some record's end, without increasing makespan.
  The result replays through the environment as a decision sequence.
* :func:`replay_schedule` — drive the environment so it reproduces a
  canonical schedule exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .combinations import enumerate_combinations, regular_preds_within
from .env import WAIT, Action, OpStatus, RewardSpec, RolloutResult, SchedulingEnv
from .errors import (
    DeadStateError,
    InfeasibleScheduleError,
    OracleLimitError,
    ReplayError,
)
from .model import InstanceSpec
from .schedule import Schedule, ScheduleRecord, validate_schedule

__all__ = [
    "OracleLimits",
    "OracleResult",
    "brute_force_optimum",
    "canonicalize",
    "replay_schedule",
]


@dataclass(frozen=True)
class OracleLimits:
    """Envelope the exhaustive search is sized for."""

    max_regular_ops: int = 8
    max_machines: int = 3
    max_combinations: int = 16


@dataclass(frozen=True)
class OracleResult:
    makespan: int
    schedule: Schedule
    states: int  # distinct memoized states


def _check_limits(spec: InstanceSpec, limits: OracleLimits | None) -> None:
    if limits is None:
        return
    n_ops = spec.regular_op_count
    if n_ops > limits.max_regular_ops:
        raise OracleLimitError(
            f"{n_ops} regular ops exceed the search envelope ({limits.max_regular_ops})"
        )
    if spec.machine_count > limits.max_machines:
        raise OracleLimitError(
            f"{spec.machine_count} machines exceed the search envelope ({limits.max_machines})"
        )
    for job in spec.jobs:
        n = len(enumerate_combinations(job))
        if n > limits.max_combinations:
            raise OracleLimitError(
                f"job {job.job_id}: {n} combinations exceed the search envelope "
                f"({limits.max_combinations})"
            )


def brute_force_optimum(
    spec: InstanceSpec,
    *,
    allow_wait: bool = True,
    limits: OracleLimits | None = OracleLimits(),
) -> OracleResult:
    """Optimal makespan by exhaustive search over environment decisions.

    With ``allow_wait=False`` the search may only wait when no pair is
    available, i.e. it optimizes over non-waiting policies.  States are
    memoized on (clock, done ops, in-progress assignments): the best
    reachable makespan from a state is independent of how it was reached,
    because completed ends never exceed the clock and the terminal clock
    equals the makespan.
    """
    _check_limits(spec, limits)
    env = SchedulingEnv(spec)

    def key(e: SchedulingEnv):
        done = frozenset(r for r, s in e.status.items() if s is OpStatus.DONE)
        running = frozenset(e._events)  # (end, job, op, machine) of in-progress ops
        return (e.clock, done, running)

    memo: dict = {}
    best_action: dict = {}

    def actions_of(e: SchedulingEnv) -> list[Action]:
        space = e.action_space()
        acts = list(space.pairs)
        if space.wait and (allow_wait or not acts):
            acts.append(WAIT)
        return acts

    def search(e: SchedulingEnv) -> int:
        if e.done:
            return e.makespan
        k = key(e)
        hit = memo.get(k)
        if hit is not None:
            return hit
        acts = actions_of(e)
        if not acts:
            raise DeadStateError("search reached a stuck state on a malformed instance")
        best, chosen = None, None
        for a in acts:
            snap = e.snapshot()
            e.step(a)
            v = search(e)
            e.restore(snap)
            if best is None or v < best:
                best, chosen = v, a
        memo[k] = best
        best_action[k] = chosen
        return best

    value = search(env)

    env.reset()
    while not env.done:
        env.step(best_action[key(env)])
    assert env.makespan == value
    return OracleResult(value, env.schedule, len(memo))


# ---------------------------------------------------------------------------
# canonical schedules
# ---------------------------------------------------------------------------

def canonicalize(spec: InstanceSpec, schedule: Sequence[ScheduleRecord]) -> Schedule:
    """Left-shift a feasible schedule to its canonical form.

    Repeatedly moves each record's start to the latest end among the records
    constraining it (its prerequisite ops, earlier records on its machine,
    earlier records of its job), or to 0 when unconstrained.  At the fixed
    point every start is 0 or some end time; the makespan never increases;
    the operation is idempotent.
    """
    report = validate_schedule(spec, schedule)
    if not report.ok:
        raise InfeasibleScheduleError(
            "cannot canonicalize an infeasible schedule", report.violations
        )
    records = list(Schedule(schedule))
    preds: dict[tuple[int, int], frozenset[int]] = {}
    for job in spec.jobs:
        comb = enumerate_combinations(job)[report.executed_combination[job.job_id]]
        for o, ps in regular_preds_within(job, comb).items():
            preds[(job.job_id, o)] = ps

    changed = True
    while changed:
        changed = False
        records.sort(key=lambda r: (r.start, r.end, r.job_id, r.op_id))
        for i, r in enumerate(records):
            bound = 0
            for other in records:
                if other is r:
                    continue
                constrains = (
                    other.op_id in preds[(r.job_id, r.op_id)] and other.job_id == r.job_id
                ) or (
                    other.end <= r.start
                    and (other.machine == r.machine or other.job_id == r.job_id)
                )
                if constrains and other.end > bound:
                    bound = other.end
            if bound < r.start:
                records[i] = ScheduleRecord(r.job_id, r.op_id, r.machine, bound, bound + (r.end - r.start))
                changed = True

    out = Schedule(records)
    check = validate_schedule(spec, out)
    assert check.ok, "canonicalization must preserve feasibility"
    return out


def replay_schedule(
    spec: InstanceSpec,
    schedule: Sequence[ScheduleRecord],
    *,
    reward: RewardSpec | None = None,
) -> RolloutResult:
    """Reproduce a canonical schedule as environment decisions.

    Every record must start at a decision point (time 0 or a completion
    instant reached by waiting); :func:`canonicalize` guarantees that.
    Raises :class:`ReplayError` otherwise.
    """
    env = SchedulingEnv(spec, reward=reward)
    todo = sorted(Schedule(schedule), key=lambda r: (r.start, r.job_id, r.op_id))
    rewards: list[int | float] = []
    steps = 0
    while not env.done:
        due = next(
            (r for r in todo if r.start == env.clock), None
        )
        if due is not None:
            action = Action(due.job_id, due.op_id, due.machine)
            if action not in env.action_space():
                raise ReplayError(
                    f"record for op ({due.job_id}, {due.op_id}) on machine {due.machine} "
                    f"at {due.start} is not a legal decision"
                )
            todo.remove(due)
        elif env.action_space().wait:
            action = WAIT
        else:
            raise ReplayError("no due record and nothing to wait on")
        res = env.step(action)
        rewards.append(res.reward)
        steps += 1
    if todo:
        raise ReplayError(f"{len(todo)} records were never due; schedule is not canonical")
    if set(env.schedule) != set(Schedule(schedule)):
        raise ReplayError("replayed schedule differs from the input")
    return RolloutResult(env.schedule, env.makespan, tuple(rewards), sum(rewards), steps)
