"""Schedules and the feasibility validator.

A schedule is a list of records (job, op, machine, start, end) over the
regular operations only; supernodes take zero time and are implicit.  The
validator checks the three feasibility conditions by name:

* ``precedence``  — an op starts no earlier than each of its prerequisite
  ops ends (prerequisites taken inside the executed routing, zero-time
  supernodes contracted);
* ``exclusivity`` — no two records overlap on the same machine or the same
  job;
* ``completeness`` — per job, the executed op set equals exactly one
  routing combination;

plus ``assignment`` for record-level integrity (known regular op, capable
machine, end - start equals the processing time, start >= 0, no duplicate
op).  All times are integer grains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .combinations import enumerate_combinations, regular_preds_within
from .errors import ScheduleFormatError
from .model import InstanceSpec, OpKind, grains_to_units

__all__ = [
    "ScheduleRecord",
    "Schedule",
    "Violation",
    "ValidationReport",
    "validate_schedule",
    "schedule_to_json",
    "schedule_from_json",
    "gantt_data",
]


@dataclass(frozen=True, order=True)
class ScheduleRecord:
    job_id: int
    op_id: int
    machine: int
    start: int
    end: int


class Schedule(tuple):
    """An immutable sequence of :class:`ScheduleRecord`."""

    def __new__(cls, records: Iterable[ScheduleRecord] = ()):
        return super().__new__(cls, sorted(records, key=lambda r: (r.start, r.end, r.job_id, r.op_id)))

    @property
    def makespan(self) -> int:
        return max((r.end for r in self), default=0)

    def by_job(self, job_id: int) -> tuple[ScheduleRecord, ...]:
        return tuple(r for r in self if r.job_id == job_id)

    def by_machine(self, machine: int) -> tuple[ScheduleRecord, ...]:
        return tuple(r for r in self if r.machine == machine)

    def record_for(self, job_id: int, op_id: int) -> ScheduleRecord:
        for r in self:
            if r.job_id == job_id and r.op_id == op_id:
                return r
        raise KeyError(f"no record for op ({job_id}, {op_id})")


@dataclass(frozen=True)
class Violation:
    condition: str  # assignment | precedence | exclusivity | completeness
    message: str
    records: tuple[ScheduleRecord, ...] = ()


@dataclass
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...] = ()
    makespan: int = 0
    # per job: index of the executed combination (when completeness holds)
    executed_combination: dict[int, int] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def validate_schedule(spec: InstanceSpec, schedule: Sequence[ScheduleRecord]) -> ValidationReport:
    """Check a complete schedule against an instance; never raises on content."""
    schedule = Schedule(schedule)
    violations: list[Violation] = []
    executed: dict[int, int] = {}

    def bad(condition: str, message: str, *records: ScheduleRecord) -> None:
        violations.append(Violation(condition, message, tuple(records)))

    known_jobs = set(spec.job_ids)
    seen_ops: set[tuple[int, int]] = set()
    for r in schedule:
        if r.job_id not in known_jobs:
            bad("assignment", f"unknown job {r.job_id}", r)
            continue
        job = spec.job(r.job_id)
        try:
            op = job.op(r.op_id)
        except KeyError:
            bad("assignment", f"unknown op ({r.job_id}, {r.op_id})", r)
            continue
        if op.kind is not OpKind.OP:
            bad("assignment", f"op ({r.job_id}, {r.op_id}) is a supernode, not schedulable", r)
            continue
        if (r.job_id, r.op_id) in seen_ops:
            bad("assignment", f"op ({r.job_id}, {r.op_id}) scheduled twice", r)
            continue
        seen_ops.add((r.job_id, r.op_id))
        if r.start < 0:
            bad("assignment", f"op ({r.job_id}, {r.op_id}) starts before time 0", r)
        if r.machine not in op.machine_ids:
            bad("assignment", f"op ({r.job_id}, {r.op_id}) not processable on machine {r.machine}", r)
        elif r.end - r.start != op.time_on(r.machine):
            bad(
                "assignment",
                f"op ({r.job_id}, {r.op_id}) duration {r.end - r.start} != "
                f"processing time {op.time_on(r.machine)} on machine {r.machine}",
                r,
            )
    if violations:
        return ValidationReport(False, tuple(violations))

    # exclusivity: machines and jobs process one op at a time
    for machine in spec.machine_ids:
        rows = schedule.by_machine(machine)
        for a, b in zip(rows, rows[1:]):
            if b.start < a.end:
                bad("exclusivity", f"machine {machine}: overlapping records", a, b)
    for job_id in spec.job_ids:
        rows = schedule.by_job(job_id)
        for a, b in zip(rows, rows[1:]):
            if b.start < a.end:
                bad("exclusivity", f"job {job_id}: overlapping records", a, b)

    # completeness + precedence per job
    for job in spec.jobs:
        done = {r.op_id for r in schedule.by_job(job.job_id)}
        combs = enumerate_combinations(job)
        match = [c for c in combs if c.regular_ops == done]
        if not match:
            bad(
                "completeness",
                f"job {job.job_id}: executed ops {sorted(done)} equal no routing combination",
            )
            continue
        comb = match[0]  # op sets are deduplicated, so at most one matches
        executed[job.job_id] = comb.index
        preds = regular_preds_within(job, comb)
        for r in schedule.by_job(job.job_id):
            for p in sorted(preds[r.op_id]):
                pr = schedule.record_for(job.job_id, p)
                if r.start < pr.end:
                    bad(
                        "precedence",
                        f"op ({job.job_id}, {r.op_id}) starts at {r.start} before "
                        f"prerequisite op {p} ends at {pr.end}",
                        pr,
                        r,
                    )

    if violations:
        return ValidationReport(False, tuple(violations))
    return ValidationReport(True, (), schedule.makespan, executed)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def schedule_to_json(schedule: Sequence[ScheduleRecord], spec: InstanceSpec) -> dict:
    """Schedule as a JSON-ready dict, times in unit values."""
    s = spec.time_scale
    return {
        "makespan": grains_to_units(Schedule(schedule).makespan, s),
        "records": [
            {
                "job": r.job_id,
                "op": r.op_id,
                "machine": r.machine,
                "start": grains_to_units(r.start, s),
                "end": grains_to_units(r.end, s),
            }
            for r in Schedule(schedule)
        ],
    }


def schedule_from_json(data: dict | str | Path, spec: InstanceSpec) -> Schedule:
    """Parse a schedule emitted by :func:`schedule_to_json` (or a bare list)."""
    if isinstance(data, Path):
        data = data.read_text()
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ScheduleFormatError(f"invalid JSON: {exc}") from exc
    rows = data.get("records") if isinstance(data, dict) else data
    if not isinstance(rows, list):
        raise ScheduleFormatError("expected a 'records' list")
    s = spec.time_scale
    records = []
    for row in rows:
        try:
            records.append(
                ScheduleRecord(
                    job_id=int(row["job"]),
                    op_id=int(row["op"]),
                    machine=int(row["machine"]),
                    start=_units_to_grains(row["start"], s),
                    end=_units_to_grains(row["end"], s),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScheduleFormatError(f"bad schedule record {row!r}: {exc}") from exc
    return Schedule(records)


def _units_to_grains(value, scale: int) -> int:
    grains = value * scale
    rounded = round(grains)
    if abs(grains - rounded) > 1e-6:
        raise ScheduleFormatError(f"time {value!r} is finer than the instance time scale")
    return int(rounded)


def gantt_data(schedule: Sequence[ScheduleRecord], spec: InstanceSpec) -> dict:
    """Machine-row bar data for plotting, times in unit values."""
    s = spec.time_scale
    rows = []
    for machine in spec.machine_ids:
        bars = [
            {
                "job": r.job_id,
                "op": r.op_id,
                "start": grains_to_units(r.start, s),
                "end": grains_to_units(r.end, s),
            }
            for r in Schedule(schedule).by_machine(machine)
        ]
        rows.append({"machine": machine, "bars": bars})
    return {"makespan": grains_to_units(Schedule(schedule).makespan, s), "machines": rows}
