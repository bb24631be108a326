"""Build the bundled Kim-layout benchmark reconstruction.

Eighteen synthetic AND/OR jobs on 15 machines, combined into the
benchmark's 24 problem subsets.  Each job is generated structurally, its
processing times are scaled toward a per-job minimum-work target, and the
remaining deficit is spread one grain at a time over operations common to
every combination, so the job's minimum total work T_m hits the target
exactly.  Problem lower bounds — max T_m over included jobs — then equal
the benchmark's reference LB column exactly, and remain true lower bounds
by construction.

Run from the repository root:

    python3 scripts/build_kim_fixtures.py [--sweep]

Writes src/ipps/fixtures/kim/problem01.json … problem24.json,
jobs.json, and reference.json.  --sweep also runs the full 12-rule x 50
repeat greedy sweep and reports the best-choice average, which must land
within 10% of 458.38 for the benchmark-shaped acceptance band.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from ipps.combinations import enumerate_combinations, instance_lower_bound, job_min_work
from ipps.generator import GenConfig, _draft_structure, _assign_machines
from ipps.greedy import best_greedy
from ipps.model import Edge, EdgeKind, InstanceSpec, JobGraph, Operation, OpKind, validate_instance, serialize_instance

KIM_SALT = 20030915
MACHINES = 15

# per-job minimum-total-work targets (0-based job index)
TM_TARGETS = [295, 312, 427, 280, 299, 343, 306, 318, 344,
              270, 305, 372, 266, 310, 331, 289, 296, 320]

# problem -> included jobs (0-based), reproducing the reference LB column
PROBLEM_JOBS = {
    1:  [0, 1, 2, 9, 10, 11],
    2:  [3, 4, 5, 12, 13, 14],
    3:  [6, 7, 8, 15, 16, 17],
    4:  [0, 3, 6, 9, 12, 15],
    5:  [1, 4, 7, 10, 13, 16],
    6:  [2, 5, 8, 11, 14, 17],
    7:  [0, 4, 7, 11, 13, 16],
    8:  [1, 3, 5, 9, 12, 17],
    9:  [2, 6, 8, 10, 14, 15],
    10: [0, 1, 2, 4, 5, 9, 10, 11, 14],
    11: [3, 6, 7, 8, 12, 13, 15, 16, 17],
    12: [0, 1, 3, 4, 7, 9, 10, 13, 16],
    13: [1, 2, 5, 8, 10, 11, 14, 16, 17],
    14: [0, 3, 4, 6, 9, 11, 12, 15, 16],
    15: [2, 4, 5, 7, 12, 13, 14, 15, 17],
    16: [0, 1, 2, 3, 4, 5, 9, 10, 11, 12, 13, 14],
    17: [1, 3, 4, 6, 7, 8, 12, 13, 14, 15, 16, 17],
    18: [0, 1, 3, 4, 6, 7, 9, 10, 12, 13, 15, 16],
    19: [0, 1, 2, 4, 6, 7, 9, 10, 12, 13, 15, 16],
    20: [0, 1, 3, 4, 6, 7, 9, 10, 11, 13, 15, 16],
    21: [0, 2, 3, 5, 6, 8, 9, 11, 12, 14, 15, 17],
    22: list(range(15)),
    23: [j for j in range(18) if j not in (2, 5, 8)],
    24: list(range(18)),
}

REFERENCE_LB = [427, 343, 344, 306, 318, 427, 372, 343, 427, 427, 344, 318,
                427, 372, 427, 427, 344, 318, 427, 372, 427, 427, 372, 427]

GREEDY_AVG_TARGET = 458.38
GREEDY_AVG_TOL = 0.10

JOB_STRUCTURE = GenConfig(
    main_ops=(6, 9),
    or_groups=(2, 3),
    branches_per_group=(2, 3),
    branch_ops=(1, 2),
    and_path_prob=0.25,
    and_path_ops=(1, 1),
    machine_prob=0.2,
    time_range=(5, 50),
    max_combinations=24,
)


def _common_regular_ops(job: JobGraph) -> list[int]:
    """Regular ops present in every combination (empty region label)."""
    labels = job.region_labels()
    return sorted(
        op.op_id for op in job.ops
        if op.kind is OpKind.OP and not labels[op.op_id]
    )


def _scale_times(job: JobGraph, factor: float) -> JobGraph:
    ops = tuple(
        op if op.kind is not OpKind.OP else Operation(
            op.job_id, op.op_id, op.kind,
            tuple((m, max(1, int(t * factor))) for m, t in op.machines),
        )
        for op in job.ops
    )
    return JobGraph(job.job_id, ops, job.edges)


def _pad_ops(job: JobGraph, pads: dict[int, int]) -> JobGraph:
    ops = tuple(
        op if op.op_id not in pads else Operation(
            op.job_id, op.op_id, op.kind,
            tuple((m, t + pads[op.op_id]) for m, t in op.machines),
        )
        for op in job.ops
    )
    return JobGraph(job.job_id, ops, job.edges)


def build_job(index: int, target: int) -> JobGraph:
    """One job with minimum total work exactly ``target``."""
    for attempt in range(200):
        rng = np.random.default_rng([KIM_SALT, index, attempt])
        draft = _draft_structure(index, JOB_STRUCTURE, rng)
        ops = _assign_machines(draft, MACHINES, JOB_STRUCTURE, rng)
        job = JobGraph(index, ops, tuple(Edge(s, d, k) for s, d, k in draft.edges))
        try:
            combos = enumerate_combinations(job, cap=JOB_STRUCTURE.max_combinations)
        except Exception:
            continue
        tm0 = job_min_work(job, combos)
        if tm0 < 60 or not _common_regular_ops(job):
            continue
        if tm0 > target:
            job = _scale_times(job, 0.97 * target / tm0)
            tm0 = job_min_work(job)
        elif tm0 < 0.55 * target:
            job = _scale_times(job, 0.97 * target / tm0)
            tm0 = job_min_work(job)
        if tm0 > target:
            continue
        # spread the deficit one grain at a time over common ops
        common = _common_regular_ops(job)
        deficit = target - tm0
        pads = dict.fromkeys(common, 0)
        for i in range(deficit):
            pads[common[i % len(common)]] += 1
        job = _pad_ops(job, {o: p for o, p in pads.items() if p})
        assert job_min_work(job) == target, (index, attempt, job_min_work(job))
        return job
    raise RuntimeError(f"job {index}: no attempt reached target {target}")


def build_all() -> tuple[list[JobGraph], dict[int, InstanceSpec]]:
    jobs = [build_job(i, t) for i, t in enumerate(TM_TARGETS)]
    problems = {}
    for p, included in PROBLEM_JOBS.items():
        spec = InstanceSpec(
            machine_count=MACHINES,
            jobs=tuple(jobs[j] for j in included),
            name=f"kim-problem{p:02d}",
            time_scale=1,
        )
        validate_instance(spec)
        lb = instance_lower_bound(spec)
        assert lb == REFERENCE_LB[p - 1], (p, lb, REFERENCE_LB[p - 1])
        problems[p] = spec
    return jobs, problems


def sweep(problems: dict[int, InstanceSpec], repeats: int = 50, seed: int = 0):
    rows = []
    t0 = time.time()
    for p, spec in sorted(problems.items()):
        results = best_greedy(spec, repeats=repeats, seed=seed)
        bci = min(r.makespan for r in results.values())
        rows.append((p, len(spec.jobs), REFERENCE_LB[p - 1], bci))
        print(f"  problem{p:02d}  jobs={len(spec.jobs):2d}  LB={REFERENCE_LB[p-1]}  "
              f"best-greedy={bci}  (+{100*(bci/REFERENCE_LB[p-1]-1):.1f}%)")
    avg = sum(r[3] for r in rows) / len(rows)
    lo = GREEDY_AVG_TARGET * (1 - GREEDY_AVG_TOL)
    hi = GREEDY_AVG_TARGET * (1 + GREEDY_AVG_TOL)
    print(f"best-choice average = {avg:.2f}  (band [{lo:.2f}, {hi:.2f}])  "
          f"{'OK' if lo <= avg <= hi else 'OUT OF BAND'}  [{time.time()-t0:.1f}s]")
    return avg, rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweep", action="store_true",
                    help="run the full greedy sweep after building")
    ap.add_argument("--repeats", type=int, default=50)
    args = ap.parse_args()

    out = ROOT / "src" / "ipps" / "fixtures" / "kim"
    out.mkdir(parents=True, exist_ok=True)

    print("building 18 jobs ...")
    jobs, problems = build_all()
    for i, job in enumerate(jobs):
        n = sum(1 for o in job.ops if o.kind is OpKind.OP)
        print(f"  job{i:02d}: T_m={TM_TARGETS[i]}  regular_ops={n}  "
              f"combinations={len(enumerate_combinations(job))}")

    all_jobs = InstanceSpec(machine_count=MACHINES, jobs=tuple(jobs),
                            name="kim-jobs", time_scale=1)
    (out / "jobs.json").write_text(
        json.dumps(serialize_instance(all_jobs), indent=1) + "\n")
    for p, spec in sorted(problems.items()):
        (out / f"problem{p:02d}.json").write_text(
            json.dumps(serialize_instance(spec), indent=1) + "\n")
    reference = {
        "machines": MACHINES,
        "tm_targets": TM_TARGETS,
        "problems": {
            f"problem{p:02d}": {
                "jobs": PROBLEM_JOBS[p],
                "lower_bound": REFERENCE_LB[p - 1],
            }
            for p in sorted(PROBLEM_JOBS)
        },
        "greedy_average_target": GREEDY_AVG_TARGET,
        "greedy_average_tolerance": GREEDY_AVG_TOL,
    }
    (out / "reference.json").write_text(json.dumps(reference, indent=1) + "\n")
    print(f"wrote {len(problems)} problems + jobs.json + reference.json to {out}")

    if args.sweep:
        print("greedy sweep ...")
        sweep(problems, repeats=args.repeats)


if __name__ == "__main__":
    main()
