"""Jobs as AND/OR graphs: alternative routings inside one job.

An operation graph is more than a chain. A job can contain OR branch
points ("drill the hole OR punch it, then continue"), parallel AND arms,
and per-operation machine alternatives. A *combination* is one fully
resolved routing choice: keep exactly one branch under every OR split.
The environment commits to a combination implicitly — scheduling an
operation that only exists in some branches prunes the others mid-episode.

Run:  python3 demos/02_jobs_with_alternatives.py
"""

import numpy as np

from ipps import (
    RandomPolicy,
    SchedulingEnv,
    brute_force_optimum,
    combination_min_work,
    enumerate_combinations,
    parse_instance,
)

# One job in the on-disk JSON shape: explicit start/end supernodes, and
# edges as [pred, succ, kind] triples. The two OR edges out of op 1 open
# two branches that rejoin at op 5.
DOC = {
    "name": "demo-or",
    "machines": 2,
    "jobs": [
        {
            "id": 0,
            "ops": [
                {"id": 0, "kind": "start"},
                {"id": 1, "machines": [[0, 2], [1, 2]]},  # shared first op
                {"id": 2, "machines": [[0, 1]]},          # branch A, step 1
                {"id": 3, "machines": [[1, 2]]},          # branch A, step 2
                {"id": 4, "machines": [[0, 3], [1, 4]]},  # branch B
                {"id": 5, "machines": [[0, 1], [1, 1]]},  # shared join
                {"id": 6, "kind": "end"},
            ],
            "edges": [
                [0, 1, "AND"],
                [1, 2, "OR"],
                [1, 4, "OR"],
                [2, 3, "AND"],
                [3, 5, "AND"],
                [4, 5, "AND"],
                [5, 6, "AND"],
            ],
        }
    ],
}


def main() -> None:
    spec = parse_instance(DOC)
    job = spec.jobs[0]

    print("one job, five operations, one OR choice after op 1:")
    print("  branch A: op2 -> op3  (two short ops)")
    print("  branch B: op4         (one longer op)")
    print("  op5 joins the chosen branch, then the job ends")

    print()
    print("enumerated combinations:")
    for comb in enumerate_combinations(job):
        ops = sorted(comb.regular_ops)
        work = combination_min_work(job, comb)
        print(f"  #{comb.index}: ops {ops}, best-case total work {work}")

    print()
    print("the environment prunes branches as you commit:")
    env = SchedulingEnv(spec)
    startable = sorted({(a.job_id, a.op_id) for a in env.action_space().pairs})
    print(f"  initially startable: {startable}  (only op1: it precedes the split)")
    # Starting op1 leaves nothing else startable, so the clock advances to
    # its completion automatically and the branch heads open.
    env.step(env.action_space().pairs[0])
    startable = sorted({(a.job_id, a.op_id) for a in env.action_space().pairs})
    print(f"  after op1 completes:  {startable}  (both branch heads open)")
    action = next(a for a in env.action_space().pairs if a.op_id == 4)
    env.step(action)
    startable = sorted({(a.job_id, a.op_id) for a in env.action_space().pairs})
    print(f"  after starting op4:   {startable}  (branch A ops 2-3 are pruned)")

    print()
    print("random play always finishes exactly one branch:")
    rng = np.random.default_rng(5)
    for episode in range(4):
        env.reset()
        policy = RandomPolicy(rng)
        while not env.done:
            env.step(policy(env))
        executed = sorted(r.op_id for r in env.schedule)
        print(f"  episode {episode}: executed ops {executed}, makespan {env.makespan}")

    best = brute_force_optimum(spec)
    executed = sorted(r.op_id for r in best.schedule)
    print()
    print(f"exhaustive optimum: makespan {best.makespan} using ops {executed}")


if __name__ == "__main__":
    main()
