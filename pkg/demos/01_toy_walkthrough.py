"""Walk through the bundled two-job toy instance step by step.

The toy is small enough to reason about by hand: two jobs, two machines,
three unit-to-two-unit operations. It demonstrates the one scheduling idea
that separates this environment from classic job-shop dispatching: at a
decision point it can be strictly better to WAIT for a machine to free up
than to start any currently available operation.

Run:  python3 demos/01_toy_walkthrough.py
"""

import numpy as np

from ipps import (
    WAIT,
    Action,
    RandomPolicy,
    SchedulingEnv,
    brute_force_optimum,
    enumerate_all,
    random_rollout,
)
from ipps.fixtures import toy


def banner(text: str) -> None:
    print()
    print(f"--- {text} ---")


def main() -> None:
    spec = toy()
    print(f"instance {spec.name!r}: {len(spec.jobs)} jobs, "
          f"{spec.machine_count} machines, {spec.regular_op_count} operations")

    banner("the jobs")
    for job in spec.jobs:
        for op in job.regular_ops:
            options = ", ".join(f"m{m} in {t}" for m, t in op.machines)
            print(f"  job {job.job_id} op {op.op_id}: {options}")

    banner("routing combinations")
    # Every job here is a simple chain, so each has exactly one combination.
    for job_id, combos in enumerate_all(spec).items():
        ops = [sorted(c.regular_ops) for c in combos]
        print(f"  job {job_id}: {len(combos)} combination(s): {ops}")

    banner("playing the optimal episode")
    env = SchedulingEnv(spec)
    moves = (Action(0, 1, 0), Action(1, 1, 1), WAIT, Action(0, 2, 1))
    total = 0
    for move in moves:
        space = env.action_space()
        pairs = [(a.job_id, a.op_id, a.machine) for a in space.pairs]
        label = "WAIT" if move is WAIT else f"start job {move.job_id} op {move.op_id} on m{move.machine}"
        print(f"  clock {env.clock}: choices={pairs} wait={space.wait} -> {label}")
        result = env.step(move)
        total += result.reward
    print(f"  done: makespan {env.makespan}, summed naive rewards {total}")
    assert total == -env.makespan

    banner("why the WAIT matters")
    optimum = brute_force_optimum(spec)
    no_wait = brute_force_optimum(spec, allow_wait=False)
    print(f"  optimum with waiting:    {optimum.makespan}")
    print(f"  optimum without waiting: {no_wait.makespan}")
    print("  after both first ops start, greedily grabbing machine 0 for")
    print("  job 0 op 2 commits it to the slow machine; waiting one instant")
    print("  frees machine 1, which runs it in 1 instead of 3.")

    banner("random play finds both optima")
    with_wait = min(random_rollout(spec, seed=s).makespan for s in range(200))
    without = min(
        random_rollout(spec, seed=s, include_wait=False).makespan
        for s in range(200)
    )
    print(f"  best of 200 random episodes, wait allowed:  {with_wait}")
    print(f"  best of 200 random episodes, wait disabled: {without}")

    banner("a full random episode, narrated")
    env = SchedulingEnv(spec)
    policy = RandomPolicy(np.random.default_rng(7))
    while not env.done:
        action = policy(env)
        result = env.step(action)
        label = "WAIT" if action is WAIT else f"({action.job_id},{action.op_id})->m{action.machine}"
        print(f"  {label:14s} reward {result.reward:3d}  clock now {env.clock}")
    print(f"  makespan {env.makespan}")


if __name__ == "__main__":
    main()
