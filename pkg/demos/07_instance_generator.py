"""Generate synthetic instances: shape knobs, reproducibility, encoding.

The generator builds each job from a main operation chain, inserts OR
splits whose branches rejoin the chain, optionally hangs parallel AND
arms off it, and then draws machine alternatives and times. Every job is
drawn from its own seeded stream, so job j of a 4-job instance equals
job j of a 10-job instance generated from the same seed — suites grow
without reshuffling what came before.

Run:  python3 demos/07_instance_generator.py
"""

import json
import statistics

from ipps import (
    GenConfig,
    SchedulingEnv,
    encode,
    enumerate_all,
    generate_instance,
    serialize_instance,
    validate_instance,
)


def main() -> None:
    config = GenConfig()  # the defaults; every knob shown below can move
    spec = generate_instance(4, 5, config, seed=42)
    validate_instance(spec)

    print(f"generated {spec.name}: {len(spec.jobs)} jobs, "
          f"{spec.machine_count} machines, {spec.regular_op_count} operations")
    combos = enumerate_all(spec)
    for job in spec.jobs:
        per_op = [len(op.machines) for op in job.regular_ops]
        print(f"  job {job.job_id}: {len(job.regular_ops)} ops, "
              f"{len(combos[job.job_id])} routing combinations, "
              f"machine options per op {per_op}")

    print()
    print("the same seed reproduces the same instance, byte for byte:")
    again = generate_instance(4, 5, config, seed=42)
    same = json.dumps(serialize_instance(spec)) == json.dumps(serialize_instance(again))
    print(f"  identical serialization: {same}")

    print()
    print("jobs do not depend on how many siblings they have:")
    bigger = generate_instance(10, 5, config, seed=42)
    print(f"  job 2 of the 4-job and 10-job instances equal: "
          f"{spec.job(2) == bigger.job(2)}")

    print()
    print("shape statistics over 200 seeds (defaults):")
    ops, combinations = [], []
    for seed in range(200):
        inst = generate_instance(2, 5, config, seed=seed)
        ops.extend(len(j.regular_ops) for j in inst.jobs)
        combinations.extend(len(c) for c in enumerate_all(inst).values())
    print(f"  ops per job: min {min(ops)}, mean {statistics.mean(ops):.1f}, "
          f"max {max(ops)}")
    print(f"  combinations per job: min {min(combinations)}, "
          f"mean {statistics.mean(combinations):.1f}, max {max(combinations)}")

    print()
    print("tightening the knobs (two short chains, no OR splits):")
    flat = GenConfig(main_ops=(2, 2), or_groups=(0, 0), and_path_prob=0.0,
                     machine_prob=0.5, time_range=(1, 9))
    small = generate_instance(2, 3, flat, seed=7)
    for job in small.jobs:
        chain = " -> ".join(
            f"op{op.op_id}{[m for m, _ in op.machines]}" for op in job.regular_ops
        )
        print(f"  job {job.job_id}: {chain}")

    print()
    print("what a learning agent would see (initial encoded state):")
    snap = encode(SchedulingEnv(spec).reset())
    counts = snap.node_counts
    edges = {
        "op->op": len(snap.op_op_edges),
        "op->combination": len(snap.op_combination_edges),
        "combination->job": len(snap.combination_job_edges),
        "op->machine": len(snap.op_machine_edges),
    }
    print(f"  nodes: {counts}")
    print(f"  edges: {edges}")
    print(f"  action mask: {len(snap.mask_pairs)} startable pairs, "
          f"wait={snap.wait_allowed}")


if __name__ == "__main__":
    main()
