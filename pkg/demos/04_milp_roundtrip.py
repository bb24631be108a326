"""Exact models: export an instance as MILP text, solve it, verify it.

The exporter writes a plain LP-format text model: binaries pick one
routing combination per job (Y), one machine per chosen operation (X),
and an order for each machine-sharing pair (W); continuous completion
times (C) and the makespan (M) tie them together with big-M constraints.
Any LP-format solver can consume the file; here scipy's branch-and-cut
solves it, and the solution is validated independently of the solver.

Run:  python3 demos/04_milp_roundtrip.py
"""

from ipps import (
    GenConfig,
    brute_force_optimum,
    build_milp,
    check_solution,
    generate_instance,
    solve_lp,
    validate_schedule,
    write_lp,
)
from ipps.milp import extract_schedule
from ipps.fixtures import toy


def main() -> None:
    spec = toy()
    model = build_milp(spec)
    text = write_lp(model)

    lines = text.splitlines()
    print(f"toy instance -> {len(model.variables)} variables, "
          f"{len(model.rows)} constraint rows, {len(lines)} lines of LP text")
    print()
    print("the first lines of the export:")
    for line in lines[:12]:
        print(f"  {line}")
    print("  ...")

    print()
    solution = solve_lp(text)
    schedule = extract_schedule(spec, solution.values)
    print(f"solver objective: {solution.objective:g}")
    for record in sorted(schedule, key=lambda r: (r.start, r.job_id)):
        print(f"  job {record.job_id} op {record.op_id} on m{record.machine}: "
              f"[{record.start}, {record.end})")

    report = validate_schedule(spec, schedule)
    oracle = brute_force_optimum(spec)
    print(f"reconstructed makespan {report.makespan}, "
          f"exhaustive optimum {oracle.makespan}")
    assert report.makespan == oracle.makespan

    print()
    print("check_solution validates solver output without trusting it:")
    good = check_solution(spec, {"variables": solution.values,
                                 "objective": solution.objective})
    print(f"  honest solution: feasible={good.feasible} "
          f"makespan={good.makespan} objective_consistent={good.objective_consistent}")

    forged = dict(solution.values)
    forged["M"] = solution.objective - 1  # claim a better makespan than real
    bad = check_solution(spec, forged)
    print(f"  forged objective: feasible={bad.feasible} problems={list(bad.problems)}")

    print()
    print("the same pipeline on a small generated instance:")
    small = GenConfig(main_ops=(2, 3), or_groups=(0, 1), branches_per_group=(2, 2),
                      branch_ops=(1, 1), and_path_prob=0.0, machine_prob=0.4,
                      time_range=(1, 9), max_regular_ops=4)
    gen = generate_instance(2, 3, small, seed=11)
    makespan = round(solve_lp(write_lp(build_milp(gen))).objective)
    print(f"  {gen.name} ({gen.regular_op_count} ops): solver {makespan}, "
          f"oracle {brute_force_optimum(gen).makespan}")


if __name__ == "__main__":
    main()
