"""Compare scheduling methods over a suite with the bench harness.

The harness runs each requested method over each instance, computes gaps
against a reference column (the exhaustive oracle when it is among the
methods, otherwise the routing-aware lower bound), and keeps every
schedule it reports so results can be re-validated instead of trusted.

Run:  python3 demos/05_method_comparison.py          (tiny suite, oracle reference)
      python3 demos/05_method_comparison.py kim      (three benchmark problems, LB reference)
"""

import sys

from ipps import (
    GenConfig,
    generate_instance,
    replay_schedule,
    run_bench,
    schedule_from_json,
)
from ipps.fixtures import kim


def tiny_suite():
    config = GenConfig(main_ops=(2, 3), or_groups=(0, 1), branches_per_group=(2, 2),
                       branch_ops=(1, 1), and_path_prob=0.0, machine_prob=0.4,
                       time_range=(1, 9), max_regular_ops=4)
    return [generate_instance(2, 3, config, seed=s) for s in (1, 2, 3)]


def main() -> None:
    if len(sys.argv) > 1 and sys.argv[1] == "kim":
        suite = [kim(n) for n in (1, 2, 3)]
        methods = ["lower-bound", "greedy", "random"]
        print("three benchmark problems; gaps are against the lower bound,")
        print("which no feasible schedule can beat (the oracle cannot search")
        print("instances of this size).")
    else:
        suite = tiny_suite()
        methods = ["oracle", "greedy", "random", "no-wait-random"]
        print("three tiny generated instances; gaps are against the oracle,")
        print("so a gap of 0.0 means provably optimal.")

    report = run_bench(suite, methods, repeats=20, seed=0)

    print()
    width = max(len(r.instance) for r in report.rows) + 2
    print(f"{'instance':{width}s}{'method':16s}{'makespan':>9s}{'gap':>9s}")
    for row in report.rows:
        gap = "-" if row.gap is None else f"{row.gap:.4f}"
        mk = "-" if row.makespan is None else str(row.makespan)
        print(f"{row.instance:{width}s}{row.method:16s}{mk:>9s}{gap:>9s}")

    print()
    print("aggregates (mean makespan per method):")
    for method, agg in report.aggregates.items():
        print(f"  {method:16s}{agg['mean_makespan']}")

    if report.greedy_rules:
        best = report.greedy_rules["best_one"]
        print()
        print(f"best single greedy pairing: {best['rule']} (mean {best['mean']})")
        print(f"best-choice mean (pick the best pairing per instance): "
              f"{report.greedy_rules['best_choice_mean']}")

    # Nothing above needs to be taken on faith: every schedule replays.
    # (Bound-only rows have no schedule, so pick the first row that does.)
    first = next(
        r for r in report.rows
        if r.method in report.schedules.get(r.instance, {})
    )
    schedule_doc = report.schedules[first.instance][first.method]
    spec = next(s for s in suite if s.name == first.instance)
    replayed = replay_schedule(spec, schedule_from_json(schedule_doc, spec))
    print()
    print(f"re-validating {first.method} on {first.instance} by replaying its "
          f"schedule: makespan {replayed.makespan} (reported {first.makespan})")


if __name__ == "__main__":
    main()
