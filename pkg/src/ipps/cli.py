"""Command-line entry points.

One executable, ``ipps``, with task-oriented subcommands:

=================  ===========================================================
``combinations``   per-job combination counts and op sets
``rollout``        random / no-wait-random episodes as JSON lines
``serve``          wire-protocol server on stdio or TCP
``greedy``         dispatching rules; ``--all-rules`` prints the full table
``generate``       synthetic instances, single or batch suites
``export-milp``    LP-text model export
``check-milp``     validate an external solver's solution file
``bench``          method comparison over a suite, JSON report
``oracle``         exhaustive optimum for envelope-sized instances
``canonicalize``   left-shift a schedule into canonical form
=================  ===========================================================

Instances are JSON files; the bundled ones are addressable by name:
``toy``, ``kim-problem01`` … ``kim-problem24``.

Reward configurations are spelled ``naive`` or ``est:<op>/<job>/<total>``
with ``op``/``job`` in ``{min,mean}`` and ``total`` in ``{max,mean}``, e.g.
``est:mean/min/max``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import fixtures
from .bench import run_bench
from .combinations import enumerate_combinations
from .env import EstimateConfig, RewardSpec, random_rollout
from .errors import IppsError
from .generator import GenConfig, generate_instance
from .greedy import MACHINE_RULES, OP_RULES, best_greedy, run_greedy
from .milp import check_solution, export_milp
from .model import (
    InstanceSpec,
    grains_to_units,
    load_instance,
    serialize_instance,
)
from .oracle import brute_force_optimum, canonicalize, replay_schedule
from .protocol import ServeOptions, serve_stdio, serve_tcp
from .schedule import schedule_from_json, schedule_to_json

__all__ = ["main"]

_BATCH_SIZES = ("16x20", "20x25", "25x20")


def _fail(message: str) -> "SystemExit":
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(2)


def resolve_instance(arg: str) -> InstanceSpec:
    """A path to an instance file, or a bundled name."""
    path = Path(arg)
    if path.exists():
        return load_instance(path)
    if arg == "toy":
        return fixtures.toy()
    m = re.fullmatch(r"(?:kim[-/])?problem(\d{1,2})", arg)
    if m:
        return fixtures.kim(int(m.group(1)))
    raise _fail(
        f"no instance file {arg!r}; bundled names are 'toy' and "
        f"'kim-problem01'..'kim-problem24'"
    )


def parse_reward(text: str) -> RewardSpec:
    """``naive`` or ``est:<op>/<job>/<total>``."""
    if text == "naive":
        return RewardSpec.naive()
    if text.startswith("est:"):
        parts = text[4:].split("/")
        if len(parts) != 3:
            raise _fail(f"reward {text!r}: expected est:<op>/<job>/<total>")
        try:
            return RewardSpec.estimated(EstimateConfig(*parts))
        except ValueError as exc:
            raise _fail(f"reward {text!r}: {exc}")
    raise _fail(f"unknown reward {text!r}; use 'naive' or 'est:<op>/<job>/<total>'")


def _print_json(data) -> None:
    print(json.dumps(data, indent=1))


# --------------------------------------------------------------------------
# subcommands


def cmd_combinations(args) -> int:
    spec = resolve_instance(args.instance)
    for job in spec.jobs:
        combos = enumerate_combinations(job)
        print(json.dumps({
            "job": job.job_id,
            "count": len(combos),
            "combinations": [sorted(c.regular_ops) for c in combos],
        }))
    return 0


def cmd_rollout(args) -> int:
    spec = resolve_instance(args.instance)
    reward = parse_reward(args.reward)
    include_wait = args.policy == "random"
    for seed in range(args.seeds):
        rng = np.random.default_rng([args.seed, seed])
        result = random_rollout(spec, rng, include_wait=include_wait, reward=reward)
        total = result.total_reward
        print(json.dumps({
            "seed": seed,
            "policy": args.policy,
            "makespan": grains_to_units(result.makespan, spec.time_scale),
            "total_reward": total if isinstance(total, (int, float)) else float(total),
            "steps": result.steps,
            "schedule": schedule_to_json(result.schedule, spec),
        }))
    return 0


def cmd_serve(args) -> int:
    spec = resolve_instance(args.instance)
    reward = parse_reward(args.reward)
    options = ServeOptions(episodes=args.episodes, reward=reward)
    if args.transport == "stdio":
        stats = serve_stdio(spec, options)
    elif args.transport.startswith("tcp:"):
        try:
            port = int(args.transport[4:])
        except ValueError:
            raise _fail(f"bad transport {args.transport!r}; use stdio or tcp:<port>")
        stats = serve_tcp(
            spec, port, options,
            ready=lambda p: print(f"listening on 127.0.0.1:{p}", file=sys.stderr),
        )
    else:
        raise _fail(f"bad transport {args.transport!r}; use stdio or tcp:<port>")
    print(
        f"served {stats.episodes} episode(s), {stats.steps} steps, "
        f"{stats.errors} protocol error(s)",
        file=sys.stderr,
    )
    return 0


def cmd_greedy(args) -> int:
    spec = resolve_instance(args.instance)
    if args.all_rules:
        results = best_greedy(
            spec, repeats=args.repeats, seed=args.seed, work_measure=args.work_measure
        )
        units = lambda g: grains_to_units(g, spec.time_scale)  # noqa: E731
        header = f"{'':10s}" + "".join(f"{m:>10s}" for m in MACHINE_RULES)
        print(header)
        for o in OP_RULES:
            row = "".join(f"{units(results[(o, m)].makespan):>10}" for m in MACHINE_RULES)
            print(f"{o:10s}{row}")
        means = {
            (o, m): results[(o, m)].mean_makespan
            for o in OP_RULES for m in MACHINE_RULES
        }
        best_one = min(means, key=means.get)
        best_choice = min(results.values(), key=lambda r: r.makespan)
        print(f"best one   : {best_one[0]}/{best_one[1]} "
              f"(mean {units(round(means[best_one]))})")
        print(f"best choice: {units(best_choice.makespan)} "
              f"({best_choice.op_rule}/{best_choice.machine_rule})")
        return 0
    result = run_greedy(
        spec, args.op_rule, args.machine_rule,
        repeats=args.repeats, seed=args.seed, work_measure=args.work_measure,
    )
    _print_json({
        "op_rule": result.op_rule,
        "machine_rule": result.machine_rule,
        "makespan": grains_to_units(result.makespan, spec.time_scale),
        "mean_makespan": round(result.mean_makespan / spec.time_scale, 3),
        "repeats": args.repeats,
        "schedule": schedule_to_json(result.schedule, spec),
    })
    return 0


def _parse_size(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise _fail(f"bad size {text!r}; expected <jobs>x<machines>, e.g. 16x20")
    return int(m.group(1)), int(m.group(2))


def cmd_generate(args) -> int:
    config = GenConfig()
    if args.cfg:
        overrides = json.loads(Path(args.cfg).read_text())
        try:
            config = GenConfig(**{
                k: tuple(v) if isinstance(v, list) else v
                for k, v in overrides.items()
            })
        except TypeError as exc:
            raise _fail(f"bad generator config {args.cfg}: {exc}")
    if args.batch:
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        sizes = [_parse_size(s) for s in (args.sizes or _BATCH_SIZES)]
        count = 0
        for jobs, machines in sizes:
            for i in range(args.batch):
                spec = generate_instance(
                    jobs, machines, config, seed=args.seed + i,
                    name=f"gen-{jobs}x{machines}-s{args.seed + i}",
                )
                path = out_dir / f"{spec.name}.json"
                path.write_text(json.dumps(serialize_instance(spec), indent=1) + "\n")
                count += 1
        print(f"wrote {count} instances to {out_dir}", file=sys.stderr)
        return 0
    if args.jobs is None or args.machines is None:
        raise _fail("--jobs and --machines are required (unless --batch)")
    spec = generate_instance(args.jobs, args.machines, config, seed=args.seed)
    payload = json.dumps(serialize_instance(spec), indent=1) + "\n"
    if args.output == "-":
        sys.stdout.write(payload)
    else:
        Path(args.output).write_text(payload)
        print(f"wrote {args.output}", file=sys.stderr)
    return 0


def cmd_export_milp(args) -> int:
    spec = resolve_instance(args.instance)
    export_milp(spec, args.output)
    print(f"wrote {args.output}", file=sys.stderr)
    return 0


def cmd_check_milp(args) -> int:
    spec = resolve_instance(args.instance)
    try:
        assignment = json.loads(Path(args.solution).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _fail(f"cannot read solution {args.solution}: {exc}")
    check = check_solution(spec, assignment)
    _print_json({
        "feasible": check.feasible,
        "makespan": (
            None if check.makespan is None
            else grains_to_units(check.makespan, spec.time_scale)
        ),
        "objective": check.objective,
        "objective_consistent": check.objective_consistent,
        "problems": list(check.problems),
    })
    return 0 if check.feasible else 1


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise _fail("--methods must name at least one method")
    try:
        report = run_bench(
            args.suite, methods,
            repeats=args.repeats, seed=args.seed,
            reference=args.reference, agent_cmd=args.agent_cmd,
            workers=args.workers,
        )
    except (ValueError, FileNotFoundError) as exc:
        raise _fail(str(exc))
    for row in report.rows:
        gap = "" if row.gap is None else f"  gap={row.gap:+.2%}"
        mk = "-" if row.makespan is None else row.makespan
        note = f"  [{row.note}]" if row.note else ""
        print(f"{row.instance:20s} {row.method:16s} {mk!s:>8s} "
              f"{row.seconds:8.3f}s{gap}{note}")
    for method, agg in report.aggregates.items():
        print(f"# {method}: {agg}")
    if report.greedy_rules:
        bo = report.greedy_rules["best_one"]
        print(f"# greedy best one: {bo['rule']} (mean {bo['mean']}); "
              f"best choice mean: {report.greedy_rules['best_choice_mean']}")
    if args.output:
        report.save(args.output)
        print(f"wrote {args.output}", file=sys.stderr)
    return 0


def cmd_oracle(args) -> int:
    spec = resolve_instance(args.instance)
    result = brute_force_optimum(spec, allow_wait=not args.no_wait)
    _print_json({
        "makespan": grains_to_units(result.makespan, spec.time_scale),
        "states": result.states,
        "allow_wait": not args.no_wait,
        "schedule": schedule_to_json(result.schedule, spec),
    })
    return 0


def cmd_canonicalize(args) -> int:
    spec = resolve_instance(args.instance)
    schedule = schedule_from_json(Path(args.schedule), spec)
    canonical = canonicalize(spec, schedule)
    replay_schedule(spec, canonical)  # raises if not attainable
    _print_json(schedule_to_json(canonical, spec))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipps",
        description="Process-planning-aware job scheduling toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("combinations",
                       help="per-job combination counts and op sets")
    p.add_argument("instance")
    p.set_defaults(func=cmd_combinations)

    p = sub.add_parser("rollout", help="random episodes as JSON lines")
    p.add_argument("instance")
    p.add_argument("--policy", choices=("random", "no-wait-random"),
                   default="random")
    p.add_argument("--seeds", type=int, default=1,
                   help="number of episodes (seeds 0..N-1)")
    p.add_argument("--seed", type=int, default=0,
                   help="base seed the per-episode streams derive from")
    p.add_argument("--reward", default="naive",
                   help="naive | est:<op>/<job>/<total>")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("serve", help="wire-protocol server")
    p.add_argument("instance")
    p.add_argument("--transport", default="stdio",
                   help="stdio (default) or tcp:<port>; tcp:0 picks a free port")
    p.add_argument("--reward", default="naive",
                   help="naive | est:<op>/<job>/<total>")
    p.add_argument("--episodes", type=int, default=None,
                   help="stop after N episodes (default: until client hangs up)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("greedy", help="dispatching-rule scheduling")
    p.add_argument("instance")
    p.add_argument("--op-rule", choices=OP_RULES, default="mwkr")
    p.add_argument("--machine-rule", choices=MACHINE_RULES, default="spt")
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--all-rules", action="store_true",
                   help="run every rule pairing; print the table with "
                        "best one / best choice")
    p.add_argument("--work-measure", choices=("min", "mean"), default="min",
                   help="per-op work measure for workload-based rules")
    p.set_defaults(func=cmd_greedy)

    p = sub.add_parser("generate", help="synthetic instances")
    p.add_argument("--jobs", type=int)
    p.add_argument("--machines", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cfg", help="JSON file with generator-config overrides")
    p.add_argument("-o", "--output", default="-",
                   help="output file, '-' for stdout; a directory with --batch")
    p.add_argument("--batch", type=int,
                   help="emit N instances per size into the output directory")
    p.add_argument("--sizes", nargs="*",
                   help=f"sizes for --batch as <jobs>x<machines> "
                        f"(default: {' '.join(_BATCH_SIZES)})")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("export-milp", help="LP-text model export")
    p.add_argument("instance")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_export_milp)

    p = sub.add_parser("check-milp", help="validate a solver solution file")
    p.add_argument("instance")
    p.add_argument("solution",
                   help="JSON: {'variables': {name: value}, 'objective': x} "
                        "or a flat {name: value} mapping")
    p.set_defaults(func=cmd_check_milp)

    p = sub.add_parser("bench", help="method comparison over a suite")
    p.add_argument("--suite", required=True,
                   help="'kim', a directory of instance JSON files, or one file")
    p.add_argument("--methods", required=True,
                   help="comma-separated: lower-bound,oracle,random,"
                        "no-wait-random,greedy,greedy:<op>/<machine>,"
                        "drl-g,drl-s")
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference", default=None,
                   help="gap reference method (default: oracle if run, "
                        "else lower-bound)")
    p.add_argument("--agent-cmd", default=None,
                   help="command for drl-* methods; speaks the wire protocol "
                        "on stdio")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", help="write the full JSON report here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="exhaustive optimum (small instances)")
    p.add_argument("instance")
    p.add_argument("--no-wait", action="store_true",
                   help="optimize over non-waiting policies only")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("canonicalize", help="left-shift a schedule")
    p.add_argument("instance")
    p.add_argument("schedule", help="schedule JSON file")
    p.set_defaults(func=cmd_canonicalize)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IppsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
