"""Benchmark runner: methods x instance suite -> report table + Gantt data.

Methods
-------
``lower-bound``
    Routing-relaxation bound (max over jobs of minimum total work).  No
    schedule; serves as the default gap reference.
``oracle``
    Exhaustive optimum; skipped with a notice when an instance exceeds the
    search envelope.
``random`` / ``no-wait-random``
    Best of ``repeats`` uniform rollouts (with / without voluntary waiting).
``greedy``
    All dispatching-rule pairings, ``repeats`` passes each; the row reports
    the best choice (min over pairings) and the report carries the full
    per-pairing table with best-one / best-choice aggregates.
``greedy:<op>/<machine>``
    A single pairing, e.g. ``greedy:mwkr/spt``.
``drl-g`` / ``drl-s``
    An external policy speaking the line-JSON protocol on stdio, spawned
    from ``agent_cmd``; one episode per instance for ``drl-g``, best of
    ``repeats`` sampled episodes for ``drl-s``.  Skipped with a notice when
    no agent command is configured.

Gap convention: ``gap = (makespan - reference) / reference`` against the
per-instance reference column (another method's makespan, or the lower
bound).  The report is JSON-serializable and includes, per instance and
method, the best schedule found and machine-lane Gantt rows.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .combinations import instance_lower_bound
from .env import random_rollout
from .errors import OracleLimitError
from .fixtures import kim_all
from .greedy import MACHINE_RULES, OP_RULES, best_greedy, run_greedy
from .model import InstanceSpec, load_instance
from .oracle import OracleLimits, brute_force_optimum
from .protocol import ServeOptions, serve
from .schedule import Schedule, gantt_data, schedule_from_json, schedule_to_json

__all__ = [
    "BenchReport",
    "BenchRow",
    "load_suite",
    "run_bench",
]

_ROLLOUT_SALT = 15485863

LOCAL_METHODS = ("lower-bound", "oracle", "random", "no-wait-random", "greedy")
AGENT_METHODS = ("drl-g", "drl-s")


@dataclass(frozen=True)
class BenchRow:
    instance: str
    method: str
    makespan: int | None
    seconds: float
    gap: float | None = None
    note: str = ""

    def to_json(self) -> dict:
        return {
            "instance": self.instance,
            "method": self.method,
            "makespan": self.makespan,
            "seconds": self.seconds,
            "gap": self.gap,
            "note": self.note,
        }


@dataclass
class BenchReport:
    suite: str
    methods: tuple[str, ...]
    repeats: int
    seed: int
    reference: str
    rows: list[BenchRow] = field(default_factory=list)
    aggregates: dict[str, dict] = field(default_factory=dict)
    greedy_rules: dict = field(default_factory=dict)
    schedules: dict[str, dict[str, dict]] = field(default_factory=dict)
    gantt: dict[str, dict[str, dict]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "methods": list(self.methods),
            "repeats": self.repeats,
            "seed": self.seed,
            "reference": self.reference,
            "rows": [r.to_json() for r in self.rows],
            "aggregates": self.aggregates,
            "greedy_rules": self.greedy_rules,
            "schedules": self.schedules,
            "gantt": self.gantt,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")


def load_suite(suite: str | Path | Sequence[InstanceSpec]) -> tuple[str, tuple[InstanceSpec, ...]]:
    """Resolve a suite argument: ``"kim"``, a directory of instance JSON
    files, a single instance file, or an in-memory sequence of specs."""
    if not isinstance(suite, (str, Path)):
        specs = tuple(suite)
        return "custom", specs
    if str(suite) == "kim":
        return "kim", kim_all()
    path = Path(suite)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise FileNotFoundError(f"no *.json instances in {path}")
        return path.name, tuple(load_instance(f) for f in files)
    if path.is_file():
        return path.stem, (load_instance(path),)
    raise FileNotFoundError(f"suite {suite!r} is neither 'kim', a directory, nor a file")


def _parse_greedy_method(method: str) -> tuple[str, str] | None:
    """``greedy:mwkr/spt`` -> ("mwkr", "spt"); plain ``greedy`` -> None."""
    if method == "greedy":
        return None
    rules = method.split(":", 1)[1]
    op_rule, _, machine_rule = rules.partition("/")
    if op_rule not in OP_RULES or machine_rule not in MACHINE_RULES:
        raise ValueError(
            f"unknown greedy rules {rules!r}; expected one of "
            f"{OP_RULES} x {MACHINE_RULES}"
        )
    return op_rule, machine_rule


def _known_method(method: str) -> bool:
    return (
        method in LOCAL_METHODS
        or method in AGENT_METHODS
        or method.startswith("greedy:")
    )


def _bench_instance(
    spec: InstanceSpec,
    index: int,
    methods: Sequence[str],
    repeats: int,
    seed: int,
    oracle_limits: OracleLimits | None,
) -> dict:
    """All local methods on one instance.  Returns a plain dict so it can
    cross process boundaries."""
    out: dict = {"instance": spec.name, "rows": [], "schedules": {}, "rules": None}

    def emit(method: str, makespan, seconds: float, note: str = "",
             schedule: Schedule | None = None) -> None:
        out["rows"].append((method, makespan, round(seconds, 3), note))
        if schedule is not None:
            out["schedules"][method] = schedule_to_json(schedule, spec)

    for method in methods:
        t0 = time.monotonic()
        if method == "lower-bound":
            emit(method, instance_lower_bound(spec), time.monotonic() - t0)
        elif method == "oracle":
            try:
                result = brute_force_optimum(spec, limits=oracle_limits)
            except OracleLimitError as exc:
                emit(method, None, time.monotonic() - t0, f"skipped: {exc}")
            else:
                emit(method, result.makespan, time.monotonic() - t0,
                     schedule=result.schedule)
        elif method in ("random", "no-wait-random"):
            rng = np.random.default_rng([seed, _ROLLOUT_SALT, index])
            include_wait = method == "random"
            best = None
            for _ in range(repeats):
                r = random_rollout(spec, rng, include_wait=include_wait)
                if best is None or r.makespan < best.makespan:
                    best = r
            emit(method, best.makespan, time.monotonic() - t0,
                 schedule=best.schedule)
        elif method == "greedy":
            results = best_greedy(spec, repeats=repeats, seed=seed)
            winner = min(results.values(), key=lambda r: r.makespan)
            emit(method, winner.makespan, time.monotonic() - t0,
                 schedule=winner.schedule)
            out["rules"] = {
                f"{o}/{m}": {"best": r.makespan, "mean": round(r.mean_makespan, 2)}
                for (o, m), r in results.items()
            }
        elif method.startswith("greedy:"):
            op_rule, machine_rule = _parse_greedy_method(method)
            r = run_greedy(spec, op_rule, machine_rule, repeats=repeats, seed=seed)
            emit(method, r.makespan, time.monotonic() - t0, schedule=r.schedule)
        else:  # agent methods are handled by the caller
            raise ValueError(f"unknown method {method!r}")
    return out


def _run_agent_method(
    specs: Sequence[InstanceSpec],
    method: str,
    repeats: int,
    agent_cmd: str,
) -> list[dict]:
    """Serve the suite to an external agent over stdio, one serve call per
    instance so wall time and best-of-N are attributed per instance."""
    episodes = 1 if method == "drl-g" else repeats
    proc = subprocess.Popen(
        shlex.split(agent_cmd),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    results = []
    try:
        for spec in specs:
            t0 = time.monotonic()
            stats = serve(spec, proc.stdout, proc.stdin,
                          ServeOptions(episodes=episodes))
            seconds = round(time.monotonic() - t0, 3)
            if stats.episodes < episodes:
                results.append({"instance": spec.name, "rows": [
                    (method, None, seconds, "skipped: agent hung up")],
                    "schedules": {}, "rules": None})
                break
            best = int(np.argmin(stats.makespans))
            results.append({"instance": spec.name, "rows": [
                (method, stats.makespans[best], seconds, "")],
                "schedules": {method: stats.schedules[best]}, "rules": None})
    finally:
        if proc.stdin:
            proc.stdin.close()
        proc.wait(timeout=30)
    return results


def run_bench(
    suite: str | Path | Sequence[InstanceSpec],
    methods: Sequence[str],
    *,
    repeats: int = 50,
    seed: int = 0,
    reference: str | None = None,
    agent_cmd: str | None = None,
    oracle_limits: OracleLimits | None = OracleLimits(),
    workers: int = 1,
    include_gantt: bool = True,
) -> BenchReport:
    """Run every method over every instance and assemble the report.

    ``reference`` defaults to ``oracle`` when requested as a method,
    otherwise ``lower-bound``; the reference column is always computed.
    Local methods fan out over a process pool when ``workers > 1``; agent
    methods always run sequentially against one spawned agent.
    """
    suite_name, specs = load_suite(suite)
    methods = tuple(methods)
    for m in methods:
        if not _known_method(m):
            raise ValueError(f"unknown method {m!r}")
        if m.startswith("greedy:"):
            _parse_greedy_method(m)
    if reference is None:
        reference = "oracle" if "oracle" in methods else "lower-bound"
    if reference != "lower-bound" and reference not in methods:
        raise ValueError(f"reference {reference!r} is not one of the methods")

    local = [m for m in methods if m not in AGENT_METHODS]
    if reference == "lower-bound" and "lower-bound" not in local:
        local = ["lower-bound", *local]
    agent_methods = [m for m in methods if m in AGENT_METHODS]

    per_instance: dict[str, dict] = {
        spec.name: {"rows": [], "schedules": {}, "rules": None} for spec in specs
    }

    def absorb(result: dict) -> None:
        slot = per_instance[result["instance"]]
        slot["rows"].extend(result["rows"])
        slot["schedules"].update(result["schedules"])
        if result["rules"] is not None:
            slot["rules"] = result["rules"]

    if local:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_bench_instance, spec, i, local, repeats, seed,
                                oracle_limits)
                    for i, spec in enumerate(specs)
                ]
                for fut in futures:
                    absorb(fut.result())
        else:
            for i, spec in enumerate(specs):
                absorb(_bench_instance(spec, i, local, repeats, seed, oracle_limits))

    for method in agent_methods:
        if not agent_cmd:
            for spec in specs:
                absorb({"instance": spec.name, "rows": [
                    (method, None, 0.0, "skipped: no connected agent")],
                    "schedules": {}, "rules": None})
        else:
            for result in _run_agent_method(specs, method, repeats, agent_cmd):
                absorb(result)

    report = BenchReport(
        suite=suite_name,
        methods=methods,
        repeats=repeats,
        seed=seed,
        reference=reference,
    )
    ref_column: dict[str, int | None] = {}
    for spec in specs:
        slot = per_instance[spec.name]
        ref_column[spec.name] = next(
            (mk for m, mk, _, _ in slot["rows"] if m == reference and mk is not None),
            None,
        )
    for spec in specs:
        slot = per_instance[spec.name]
        ref = ref_column[spec.name]
        for method, mk, seconds, note in slot["rows"]:
            if method not in methods:
                continue  # implicit reference column stays out of the table
            gap = None
            if mk is not None and ref:
                gap = round((mk - ref) / ref, 4)
            report.rows.append(BenchRow(spec.name, method, mk, seconds, gap, note))
        if slot["schedules"]:
            report.schedules[spec.name] = slot["schedules"]
            if include_gantt:
                report.gantt[spec.name] = {
                    m: gantt_data(schedule_from_json(sj, spec), spec)
                    for m, sj in slot["schedules"].items()
                }

    for method in methods:
        rows = [r for r in report.rows if r.method == method and r.makespan is not None]
        if not rows:
            report.aggregates[method] = {"instances": 0}
            continue
        gaps = [r.gap for r in rows if r.gap is not None]
        report.aggregates[method] = {
            "instances": len(rows),
            "mean_makespan": round(sum(r.makespan for r in rows) / len(rows), 2),
            "mean_seconds": round(sum(r.seconds for r in rows) / len(rows), 3),
            "mean_gap": round(sum(gaps) / len(gaps), 4) if gaps else None,
        }

    if "greedy" in methods:
        tables = {
            spec.name: per_instance[spec.name]["rules"]
            for spec in specs
            if per_instance[spec.name]["rules"]
        }
        if tables:
            pair_names = sorted(next(iter(tables.values())))
            pair_means = {
                p: round(sum(t[p]["best"] for t in tables.values()) / len(tables), 2)
                for p in pair_names
            }
            best_one = min(pair_means, key=pair_means.get)
            best_choice = {
                name: min(t[p]["best"] for p in pair_names) for name, t in tables.items()
            }
            report.greedy_rules = {
                "per_instance": tables,
                "pair_means": pair_means,
                "best_one": {"rule": best_one, "mean": pair_means[best_one]},
                "best_choice": best_choice,
                "best_choice_mean": round(sum(best_choice.values()) / len(best_choice), 2),
            }
    return report
