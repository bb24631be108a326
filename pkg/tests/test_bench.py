import json
import sys
import textwrap

import pytest

from conftest import TINY_CONFIG, tiny_instance

from ipps import (
    BenchReport,
    brute_force_optimum,
    dump_instance,
    instance_lower_bound,
    load_suite,
    run_bench,
    schedule_from_json,
    validate_schedule,
)

SUITE = [tiny_instance(s) for s in range(3)]

FIRST_PAIR_AGENT = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        msg = json.loads(line)
        if msg.get("type") != "state":
            continue
        pairs = msg["mask"]["pairs"]
        act = {"type": "act", "seq": msg["seq"]}
        if pairs:
            act["pair"] = pairs[0]
        else:
            act["wait"] = True
        print(json.dumps(act), flush=True)
    """
)


class TestLoadSuite:
    def test_in_memory(self):
        name, specs = load_suite(SUITE)
        assert name == "custom"
        assert specs == tuple(SUITE)

    def test_kim(self):
        name, specs = load_suite("kim")
        assert name == "kim"
        assert len(specs) == 24

    def test_directory_and_file(self, tmp_path):
        for i, spec in enumerate(SUITE):
            dump_instance(spec, tmp_path / f"i{i}.json")
        name, specs = load_suite(tmp_path)
        assert name == tmp_path.name
        assert len(specs) == 3
        name, single = load_suite(tmp_path / "i1.json")
        assert name == "i1"
        assert len(single) == 1

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_suite(tmp_path / "nope")
        with pytest.raises(FileNotFoundError):
            load_suite(tmp_path)  # empty directory


@pytest.fixture(scope="module")
def report():
    return run_bench(
        SUITE,
        ["oracle", "random", "no-wait-random", "greedy", "greedy:fifo/spt"],
        repeats=4,
        seed=0,
    )


class TestLocalMethods:
    def test_rows_cover_grid(self, report):
        methods = {r.method for r in report.rows}
        assert methods == {
            "oracle", "random", "no-wait-random", "greedy", "greedy:fifo/spt",
        }
        per_method = {m: [r for r in report.rows if r.method == m] for m in methods}
        assert all(len(rows) == len(SUITE) for rows in per_method.values())

    def test_reference_defaults_to_oracle(self, report):
        assert report.reference == "oracle"
        for row in report.rows:
            if row.method == "oracle":
                assert row.gap == 0.0

    def test_gaps_nonnegative_vs_oracle(self, report):
        for row in report.rows:
            assert row.makespan is not None
            assert row.gap is not None and row.gap >= -1e-9

    def test_oracle_rows_match_direct_solve(self, report):
        for i, spec in enumerate(SUITE):
            row = next(r for r in report.rows
                       if r.method == "oracle" and r.instance == spec.name)
            expected = brute_force_optimum(spec).makespan / spec.time_scale
            assert row.makespan == expected

    def test_aggregates(self, report):
        for method, agg in report.aggregates.items():
            rows = [r for r in report.rows if r.method == method]
            assert agg["instances"] == len(rows)
            mean = sum(r.makespan for r in rows) / len(rows)
            assert agg["mean_makespan"] == round(mean, 2)

    def test_schedules_replayable(self, report):
        for name, by_method in report.schedules.items():
            spec = next(s for s in SUITE if s.name == name)
            for sched_json in by_method.values():
                schedule = schedule_from_json(sched_json, spec)
                assert validate_schedule(spec, schedule).ok

    def test_greedy_rules_summary(self, report):
        block = report.greedy_rules
        assert block
        assert set(block["pair_means"]) >= {"mwkr/spt", "fifo/lum"}
        best_mean = min(block["pair_means"].values())
        assert block["best_one"]["rule"] in block["pair_means"]
        assert block["best_one"]["mean"] == best_mean
        # picking the best rule per instance can only improve on one rule
        assert block["best_choice_mean"] <= best_mean + 1e-9
        assert set(block["best_choice"]) == {s.name for s in SUITE}

    def test_report_round_trips_json(self, report, tmp_path):
        path = tmp_path / "report.json"
        report.save(path)
        data = json.loads(path.read_text())
        assert data["suite"] == report.suite
        assert data["reference"] == "oracle"
        assert len(data["rows"]) == len(report.rows)
        assert set(data["aggregates"]) == set(report.aggregates)


class TestFallbacks:
    def test_lower_bound_reference_without_oracle(self):
        report = run_bench(SUITE, ["greedy:mwkr/spt"], repeats=2)
        assert report.reference == "lower-bound"
        for row in report.rows:
            spec = next(s for s in SUITE if s.name == row.instance)
            lb = instance_lower_bound(spec) / spec.time_scale
            assert row.makespan >= lb - 1e-9
            assert row.gap == round((row.makespan - lb) / lb, 4)

    def test_lower_bound_method_rows(self):
        report = run_bench(SUITE, ["lower-bound"], repeats=1)
        for row in report.rows:
            spec = next(s for s in SUITE if s.name == row.instance)
            assert row.makespan == instance_lower_bound(spec) / spec.time_scale

    def test_oracle_envelope_skip(self):
        big = [tiny_instance(0, jobs=4, machines=3)]  # over the op budget
        report = run_bench(big, ["oracle", "greedy"], repeats=1)
        row = next(r for r in report.rows if r.method == "oracle")
        assert row.makespan is None
        assert "skipped" in row.note
        assert report.reference == "oracle"
        greedy_row = next(r for r in report.rows if r.method == "greedy")
        assert greedy_row.gap is None  # no reference value on this instance

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="unknown method"):
            run_bench(SUITE, ["simulated-annealing"])
        with pytest.raises(ValueError, match="rule"):
            run_bench(SUITE, ["greedy:bogus/spt"])

    def test_bad_reference_rejected(self):
        with pytest.raises(ValueError, match="reference"):
            run_bench(SUITE, ["greedy"], reference="oracle")

    def test_workers_deterministic(self):
        seq = run_bench(SUITE, ["random", "greedy"], repeats=3, seed=5, workers=1)
        par = run_bench(SUITE, ["random", "greedy"], repeats=3, seed=5, workers=3)
        key = lambda rows: sorted((r.instance, r.method, r.makespan) for r in rows)
        assert key(seq.rows) == key(par.rows)


class TestAgentMethods:
    def test_drl_g_with_scripted_agent(self, tmp_path):
        agent = tmp_path / "agent.py"
        agent.write_text(FIRST_PAIR_AGENT)
        report = run_bench(
            SUITE[:2],
            ["drl-g", "greedy"],
            repeats=2,
            agent_cmd=f"{sys.executable} {agent}",
        )
        rows = [r for r in report.rows if r.method == "drl-g"]
        assert len(rows) == 2
        for row in rows:
            assert row.makespan is not None
            spec = next(s for s in SUITE if s.name == row.instance)
            sched = schedule_from_json(report.schedules[row.instance]["drl-g"], spec)
            assert validate_schedule(spec, sched).ok

    def test_drl_s_takes_best_of_repeats(self, tmp_path):
        agent = tmp_path / "agent.py"
        agent.write_text(FIRST_PAIR_AGENT)
        report = run_bench(
            SUITE[:1],
            ["drl-s"],
            repeats=3,
            agent_cmd=f"{sys.executable} {agent}",
        )
        row = report.rows[0]
        assert row.makespan is not None

    def test_agent_methods_skip_without_command(self):
        report = run_bench(SUITE[:1], ["drl-g"], repeats=1)
        row = report.rows[0]
        assert row.makespan is None
        assert "skipped" in row.note

    def test_agent_hangup_noted(self, tmp_path):
        agent = tmp_path / "dead.py"
        agent.write_text("import sys; sys.exit(0)\n")
        report = run_bench(
            SUITE[:1],
            ["drl-g"],
            repeats=1,
            agent_cmd=f"{sys.executable} {agent}",
        )
        row = report.rows[0]
        assert row.makespan is None
        assert "hung up" in row.note
