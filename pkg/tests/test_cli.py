import json
import subprocess
import sys

import pytest

from conftest import tiny_instance

from ipps import (
    Action,
    Schedule,
    ScheduleRecord,
    build_milp,
    dump_instance,
    load_instance,
    schedule_from_json,
    schedule_to_json,
    solve_instance,
    validate_instance,
    validate_schedule,
    write_lp,
)
from ipps.cli import main
from ipps.fixtures import toy as load_toy
from ipps.milp import solve_lp


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def json_lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


class TestCombinations:
    def test_toy(self, capsys):
        code, out, _ = run_cli(capsys, "combinations", "toy")
        assert code == 0
        lines = json_lines(out)
        assert [l["job"] for l in lines] == [0, 1]
        assert all(l["count"] == 1 for l in lines)
        assert lines[0]["combinations"] == [[1, 2]]
        assert lines[1]["combinations"] == [[1]]

    def test_bundled_benchmark_name(self, capsys):
        code, out, _ = run_cli(capsys, "combinations", "kim-problem01")
        assert code == 0
        assert len(json_lines(out)) == 6  # six-job problem

    def test_unknown_instance_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["combinations", "definitely-not-a-file"])
        assert exc_info.value.code == 2


class TestRollout:
    def test_lines_and_reward_identity(self, capsys):
        code, out, _ = run_cli(capsys, "rollout", "toy", "--seeds", "3")
        assert code == 0
        lines = json_lines(out)
        assert [l["seed"] for l in lines] == [0, 1, 2]
        for line in lines:
            assert line["policy"] == "random"
            assert line["total_reward"] == -line["makespan"]
            assert line["steps"] >= 3

    def test_deterministic(self, capsys):
        _, first, _ = run_cli(capsys, "rollout", "toy", "--seeds", "2", "--seed", "7")
        _, second, _ = run_cli(capsys, "rollout", "toy", "--seeds", "2", "--seed", "7")
        assert first == second

    def test_no_wait_policy_and_estimated_reward(self, capsys):
        code, out, _ = run_cli(
            capsys, "rollout", "toy",
            "--policy", "no-wait-random", "--reward", "est:mean/mean/max",
        )
        assert code == 0
        line = json_lines(out)[0]
        assert line["policy"] == "no-wait-random"

    def test_bad_reward_exits_2(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["rollout", "toy", "--reward", "bogus"])
        assert exc_info.value.code == 2


class TestGreedy:
    def test_single_rule_json(self, capsys):
        code, out, _ = run_cli(
            capsys, "greedy", "toy",
            "--op-rule", "fifo", "--machine-rule", "spt", "--repeats", "3",
        )
        assert code == 0
        data = json.loads(out)
        assert data["op_rule"] == "fifo"
        assert data["machine_rule"] == "spt"
        assert data["makespan"] >= 3
        toy = load_toy()
        sched = schedule_from_json(data["schedule"], toy)
        assert validate_schedule(toy, sched).ok

    def test_all_rules_table(self, capsys):
        code, out, _ = run_cli(capsys, "greedy", "toy", "--all-rules",
                               "--repeats", "2")
        assert code == 0
        for token in ("mwkr", "muhammad", "spt", "lum", "best one", "best choice"):
            assert token in out


class TestGenerate:
    def test_stdout_single(self, capsys):
        code, out, _ = run_cli(capsys, "generate", "--jobs", "2",
                               "--machines", "3", "--seed", "5")
        assert code == 0
        doc = json.loads(out)
        assert len(doc["jobs"]) == 2
        assert doc["machines"] == 3

    def test_file_output_validates(self, capsys, tmp_path):
        out_file = tmp_path / "gen.json"
        code, _, _ = run_cli(capsys, "generate", "--jobs", "3", "--machines", "4",
                             "--seed", "1", "-o", str(out_file))
        assert code == 0
        spec = load_instance(out_file)
        validate_instance(spec)
        assert len(spec.jobs) == 3

    def test_reproducible(self, capsys):
        _, a, _ = run_cli(capsys, "generate", "--jobs", "2", "--machines", "2",
                          "--seed", "9")
        _, b, _ = run_cli(capsys, "generate", "--jobs", "2", "--machines", "2",
                          "--seed", "9")
        assert a == b

    def test_config_overrides(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"or_groups": [0, 0], "main_ops": [2, 2]}))
        code, out, _ = run_cli(capsys, "generate", "--jobs", "1", "--machines", "2",
                               "--cfg", str(cfg))
        assert code == 0
        doc = json.loads(out)
        kinds = [op.get("kind", "op") for op in doc["jobs"][0]["ops"]]
        assert kinds.count("op") == 2

    def test_batch(self, capsys, tmp_path):
        out_dir = tmp_path / "batch"
        code, _, _ = run_cli(
            capsys, "generate", "--batch", "2", "--sizes", "2x2", "3x2",
            "--seed", "4", "-o", str(out_dir),
        )
        assert code == 0
        files = sorted(p.name for p in out_dir.glob("*.json"))
        assert len(files) == 4  # 2 sizes x 2 instances
        for f in out_dir.glob("*.json"):
            validate_instance(load_instance(f))


class TestMilpCommands:
    def test_export(self, capsys, tmp_path):
        out_file = tmp_path / "toy.lp"
        code, _, _ = run_cli(capsys, "export-milp", "toy", "-o", str(out_file))
        assert code == 0
        assert out_file.read_text() == write_lp(build_milp(load_toy()))

    def test_check_accepts_valid(self, capsys, tmp_path):
        toy = load_toy()
        sol = solve_lp(write_lp(build_milp(toy)))
        sol_file = tmp_path / "sol.json"
        sol_file.write_text(json.dumps(
            {"objective": sol.objective, "variables": sol.values}
        ))
        code, out, _ = run_cli(capsys, "check-milp", "toy", str(sol_file))
        assert code == 0
        report = json.loads(out)
        assert report["feasible"] is True
        assert report["makespan"] == 3

    def test_check_rejects_corrupt(self, capsys, tmp_path):
        toy = load_toy()
        sol = solve_lp(write_lp(build_milp(toy)))
        broken = {k: 0.0 for k in sol.values}
        sol_file = tmp_path / "sol.json"
        sol_file.write_text(json.dumps({"variables": broken}))
        code, out, _ = run_cli(capsys, "check-milp", "toy", str(sol_file))
        assert code == 1
        report = json.loads(out)
        assert report["feasible"] is False
        assert report["problems"]


class TestOracleCommands:
    def test_oracle_waiting(self, capsys):
        code, out, _ = run_cli(capsys, "oracle", "toy")
        assert code == 0
        data = json.loads(out)
        assert data["makespan"] == 3
        assert data["allow_wait"] is True
        assert data["states"] > 0

    def test_oracle_no_wait(self, capsys):
        code, out, _ = run_cli(capsys, "oracle", "toy", "--no-wait")
        data = json.loads(out)
        assert data["makespan"] == 4
        assert data["allow_wait"] is False

    def test_canonicalize(self, capsys, tmp_path):
        toy = load_toy()
        delayed = Schedule([
            ScheduleRecord(0, 1, 0, 1, 2),
            ScheduleRecord(1, 1, 1, 0, 2),
            ScheduleRecord(0, 2, 1, 4, 5),
        ])
        sched_file = tmp_path / "sched.json"
        sched_file.write_text(json.dumps(schedule_to_json(delayed, toy)))
        code, out, _ = run_cli(capsys, "canonicalize", "toy", str(sched_file))
        assert code == 0
        data = json.loads(out)
        assert data["makespan"] == 3
        canon = schedule_from_json(data, toy)
        assert validate_schedule(toy, canon).makespan == 3

    def test_canonicalize_infeasible_exits_1(self, capsys, tmp_path):
        toy = load_toy()
        bad = Schedule([
            ScheduleRecord(0, 1, 0, 0, 1),
            ScheduleRecord(1, 1, 0, 0, 4),
            ScheduleRecord(0, 2, 1, 1, 2),
        ])
        sched_file = tmp_path / "sched.json"
        sched_file.write_text(json.dumps(schedule_to_json(bad, toy)))
        code, _, err = run_cli(capsys, "canonicalize", "toy", str(sched_file))
        assert code == 1
        assert "error" in err


class TestBenchCommand:
    def test_text_and_report(self, capsys, tmp_path):
        suite_dir = tmp_path / "suite"
        suite_dir.mkdir()
        for i in range(2):
            dump_instance(tiny_instance(i), suite_dir / f"i{i}.json")
        report_file = tmp_path / "report.json"
        code, out, _ = run_cli(
            capsys, "bench", "--suite", str(suite_dir),
            "--methods", "oracle,greedy,random",
            "--repeats", "2", "-o", str(report_file),
        )
        assert code == 0
        assert "oracle" in out and "greedy" in out and "random" in out
        assert "mean" in out
        data = json.loads(report_file.read_text())
        assert {r["method"] for r in data["rows"]} == {"oracle", "greedy", "random"}

    def test_bad_method_exits_2(self, tmp_path, capsys):
        suite_dir = tmp_path / "suite"
        suite_dir.mkdir()
        dump_instance(tiny_instance(0), suite_dir / "i0.json")
        with pytest.raises(SystemExit) as exc_info:
            main(["bench", "--suite", str(suite_dir), "--methods", "magic"])
        assert exc_info.value.code == 2


class TestServeCommand:
    def test_stdio_episode(self):
        proc = subprocess.Popen(
            [sys.executable, "-c",
             "from ipps.cli import main; raise SystemExit(main())",
             "serve", "toy", "--episodes", "1"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            terminal = None
            while True:
                line = proc.stdout.readline()
                assert line, "server closed stdout before terminal"
                msg = json.loads(line)
                if msg["type"] == "hello":
                    assert msg["schema"] == 1
                    continue
                if msg["type"] == "terminal":
                    terminal = msg
                    break
                assert msg["type"] == "state"
                pairs = msg["mask"]["pairs"]
                act = {"type": "act", "seq": msg["seq"]}
                if pairs:
                    act["pair"] = pairs[0]
                else:
                    act["wait"] = True
                proc.stdin.write(json.dumps(act) + "\n")
                proc.stdin.flush()
            proc.stdin.close()
            code = proc.wait(timeout=30)
            stderr = proc.stderr.read()
        finally:
            proc.kill()
        assert terminal["makespan"] >= 3
        assert code == 0
        assert "served 1 episode(s)" in stderr
