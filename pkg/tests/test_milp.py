import pytest

from conftest import tiny_instance
from test_model import OR_JOB, inst

from ipps import (
    ScheduleFormatError,
    brute_force_optimum,
    build_milp,
    check_solution,
    export_milp,
    parse_instance,
    parse_lp,
    solve_instance,
    validate_schedule,
    write_lp,
)
from ipps.milp import extract_schedule, solve_lp


def toy_solution(toy):
    sol = solve_lp(write_lp(build_milp(toy)))
    return sol.values


class TestBuild:
    def test_toy_big_m(self, toy):
        # 1 + max-time sum over regular ops: 1 + (1 + 3 + 4)
        assert build_milp(toy).big_m == 9

    def test_variable_families(self, toy):
        model = build_milp(toy)
        names = set(model.variables)
        assert "M" in names
        assert "Y_0_0" in names                     # one combination per job
        assert any(n.startswith("X_") for n in names)
        assert any(n.startswith("C_") for n in names)
        assert all(n.startswith(("Y_", "X_", "W_")) for n in model.binaries)
        assert "M" not in model.binaries

    def test_or_job_gets_combination_rows(self):
        spec = parse_instance(inst([OR_JOB]))
        model = build_milp(spec)
        assert {"Y_0_0", "Y_0_1"} <= set(model.variables)
        # exactly-one row over the two combinations
        assert ({"Y_0_0": 1, "Y_0_1": 1}, "=", 1) in model.rows


class TestText:
    def test_deterministic_export(self, toy):
        assert write_lp(build_milp(toy)) == write_lp(build_milp(toy))

    def test_sections_present(self, toy):
        text = write_lp(build_milp(toy))
        for token in ("Minimize", "obj: M", "Subject To", "Binary", "End"):
            assert token in text

    def test_parse_round_trip(self, toy):
        model = build_milp(toy)
        parsed = parse_lp(write_lp(model))
        assert set(parsed.variables) == set(model.variables)
        assert parsed.binaries == model.binaries
        assert parsed.objective == {"M": 1}
        assert len(parsed.rows) == len(model.rows)
        assert [(dict(t), s, r) for t, s, r in parsed.rows] == [
            (dict(t), s, r) for t, s, r in model.rows
        ]

    def test_export_file_matches(self, toy, tmp_path):
        path = tmp_path / "toy.lp"
        export_milp(toy, path)
        assert path.read_text(encoding="utf-8") == write_lp(build_milp(toy))


class TestSolve:
    def test_toy_optimum(self, toy):
        makespan, schedule = solve_instance(toy)
        assert makespan == 3
        report = validate_schedule(toy, schedule)
        assert report.ok and report.makespan == 3

    def test_or_instance_matches_oracle(self):
        spec = parse_instance(inst([OR_JOB]))
        makespan, schedule = solve_instance(spec)
        assert makespan == brute_force_optimum(spec).makespan
        assert validate_schedule(spec, schedule).ok

    @pytest.mark.parametrize("seed", range(4))
    def test_generated_match_oracle(self, seed):
        spec = tiny_instance(seed)
        makespan, schedule = solve_instance(spec)
        assert makespan == brute_force_optimum(spec).makespan
        assert validate_schedule(spec, schedule).ok


class TestExtract:
    def test_needs_unique_combination(self, toy):
        values = toy_solution(toy)
        broken = {k: (0.0 if k.startswith("Y_0_") else v) for k, v in values.items()}
        with pytest.raises(ScheduleFormatError, match="combination"):
            extract_schedule(toy, broken)

    def test_needs_unique_machine(self, toy):
        values = toy_solution(toy)
        broken = dict(values)
        for k in values:
            if k.startswith("X_0_0_1_"):
                broken[k] = 1.0  # both machine picks on
        with pytest.raises(ScheduleFormatError, match="machine"):
            extract_schedule(toy, broken)


class TestCheckSolution:
    def test_accepts_solver_output(self, toy):
        values = toy_solution(toy)
        check = check_solution(toy, {"variables": values, "objective": 3})
        assert check.feasible and bool(check)
        assert check.makespan == 3
        assert check.objective_consistent is True
        assert check.problems == ()
        assert validate_schedule(toy, check.schedule).ok

    def test_accepts_flat_mapping(self, toy):
        check = check_solution(toy, toy_solution(toy))
        assert check.feasible
        assert check.objective == pytest.approx(3)  # falls back to the M variable

    def test_wrong_objective_flagged(self, toy):
        check = check_solution(toy, {"variables": toy_solution(toy), "objective": 7})
        assert not check.feasible
        assert check.objective_consistent is False
        assert any("objective" in p for p in check.problems)

    def test_reconstruction_failure_reported(self, toy):
        values = {k: 0.0 for k in toy_solution(toy)}
        check = check_solution(toy, values)
        assert not check.feasible
        assert check.makespan is None
        assert any("reconstruction failed" in p for p in check.problems)

    def test_overlap_flagged(self, toy):
        values = toy_solution(toy)
        # pull every completion to the same instant: machine exclusivity breaks
        forged = {
            k: (2.0 if k.startswith("C_") else v) for k, v in values.items()
        }
        forged["M"] = 2.0
        check = check_solution(toy, forged)
        assert not check.feasible
        assert check.problems
