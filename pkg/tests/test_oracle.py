import pytest

from conftest import tiny_instance
from helpers import exhaustive_min_makespan
from test_model import OR_JOB, inst

from ipps import (
    InfeasibleScheduleError,
    OracleLimitError,
    OracleLimits,
    ReplayError,
    Schedule,
    ScheduleRecord,
    brute_force_optimum,
    canonicalize,
    parse_instance,
    random_rollout,
    replay_schedule,
    validate_schedule,
)

TOY_OPT_SCHEDULE = Schedule(
    [
        ScheduleRecord(0, 1, 0, 0, 1),
        ScheduleRecord(1, 1, 1, 0, 2),
        ScheduleRecord(0, 2, 1, 2, 3),
    ]
)


class TestBruteForce:
    def test_toy_with_waiting(self, toy):
        result = brute_force_optimum(toy)
        assert result.makespan == 3
        assert result.states > 0
        report = validate_schedule(toy, result.schedule)
        assert report.ok and report.makespan == 3

    def test_toy_without_waiting(self, toy):
        result = brute_force_optimum(toy, allow_wait=False)
        assert result.makespan == 4
        assert validate_schedule(toy, result.schedule).ok

    def test_or_instance(self):
        spec = parse_instance(inst([OR_JOB]))
        result = brute_force_optimum(spec)
        # branch B is the single op 4 (time 1 on m1); 1 + 1 + 1 beats 1 + 1 + 2 + 1
        assert result.makespan == exhaustive_min_makespan(spec)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_search(self, seed):
        spec = tiny_instance(seed)
        assert brute_force_optimum(spec).makespan == exhaustive_min_makespan(spec)

    @pytest.mark.parametrize("seed", range(4))
    def test_no_wait_matches_exhaustive(self, seed):
        spec = tiny_instance(seed)
        got = brute_force_optimum(spec, allow_wait=False).makespan
        assert got == exhaustive_min_makespan(spec, allow_wait=False)

    def test_waiting_never_hurts(self, toy):
        for seed in range(6):
            spec = tiny_instance(seed)
            with_wait = brute_force_optimum(spec).makespan
            without = brute_force_optimum(spec, allow_wait=False).makespan
            assert with_wait <= without


class TestLimits:
    def test_too_many_ops(self):
        spec = tiny_instance(0, jobs=2, machines=3)
        with pytest.raises(OracleLimitError, match="regular ops"):
            brute_force_optimum(spec, limits=OracleLimits(max_regular_ops=1))

    def test_too_many_machines(self):
        spec = tiny_instance(0, jobs=2, machines=3)
        with pytest.raises(OracleLimitError, match="machines"):
            brute_force_optimum(spec, limits=OracleLimits(max_machines=2))

    def test_combination_cap(self):
        spec = parse_instance(inst([OR_JOB]))
        with pytest.raises(OracleLimitError, match="combinations"):
            brute_force_optimum(spec, limits=OracleLimits(max_combinations=1))

    def test_limits_none_bypasses(self, toy):
        assert brute_force_optimum(toy, limits=None).makespan == 3


class TestCanonicalize:
    def test_identity_on_canonical(self, toy):
        assert canonicalize(toy, TOY_OPT_SCHEDULE) == TOY_OPT_SCHEDULE

    def test_left_shifts_delayed_records(self, toy):
        delayed = Schedule(
            [
                ScheduleRecord(0, 1, 0, 1, 2),   # could start at 0
                ScheduleRecord(1, 1, 1, 0, 2),
                ScheduleRecord(0, 2, 1, 4, 5),   # could start at 2
            ]
        )
        assert canonicalize(toy, delayed) == TOY_OPT_SCHEDULE

    def test_uniform_shift_recovers(self, toy):
        shifted = Schedule(
            [
                ScheduleRecord(r.job_id, r.op_id, r.machine, r.start + 7, r.end + 7)
                for r in TOY_OPT_SCHEDULE
            ]
        )
        assert canonicalize(toy, shifted) == TOY_OPT_SCHEDULE

    def test_idempotent_and_non_increasing(self):
        for seed in range(10):
            spec = tiny_instance(seed)
            schedule = random_rollout(spec, seed=seed).schedule
            before = validate_schedule(spec, schedule).makespan
            canon = canonicalize(spec, schedule)
            after = validate_schedule(spec, canon).makespan
            assert after <= before
            assert canonicalize(spec, canon) == canon

    def test_every_start_is_zero_or_an_end(self):
        for seed in range(10):
            spec = tiny_instance(seed)
            canon = canonicalize(spec, random_rollout(spec, seed=seed).schedule)
            ends = {r.end for r in canon}
            assert all(r.start == 0 or r.start in ends for r in canon)

    def test_rejects_infeasible(self, toy):
        overlapping = Schedule(
            [
                ScheduleRecord(0, 1, 0, 0, 1),
                ScheduleRecord(1, 1, 0, 0, 4),   # same machine, overlapping
                ScheduleRecord(0, 2, 1, 1, 2),
            ]
        )
        with pytest.raises(InfeasibleScheduleError):
            canonicalize(toy, overlapping)


class TestReplay:
    def test_replays_optimal(self, toy):
        result = replay_schedule(toy, TOY_OPT_SCHEDULE)
        assert result.makespan == 3
        assert result.total_reward == -3
        assert set(result.schedule) == set(TOY_OPT_SCHEDULE)

    def test_rejects_non_decision_start(self, toy):
        delayed = Schedule(
            [
                ScheduleRecord(0, 1, 0, 1, 2),   # 1 is not a decision point
                ScheduleRecord(1, 1, 1, 0, 2),
                ScheduleRecord(0, 2, 1, 4, 5),
            ]
        )
        with pytest.raises(ReplayError):
            replay_schedule(toy, delayed)

    def test_canonicalized_rollouts_replay(self):
        for seed in range(10):
            spec = tiny_instance(seed)
            canon = canonicalize(spec, random_rollout(spec, seed=seed).schedule)
            result = replay_schedule(spec, canon)
            assert set(result.schedule) == set(canon)
            assert result.makespan == validate_schedule(spec, canon).makespan

    def test_oracle_schedule_replays_to_optimum(self):
        for seed in range(6):
            spec = tiny_instance(seed)
            best = brute_force_optimum(spec)
            assert replay_schedule(spec, best.schedule).makespan == best.makespan
