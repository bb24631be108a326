import json

import numpy as np
import pytest

from conftest import tiny_instance

from ipps import (
    COMBINATION_FEATURES,
    JOB_FEATURES,
    MACHINE_FEATURES,
    OP_FEATURES,
    Action,
    GraphSnapshot,
    SchedulingEnv,
    WAIT,
    encode,
    parse_instance,
)
from test_model import inst, j

F_OP = {name: i for i, name in enumerate(OP_FEATURES)}
F_MACH = {name: i for i, name in enumerate(MACHINE_FEATURES)}


def run_to_end(env, rng):
    snaps = [encode(env)]
    while not env.done:
        space = env.action_space()
        env.step(space.all[int(rng.integers(len(space.all)))])
        snaps.append(encode(env))
    return snaps


class TestToyInitialState:
    @pytest.fixture()
    def snap(self, toy):
        return encode(SchedulingEnv(toy))

    def test_scalars(self, snap):
        assert snap.clock == 0.0
        assert snap.done is False
        assert snap.reward is None

    def test_nodes(self, snap):
        assert snap.op_ids == ((0, 1), (0, 2), (1, 1))
        assert snap.machine_ids == (0, 1)
        assert snap.combination_ids == ((0, 0), (1, 0))
        assert snap.job_ids == (0, 1)
        assert snap.node_counts == {"op": 3, "machine": 2, "combination": 2, "job": 2}

    def test_op_features(self, snap):
        assert snap.op_features[0] == (0.0, 0.0, 1.0, 0.0, 0.0)  # (0,1) ready
        assert snap.op_features[1] == (1.0, 0.0, 0.0, 0.0, 0.0)  # (0,2) gated
        assert snap.op_features[2] == (0.0, 0.0, 1.0, 0.0, 0.0)  # (1,1) ready

    def test_machine_features(self, snap):
        for feat in snap.machine_features:
            assert feat == (3.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def test_edges(self, snap):
        assert snap.op_op_edges == ((0, 1),)
        assert snap.op_combination_edges == ((0, 0), (1, 0), (2, 1))
        assert snap.combination_job_edges == ((0, 0), (1, 1))
        assert set(snap.op_machine_edges) == {
            (0, 0, 1.0), (0, 1, 1.0),
            (1, 0, 3.0), (1, 1, 1.0),
            (2, 0, 4.0), (2, 1, 2.0),
        }

    def test_combination_and_job_features(self, snap):
        # single combination per job; each is its own floor
        assert snap.combination_features == ((3.0, 1.0), (3.0, 1.0))
        assert snap.job_features == ((1.0,), (1.0,))

    def test_mask(self, snap):
        assert set(snap.mask_pairs) == {
            (0, 1, 0), (0, 1, 1), (1, 1, 0), (1, 1, 1),
        }
        assert snap.wait_allowed is False
        assert snap.future_pairs == ()


class TestProgression:
    def test_in_progress_features(self, toy):
        env = SchedulingEnv(toy)
        env.step(Action(1, 1, 0))  # runs [0, 4) on machine 0
        snap = encode(env)
        i = snap.op_ids.index((1, 1))
        feat = snap.op_features[i]
        assert feat[F_OP["scheduled"]] == 1.0
        assert feat[F_OP["remaining_time"]] == 4.0
        m = snap.machine_ids.index(0)
        assert snap.machine_features[m][F_MACH["working"]] == 1.0
        assert snap.machine_features[m][F_MACH["idle_at"]] == 4.0
        # the scheduled pair is out of the mask
        assert (1, 1, 0) not in snap.mask_pairs
        assert snap.wait_allowed is True

    def test_waiting_time_accrues(self, toy):
        env = SchedulingEnv(toy)
        env.step(Action(1, 1, 0))   # ends at 4
        env.step(Action(0, 1, 1))   # ends at 1; auto-advance to 1
        assert env.clock == 1
        snap = encode(env)
        i = snap.op_ids.index((0, 2))
        # became pre-feasible at 0, the instant its predecessor started
        assert snap.op_features[i][F_OP["waiting_time"]] == 1.0
        env.step(WAIT)              # clock 4
        snap = encode(env)
        i = snap.op_ids.index((0, 2))
        assert snap.op_features[i][F_OP["waiting_time"]] == 4.0

    def test_future_pairs_cover_busy_machines(self, toy):
        env = SchedulingEnv(toy)
        env.step(Action(1, 1, 0))
        env.step(Action(0, 1, 1))   # auto-advance to 1; (0,2) feasible, m1... free
        snap = encode(env)
        # machine 0 runs to 4: the (0,2,m0) pair exists but is not actionable
        assert (0, 2, 0) in snap.future_pairs
        assert (0, 2, 1) in snap.mask_pairs
        assert set(snap.future_pairs).isdisjoint(snap.mask_pairs)

    def test_completed_ops_leave_graph(self, toy):
        env = SchedulingEnv(toy)
        env.step(Action(0, 1, 0))
        env.step(Action(1, 1, 1))   # auto-advance to 1: (0,1) done
        snap = encode(env)
        assert (0, 1) not in snap.op_ids
        assert (0, 2) in snap.op_ids

    def test_terminal_graph_is_empty(self, toy):
        env = SchedulingEnv(toy)
        rng = np.random.default_rng(0)
        run_to_end(env, rng)
        snap = encode(env)
        assert snap.done is True
        assert snap.node_counts == {"op": 0, "machine": 0, "combination": 0, "job": 0}
        assert snap.mask_pairs == () and snap.future_pairs == ()
        assert snap.wait_allowed is False


class TestInvariants:
    @pytest.mark.parametrize("seed", range(6))
    def test_rollout_invariants(self, seed):
        spec = tiny_instance(seed, jobs=3, machines=3)
        env = SchedulingEnv(spec)
        rng = np.random.default_rng(seed)
        prev_counts = None
        while not env.done:
            snap = encode(env)
            counts = snap.node_counts
            if prev_counts is not None:
                for kind in counts:
                    assert counts[kind] <= prev_counts[kind]
            prev_counts = counts
            self._check_shape(snap)
            space = env.action_space()
            assert set(snap.mask_pairs) == {
                (a.job_id, a.op_id, a.machine) for a in space.pairs
            }
            assert snap.wait_allowed == space.wait
            env.step(space.all[int(rng.integers(len(space.all)))])

    @staticmethod
    def _check_shape(snap):
        for feat in snap.op_features:
            assert len(feat) == len(OP_FEATURES)
        for feat in snap.machine_features:
            assert len(feat) == len(MACHINE_FEATURES)
        for feat in snap.combination_features:
            assert len(feat) == len(COMBINATION_FEATURES)
        for feat in snap.job_features:
            assert len(feat) == len(JOB_FEATURES)
        n_op, n_mach = len(snap.op_ids), len(snap.machine_ids)
        n_comb, n_job = len(snap.combination_ids), len(snap.job_ids)
        assert all(0 <= a < n_op and 0 <= b < n_op for a, b in snap.op_op_edges)
        assert all(0 <= a < n_op and 0 <= b < n_comb
                   for a, b in snap.op_combination_edges)
        assert all(0 <= a < n_comb and 0 <= b < n_job
                   for a, b in snap.combination_job_edges)
        assert all(0 <= a < n_op and 0 <= b < n_mach and t > 0
                   for a, b, t in snap.op_machine_edges)
        # every live op belongs to >= 1 surviving combination and >= 1 machine
        covered = {a for a, _ in snap.op_combination_edges}
        capable = {a for a, _b, _t in snap.op_machine_edges}
        assert covered == set(range(n_op))
        assert capable == set(range(n_op))

    def test_prerequisite_count_matches_in_degree(self):
        spec = tiny_instance(4, jobs=3, machines=3)
        snap = encode(SchedulingEnv(spec))
        indeg = [0] * len(snap.op_ids)
        for _src, dst in snap.op_op_edges:
            indeg[dst] += 1
        for i, feat in enumerate(snap.op_features):
            assert feat[F_OP["prerequisite_count"]] == float(indeg[i])


class TestUnits:
    def test_fractional_times_reported_in_units(self):
        doc = inst(
            [
                j([{"id": 1, "machines": [[0, 1.5], [1, 0.25]]}], [], job_id=0),
            ],
            machines=2,
        )
        spec = parse_instance(doc)
        assert spec.time_scale == 4
        snap = encode(SchedulingEnv(spec))
        times = {t for _a, _b, t in snap.op_machine_edges}
        assert times == {1.5, 0.25}


class TestSerialization:
    def test_json_round_trip(self, toy):
        env = SchedulingEnv(toy)
        env.step(Action(0, 1, 0))
        snap = encode(env, reward=-1.0)
        wire = json.dumps(snap.to_json())
        back = GraphSnapshot.from_json(json.loads(wire))
        assert back == snap

    def test_round_trip_mid_rollout(self):
        spec = tiny_instance(2, jobs=3, machines=3)
        env = SchedulingEnv(spec)
        rng = np.random.default_rng(7)
        for snap in run_to_end(env, rng):
            back = GraphSnapshot.from_json(json.loads(json.dumps(snap.to_json())))
            assert back == snap

    def test_json_keys_stable(self, toy):
        data = encode(SchedulingEnv(toy)).to_json()
        assert sorted(data) == [
            "clock", "combinations", "done", "edges", "future_pairs",
            "jobs", "machines", "mask", "ops", "reward",
        ]
        assert sorted(data["edges"]) == [
            "combination_job", "op_combination", "op_machine", "op_op",
        ]
