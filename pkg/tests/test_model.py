import json

import pytest

from ipps import (
    CrossRegionLinkError,
    Edge,
    EdgeKind,
    InstanceError,
    InstanceSpec,
    JobGraph,
    Operation,
    OpKind,
    grains_to_units,
    parse_instance,
    serialize_instance,
    validate_instance,
)


def j(ops, edges, job_id=0):
    return {"id": job_id, "ops": ops, "edges": edges}


def inst(jobs, machines=2):
    return {"name": "t", "machines": machines, "jobs": jobs}


OR_JOB = j(
    [
        {"id": 0, "kind": "start"},
        {"id": 1, "machines": [[0, 2]]},          # main, before connector
        {"id": 2, "machines": [[0, 1], [1, 4]]},  # branch A head
        {"id": 3, "machines": [[1, 2]]},          # branch A tail
        {"id": 4, "machines": [[0, 3]]},          # branch B head
        {"id": 5, "machines": [[1, 1]]},          # join (main)
        {"id": 6, "kind": "end"},
    ],
    [
        [0, 1, "AND"],
        [1, 2, "OR"],
        [1, 4, "OR"],
        [2, 3, "AND"],
        [3, 5, "AND"],
        [4, 5, "AND"],
        [5, 6, "AND"],
    ],
)


class TestParsing:
    def test_toy_shape(self, toy):
        assert toy.machine_count == 2
        assert toy.time_scale == 1
        assert toy.job_ids == (0, 1)
        job0 = toy.job(0)
        assert [o.op_id for o in job0.regular_ops] == [1, 2]
        assert job0.op(1).time_on(0) == 1
        assert job0.op(2).machine_ids == (0, 1)
        assert job0.op(job0.start_id).kind is OpKind.START

    def test_edges_default_to_and(self):
        spec = parse_instance(inst([j(
            [{"id": 0, "machines": [[0, 1]]}, {"id": 1, "machines": [[0, 1]]}],
            [[0, 1]],
        )]))
        job = spec.job(0)
        inner = [e for e in job.edges if not job.op(e.src).kind.is_super
                 and not job.op(e.dst).kind.is_super]
        assert all(e.kind is EdgeKind.AND for e in inner)

    def test_supernodes_synthesized(self):
        spec = parse_instance(inst([j(
            [{"id": 0, "machines": [[0, 2]]}, {"id": 1, "machines": [[1, 3]]}],
            [[0, 1]],
        )]))
        job = spec.job(0)
        kinds = sorted(o.kind.value for o in job.ops)
        assert kinds == ["end", "op", "op", "start"]
        assert job.preds(job.start_id) == ()
        assert job.succs(job.end_id) == ()

    def test_fractional_times_become_integer_grains(self):
        spec = parse_instance(inst([j(
            [{"id": 0, "machines": [[0, 1.5]]}, {"id": 1, "machines": [[1, 0.25]]}],
            [[0, 1]],
        )]))
        assert spec.time_scale == 4
        assert spec.job(0).op(0).time_on(0) == 6   # 1.5 * 4
        assert spec.job(0).op(1).time_on(1) == 1   # 0.25 * 4
        assert grains_to_units(6, 4) == 1.5
        assert grains_to_units(8, 4) == 2

    def test_integer_times_keep_scale_one(self, toy):
        assert toy.time_scale == 1

    def test_too_fine_times_rejected(self):
        with pytest.raises(InstanceError):
            parse_instance(inst([j(
                [{"id": 0, "machines": [[0, 0.0001]]}], [],
            )]))

    def test_round_trip(self, toy):
        again = parse_instance(serialize_instance(toy))
        assert again == toy
        assert json.dumps(serialize_instance(again)) == json.dumps(serialize_instance(toy))

    def test_round_trip_fractional(self):
        spec = parse_instance(inst([j(
            [{"id": 0, "machines": [[0, 1.5]]}, {"id": 1, "machines": [[1, 0.25]]}],
            [[0, 1]],
        )]))
        again = parse_instance(serialize_instance(spec))
        assert again == spec

    def test_or_job_parses(self):
        spec = parse_instance(inst([OR_JOB]))
        job = spec.job(0)
        assert job.or_connectors == (1,)
        assert set(job.or_heads(1)) == {2, 4}

    @pytest.mark.parametrize("bad", [
        "nonsense",
        '{"machines": "x", "jobs": []}',
        '{"jobs": []}',
        '{"machines": 2}',
    ])
    def test_malformed_documents(self, bad):
        with pytest.raises(InstanceError):
            parse_instance(bad)


class TestValidation:
    def test_unknown_machine(self):
        with pytest.raises(InstanceError, match="unknown machine"):
            parse_instance(inst([j([{"id": 0, "machines": [[5, 1]]}], [])], machines=2))

    def test_nonpositive_time(self):
        with pytest.raises(InstanceError, match="time must be > 0"):
            parse_instance(inst([j([{"id": 0, "machines": [[0, 0]]}], [])]))

    def test_duplicate_op_ids(self):
        with pytest.raises(InstanceError, match="duplicate op"):
            parse_instance(inst([j(
                [{"id": 0, "machines": [[0, 1]]}, {"id": 0, "machines": [[0, 1]]}],
                [],
            )]))

    def test_duplicate_job_ids(self):
        ops = [{"id": 0, "machines": [[0, 1]]}]
        with pytest.raises(InstanceError, match="duplicate job"):
            parse_instance(inst([j(ops, [], job_id=3), j(ops, [], job_id=3)]))

    def test_cycle_rejected(self):
        with pytest.raises(InstanceError):
            parse_instance(inst([j(
                [{"id": 0, "machines": [[0, 1]]}, {"id": 1, "machines": [[0, 1]]}],
                [[0, 1], [1, 0]],
            )]))

    def test_single_or_out_edge_rejected(self):
        # node 1 keeps one OR edge; node 4 stays reachable via an AND edge
        edges = [e for e in OR_JOB["edges"] if e != [1, 4, "OR"]] + [[1, 4, "AND"]]
        bad = {**OR_JOB, "edges": edges}
        with pytest.raises(InstanceError, match=">= 2 outgoing OR"):
            parse_instance(inst([bad]))

    def test_or_edge_to_supernode_rejected(self):
        bad = j(
            [
                {"id": 0, "kind": "start"},
                {"id": 1, "machines": [[0, 1]]},
                {"id": 2, "machines": [[0, 1]]},
                {"id": 3, "kind": "end"},
            ],
            [[0, 1, "AND"], [1, 2, "OR"], [1, 3, "OR"], [2, 3, "AND"]],
        )
        with pytest.raises(InstanceError, match="regular op"):
            parse_instance(inst([bad]))

    def test_cross_region_link_rejected(self):
        # a link from inside branch A to inside branch B ties rival branches
        bad = {**OR_JOB, "edges": OR_JOB["edges"] + [[2, 4, "AND"]]}
        with pytest.raises(CrossRegionLinkError):
            parse_instance(inst([bad]))

    def test_disconnected_op_rejected(self):
        bad = j(
            [
                {"id": 0, "kind": "start"},
                {"id": 1, "machines": [[0, 1]]},
                {"id": 2, "machines": [[0, 1]]},  # floats free
                {"id": 3, "kind": "end"},
            ],
            [[0, 1, "AND"], [1, 3, "AND"]],
        )
        with pytest.raises(InstanceError):
            parse_instance(inst([bad]))

    def test_validate_instance_direct(self, toy):
        validate_instance(toy)  # no raise
        broken = InstanceSpec(
            machine_count=0, jobs=toy.jobs, name="x", time_scale=1
        )
        with pytest.raises(InstanceError):
            validate_instance(broken)


class TestRegionLabels:
    def test_main_path_unlabeled(self):
        job = parse_instance(inst([OR_JOB])).job(0)
        labels = job.region_labels()
        assert labels[1] == ()
        assert labels[5] == ()
        assert labels[2] == ((1, 2),)
        assert labels[3] == ((1, 2),)
        assert labels[4] == ((1, 4),)

    def test_nested_regions_stack(self):
        nested = j(
            [
                {"id": 0, "kind": "start"},
                {"id": 1, "machines": [[0, 1]]},   # outer connector
                {"id": 2, "machines": [[0, 1]]},   # outer A head, inner connector
                {"id": 3, "machines": [[0, 1]]},   # inner head a
                {"id": 4, "machines": [[0, 1]]},   # inner head b
                {"id": 5, "machines": [[0, 1]]},   # inner join (still outer A)
                {"id": 6, "machines": [[0, 1]]},   # outer B
                {"id": 7, "machines": [[0, 1]]},   # outer join
                {"id": 8, "kind": "end"},
            ],
            [
                [0, 1, "AND"],
                [1, 2, "OR"], [1, 6, "OR"],
                [2, 3, "OR"], [2, 4, "OR"],
                [3, 5, "AND"], [4, 5, "AND"],
                [5, 7, "AND"], [6, 7, "AND"],
                [7, 8, "AND"],
            ],
        )
        job = parse_instance(inst([nested])).job(0)
        labels = job.region_labels()
        assert labels[3] == ((1, 2), (2, 3))
        assert labels[4] == ((1, 2), (2, 4))
        assert labels[5] == ((1, 2),)
        assert labels[6] == ((1, 6),)
        assert labels[7] == ()


class TestGraphQueries:
    def test_topo_order_respects_edges(self, toy):
        job = toy.job(0)
        order = job.topo_order()
        pos = {o: i for i, o in enumerate(order)}
        for e in job.edges:
            assert pos[e.src] < pos[e.dst]

    def test_min_time(self, toy):
        assert toy.job(0).op(2).min_time == 1
        assert toy.job(1).op(1).min_time == 2

    def test_direct_construction(self):
        ops = (
            Operation(0, 0, OpKind.START, ()),
            Operation(0, 1, OpKind.OP, ((0, 5),)),
            Operation(0, 2, OpKind.END, ()),
        )
        edges = (Edge(0, 1, EdgeKind.AND), Edge(1, 2, EdgeKind.AND))
        job = JobGraph(0, ops, edges)
        spec = InstanceSpec(machine_count=1, jobs=(job,), name="direct")
        validate_instance(spec)
        assert spec.regular_op_count == 1
