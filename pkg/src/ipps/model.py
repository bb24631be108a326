"""Job and instance model: AND/OR precedence graphs with alternative machines.

A job is a DAG of operations between a zero-time start supernode and a
zero-time end supernode.  AND edges are plain precedence.  A node with
outgoing OR edges is an OR-connector: exactly one outgoing OR branch is
executed per job, and every branch of a connector merges back at a join
node.  The set of operations obtained by fixing one branch per reachable
connector is a routing combination (see ``ipps.combinations``).

All processing times are stored as exact integers in grains:
``grains = true_time * time_scale`` where ``time_scale`` is chosen at parse
time so that every stored time is integral (inputs may carry up to three
decimal places).  Instances with integer times have ``time_scale == 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CrossRegionLinkError, InstanceError

__all__ = [
    "OpKind",
    "EdgeKind",
    "Operation",
    "Edge",
    "JobGraph",
    "InstanceSpec",
    "parse_instance",
    "load_instance",
    "serialize_instance",
    "dump_instance",
    "validate_instance",
    "grains_to_units",
]

MAX_TIME_DECIMALS = 3
_MILLI = 10**MAX_TIME_DECIMALS


class OpKind(str, Enum):
    """Node kinds. Supernodes take zero time and never occupy a machine."""

    START = "start"
    END = "end"
    JOIN = "join"  # mid-graph synchronization supernode
    OP = "op"

    @property
    def is_super(self) -> bool:
        return self is not OpKind.OP


class EdgeKind(str, Enum):
    AND = "AND"
    OR = "OR"


@dataclass(frozen=True)
class Operation:
    """One operation of a job.

    ``machines`` maps machine id -> processing time in grains; empty for
    supernodes, non-empty with strictly positive times for regular ops.
    """

    job_id: int
    op_id: int
    kind: OpKind = OpKind.OP
    machines: tuple[tuple[int, int], ...] = ()

    @property
    def ref(self) -> tuple[int, int]:
        return (self.job_id, self.op_id)

    @property
    def machine_ids(self) -> tuple[int, ...]:
        return tuple(m for m, _ in self.machines)

    def time_on(self, machine: int) -> int:
        for m, t in self.machines:
            if m == machine:
                return t
        raise KeyError(f"op {self.ref} has no option on machine {machine}")

    @property
    def min_time(self) -> int:
        if not self.machines:
            return 0
        return min(t for _, t in self.machines)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: EdgeKind = EdgeKind.AND


@dataclass(eq=False)
class JobGraph:
    """A single job: operations plus AND/OR precedence edges.

    Construction does not validate; call :func:`validate_instance` (done by
    the parser by default) before trusting derived structure.
    """

    job_id: int
    ops: tuple[Operation, ...]
    edges: tuple[Edge, ...]

    # --- derived maps (filled lazily) -------------------------------------
    _by_id: dict[int, Operation] = field(default_factory=dict, repr=False)
    _preds: dict[int, tuple[Edge, ...]] | None = field(default=None, repr=False)
    _succs: dict[int, tuple[Edge, ...]] | None = field(default=None, repr=False)
    _topo: tuple[int, ...] | None = field(default=None, repr=False)
    _labels: dict[int, tuple[tuple[int, int], ...]] | None = field(default=None, repr=False)

    # content equality over the defining triple; the lazy caches are
    # derived and must not influence comparisons or hashing
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JobGraph):
            return NotImplemented
        return (self.job_id, self.ops, self.edges) == (
            other.job_id, other.ops, other.edges
        )

    def __hash__(self) -> int:
        return hash((self.job_id, self.ops, self.edges))

    def op(self, op_id: int) -> Operation:
        if not self._by_id:
            self._by_id.update({o.op_id: o for o in self.ops})
        return self._by_id[op_id]

    @property
    def op_ids(self) -> tuple[int, ...]:
        return tuple(o.op_id for o in self.ops)

    @property
    def regular_ops(self) -> tuple[Operation, ...]:
        return tuple(o for o in self.ops if o.kind is OpKind.OP)

    @property
    def start_id(self) -> int:
        return next(o.op_id for o in self.ops if o.kind is OpKind.START)

    @property
    def end_id(self) -> int:
        return next(o.op_id for o in self.ops if o.kind is OpKind.END)

    def preds(self, op_id: int) -> tuple[Edge, ...]:
        if self._preds is None:
            p: dict[int, list[Edge]] = {o.op_id: [] for o in self.ops}
            for e in self.edges:
                p[e.dst].append(e)
            self._preds = {k: tuple(v) for k, v in p.items()}
        return self._preds[op_id]

    def succs(self, op_id: int) -> tuple[Edge, ...]:
        if self._succs is None:
            s: dict[int, list[Edge]] = {o.op_id: [] for o in self.ops}
            for e in self.edges:
                s[e.src].append(e)
            self._succs = {k: tuple(v) for k, v in s.items()}
        return self._succs[op_id]

    def or_heads(self, op_id: int) -> tuple[int, ...]:
        """Heads of the alternative branches leaving an OR-connector."""
        return tuple(sorted(e.dst for e in self.succs(op_id) if e.kind is EdgeKind.OR))

    @property
    def or_connectors(self) -> tuple[int, ...]:
        return tuple(
            o.op_id for o in self.ops
            if any(e.kind is EdgeKind.OR for e in self.succs(o.op_id))
        )

    def topo_order(self) -> tuple[int, ...]:
        """Topological order of op ids (raises InstanceError on a cycle)."""
        if self._topo is None:
            pending = {o.op_id: len(self.preds(o.op_id)) for o in self.ops}
            ready = sorted(i for i, n in pending.items() if n == 0)
            order: list[int] = []
            while ready:
                v = ready.pop(0)
                order.append(v)
                for e in self.succs(v):
                    pending[e.dst] -= 1
                    if pending[e.dst] == 0:
                        # insertion keeps the scan deterministic
                        ready.append(e.dst)
                        ready.sort()
            if len(order) != len(self.ops):
                raise InstanceError(f"job {self.job_id}: precedence graph has a cycle")
            self._topo = tuple(order)
        return self._topo

    def region_labels(self) -> dict[int, tuple[tuple[int, int], ...]]:
        """Chain of OR choices each node is conditional on.

        A label is a tuple of (connector, branch head) pairs, outermost
        first; the empty label marks nodes executed by every combination.
        Raises :class:`CrossRegionLinkError` when no consistent labeling
        exists, i.e. some edge crosses a branch boundary illegally.
        """
        if self._labels is None:
            self._labels = _compute_region_labels(self)
        return self._labels


@dataclass(eq=False)
class InstanceSpec:
    """A scheduling instance: jobs sharing a pool of machines."""

    machine_count: int
    jobs: tuple[JobGraph, ...]
    name: str = ""
    time_scale: int = 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InstanceSpec):
            return NotImplemented
        return (
            self.machine_count, self.jobs, self.name, self.time_scale
        ) == (
            other.machine_count, other.jobs, other.name, other.time_scale
        )

    def __hash__(self) -> int:
        return hash((self.machine_count, self.jobs, self.name, self.time_scale))

    def job(self, job_id: int) -> JobGraph:
        for j in self.jobs:
            if j.job_id == job_id:
                return j
        raise KeyError(f"no job {job_id}")

    @property
    def job_ids(self) -> tuple[int, ...]:
        return tuple(j.job_id for j in self.jobs)

    @property
    def machine_ids(self) -> tuple[int, ...]:
        return tuple(range(self.machine_count))

    @property
    def regular_op_count(self) -> int:
        return sum(len(j.regular_ops) for j in self.jobs)


def grains_to_units(value: int, time_scale: int) -> int | float:
    """Convert internal grains back to time units (int when exact)."""
    if value % time_scale == 0:
        return value // time_scale
    return round(value / time_scale, MAX_TIME_DECIMALS)


# ---------------------------------------------------------------------------
# Parsing / serialization
# ---------------------------------------------------------------------------

_KIND_NAMES = {k.value: k for k in OpKind}


def _time_to_millis(x, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InstanceError(f"{where}: processing time must be a number, got {x!r}")
    milli = x * _MILLI
    rounded = round(milli)
    if abs(milli - rounded) > 1e-6:
        raise InstanceError(
            f"{where}: processing time {x!r} has more than {MAX_TIME_DECIMALS} decimal places"
        )
    return int(rounded)


def parse_instance(data: Mapping | str, *, validate: bool = True) -> InstanceSpec:
    """Build an :class:`InstanceSpec` from a mapping or JSON text.

    Expected shape::

        {"name": "...", "machines": M,
         "jobs": [{"id": j, "ops": [{"id": o, "kind": "op", "machines": [[m, t], ...]}],
                   "edges": [[src, dst, "AND"|"OR"], ...]}]}

    ``kind`` defaults to "op"; jobs without explicit start/end supernodes get
    them synthesized around their sources and sinks.
    """
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, Mapping):
        raise InstanceError("instance must be a JSON object")
    try:
        machine_count = int(data["machines"])
    except (KeyError, TypeError, ValueError):
        raise InstanceError("instance needs an integer 'machines' field") from None
    if machine_count < 1:
        raise InstanceError("machine count must be >= 1")
    raw_jobs = data.get("jobs")
    if not isinstance(raw_jobs, list):
        raise InstanceError("instance needs a 'jobs' list")

    # First pass: collect all times in milli-units to fix the instance scale.
    millis: list[int] = []
    for ji, rj in enumerate(raw_jobs):
        if not isinstance(rj, Mapping):
            raise InstanceError(f"job index {ji}: must be an object")
        for ro in rj.get("ops", ()):
            if not isinstance(ro, Mapping):
                raise InstanceError(f"job index {ji}: each op must be an object")
            for pair in ro.get("machines", ()) or ():
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise InstanceError(
                        f"job index {ji}: machine option must be a [machine, time] pair"
                    )
                millis.append(_time_to_millis(pair[1], f"job index {ji}"))
    g = _MILLI
    for m in millis:
        g = math.gcd(g, m)
    g = g or _MILLI
    time_scale = _MILLI // g

    jobs: list[JobGraph] = []
    for ji, rj in enumerate(raw_jobs):
        if not isinstance(rj, Mapping):
            raise InstanceError(f"job index {ji}: must be an object")
        job_id = int(rj.get("id", ji))
        ops: list[Operation] = []
        for ro in rj.get("ops", ()):
            if not isinstance(ro, Mapping) or "id" not in ro:
                raise InstanceError(f"job {job_id}: each op needs an 'id'")
            kind_name = ro.get("kind", "op")
            kind = _KIND_NAMES.get(kind_name)
            if kind is None:
                raise InstanceError(f"job {job_id}: unknown op kind {kind_name!r}")
            options = tuple(
                sorted(
                    (int(m), _time_to_millis(t, f"job {job_id} op {ro['id']}") // g)
                    for m, t in (ro.get("machines") or ())
                )
            )
            ops.append(Operation(job_id, int(ro["id"]), kind, options))
        edges = []
        for re_ in rj.get("edges", ()):
            if not isinstance(re_, (list, tuple)) or len(re_) not in (2, 3):
                raise InstanceError(f"job {job_id}: edge must be [src, dst] or [src, dst, kind]")
            kind = EdgeKind(re_[2]) if len(re_) == 3 else EdgeKind.AND
            edges.append(Edge(int(re_[0]), int(re_[1]), kind))
        job = _with_supernodes(JobGraph(job_id, tuple(ops), tuple(edges)))
        jobs.append(job)

    spec = InstanceSpec(
        machine_count=machine_count,
        jobs=tuple(jobs),
        name=str(data.get("name", "")),
        time_scale=time_scale,
    )
    if validate:
        validate_instance(spec)
    return spec


def load_instance(path: str | Path, *, validate: bool = True) -> InstanceSpec:
    return parse_instance(Path(path).read_text(), validate=validate)


def _with_supernodes(job: JobGraph) -> JobGraph:
    """Synthesize start/end supernodes when a job lacks them."""
    have_start = any(o.kind is OpKind.START for o in job.ops)
    have_end = any(o.kind is OpKind.END for o in job.ops)
    if have_start and have_end:
        return job
    if not job.ops:
        raise InstanceError(f"job {job.job_id}: has no operations")
    ops = list(job.ops)
    edges = list(job.edges)
    next_id = max(o.op_id for o in ops) + 1
    has_pred = {e.dst for e in edges}
    has_succ = {e.src for e in edges}
    if not have_start:
        start = Operation(job.job_id, next_id, OpKind.START)
        next_id += 1
        ops.insert(0, start)
        for o in job.ops:
            if o.op_id not in has_pred:
                edges.append(Edge(start.op_id, o.op_id))
    if not have_end:
        end = Operation(job.job_id, next_id, OpKind.END)
        ops.append(end)
        for o in job.ops:
            if o.op_id not in has_succ:
                edges.append(Edge(o.op_id, end.op_id))
    return JobGraph(job.job_id, tuple(ops), tuple(edges))


def serialize_instance(spec: InstanceSpec) -> dict:
    """Inverse of :func:`parse_instance` (times back in unit values)."""
    return {
        "name": spec.name,
        "machines": spec.machine_count,
        "jobs": [
            {
                "id": j.job_id,
                "ops": [
                    {
                        "id": o.op_id,
                        "kind": o.kind.value,
                        "machines": [
                            [m, grains_to_units(t, spec.time_scale)] for m, t in o.machines
                        ],
                    }
                    for o in j.ops
                ],
                "edges": [[e.src, e.dst, e.kind.value] for e in j.edges],
            }
            for j in spec.jobs
        ],
    }


def dump_instance(spec: InstanceSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(serialize_instance(spec), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_instance(spec: InstanceSpec) -> None:
    """Raise :class:`InstanceError` unless the instance is well-formed.

    Checks ids, machine references, supernode placement, acyclicity,
    connectivity, OR-connector arity, and branch-region consistency (no
    links between a conditional branch's interior and unrelated nodes).
    """
    if spec.machine_count < 1:
        raise InstanceError("machine count must be >= 1")
    if spec.time_scale < 1 or _MILLI % spec.time_scale:
        raise InstanceError(f"time_scale must divide {_MILLI}")
    seen_jobs: set[int] = set()
    for job in spec.jobs:
        if job.job_id in seen_jobs:
            raise InstanceError(f"duplicate job id {job.job_id}")
        seen_jobs.add(job.job_id)
        _validate_job(job, spec.machine_count)


def _validate_job(job: JobGraph, machine_count: int) -> None:
    jid = job.job_id
    ids = [o.op_id for o in job.ops]
    if len(set(ids)) != len(ids):
        raise InstanceError(f"job {jid}: duplicate op ids")
    starts = [o for o in job.ops if o.kind is OpKind.START]
    ends = [o for o in job.ops if o.kind is OpKind.END]
    if len(starts) != 1 or len(ends) != 1:
        raise InstanceError(f"job {jid}: needs exactly one start and one end supernode")

    for o in job.ops:
        if o.kind.is_super:
            if o.machines:
                raise InstanceError(f"job {jid} op {o.op_id}: supernodes take no machine options")
        else:
            if not o.machines:
                raise InstanceError(f"job {jid} op {o.op_id}: regular op needs >= 1 machine option")
            mids = [m for m, _ in o.machines]
            if len(set(mids)) != len(mids):
                raise InstanceError(f"job {jid} op {o.op_id}: duplicate machine option")
            for m, t in o.machines:
                if not 0 <= m < machine_count:
                    raise InstanceError(f"job {jid} op {o.op_id}: unknown machine {m}")
                if t <= 0:
                    raise InstanceError(f"job {jid} op {o.op_id}: processing time must be > 0")

    known = set(ids)
    seen_edges: set[tuple[int, int]] = set()
    for e in job.edges:
        if e.src not in known or e.dst not in known:
            raise InstanceError(f"job {jid}: edge ({e.src}, {e.dst}) references unknown op")
        if e.src == e.dst:
            raise InstanceError(f"job {jid}: self-loop on op {e.src}")
        if (e.src, e.dst) in seen_edges:
            raise InstanceError(f"job {jid}: duplicate edge ({e.src}, {e.dst})")
        seen_edges.add((e.src, e.dst))

    start_id, end_id = starts[0].op_id, ends[0].op_id
    for o in job.ops:
        n_in, n_out = len(job.preds(o.op_id)), len(job.succs(o.op_id))
        if o.op_id == start_id:
            if n_in:
                raise InstanceError(f"job {jid}: start supernode has predecessors")
        elif n_in == 0:
            raise InstanceError(f"job {jid} op {o.op_id}: unreachable (no predecessors)")
        if o.op_id == end_id:
            if n_out:
                raise InstanceError(f"job {jid}: end supernode has successors")
        elif n_out == 0:
            raise InstanceError(f"job {jid} op {o.op_id}: dead end (no successors)")

    job.topo_order()  # raises on cycles

    # connectivity: every node on some start -> end path
    fwd = _reachable(job, start_id, forward=True)
    back = _reachable(job, end_id, forward=False)
    stray = known - (fwd & back)
    if stray:
        raise InstanceError(f"job {jid}: ops {sorted(stray)} not on any start-to-end path")

    for c in known:
        or_out = [e for e in job.succs(c) if e.kind is EdgeKind.OR]
        if or_out and len(or_out) < 2:
            raise InstanceError(
                f"job {jid} op {c}: an OR-connector needs >= 2 outgoing OR edges"
            )
        for e in or_out:
            if job.op(e.dst).kind is not OpKind.OP:
                raise InstanceError(
                    f"job {jid}: OR edge ({e.src}, {e.dst}) must point at a regular op "
                    "(every alternative branch starts with a schedulable operation)"
                )

    job.region_labels()  # raises CrossRegionLinkError on boundary violations


def _reachable(job: JobGraph, from_id: int, *, forward: bool) -> set[int]:
    seen = {from_id}
    stack = [from_id]
    while stack:
        v = stack.pop()
        nxt = job.succs(v) if forward else job.preds(v)
        for e in nxt:
            w = e.dst if forward else e.src
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _compute_region_labels(job: JobGraph) -> dict[int, tuple[tuple[int, int], ...]]:
    """Assign each node its chain of conditioning OR choices.

    Moving along an edge may keep the label, push one OR choice (an OR edge
    out of a connector), or pop exactly one (a branch tail merging at the
    join).  A join must receive every branch of the connector it closes.
    """
    labels: dict[int, tuple[tuple[int, int], ...]] = {}
    # popped[v][connector] = set of branch heads that merge at v
    popped: dict[int, dict[int, set[int]]] = {}
    for v in job.topo_order():
        incoming = job.preds(v)
        if not incoming:
            labels[v] = ()
            continue
        cand: set[tuple[tuple[int, int], ...]] | None = None
        for e in incoming:
            lu = labels[e.src]
            if e.kind is EdgeKind.OR:
                opts = {lu + ((e.src, e.dst),)}
            else:
                opts = {lu} | ({lu[:-1]} if lu else set())
            cand = opts if cand is None else cand & opts
            if not cand:
                raise CrossRegionLinkError(
                    f"job {job.job_id}: edge ({e.src}, {e.dst}) links across an "
                    "alternative-branch boundary"
                )
        # Prefer staying in the predecessors' region; a pop only happens when
        # tails of different branches force the shorter label.
        label = max(cand, key=len)
        labels[v] = label
        for e in incoming:
            lu = labels[e.src]
            if e.kind is EdgeKind.AND and len(lu) == len(label) + 1:
                conn, head = lu[-1]
                popped.setdefault(v, {}).setdefault(conn, set()).add(head)

    for v, conns in popped.items():
        for conn, heads in conns.items():
            missing = set(job.or_heads(conn)) - heads
            if missing:
                raise CrossRegionLinkError(
                    f"job {job.job_id}: branches {sorted(missing)} of connector {conn} "
                    f"do not merge at op {v} with their sibling branches"
                )
    return labels
