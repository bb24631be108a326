"""Independent reference implementations the tests check the package against.

Everything here is deliberately naive: straight walks and unpruned searches
whose correctness is obvious from the definitions, used as oracles for the
optimized implementations.
"""

from __future__ import annotations

from ipps import (
    WAIT,
    EdgeKind,
    InstanceSpec,
    JobGraph,
    OpKind,
    SchedulingEnv,
)


def or_choice_combinations(job: JobGraph) -> set[frozenset[int]]:
    """Every executed-op set, by brute force over OR-branch assignments.

    Walk the executed subgraph from the start supernode: AND out-edges are
    always followed; at a connector (>= 2 OR out-edges) exactly the chosen
    branch is followed.  Whenever an unassigned connector is reached, branch
    the walk over its choices.  Distinct assignments yielding the same
    regular-op set collapse to one combination.
    """
    results: set[frozenset[int]] = set()

    def walk(choice: dict[int, int]) -> None:
        seen = {job.start_id}
        stack = [job.start_id]
        pending: int | None = None
        while stack:
            u = stack.pop()
            or_edges = [e for e in job.succs(u) if e.kind is EdgeKind.OR]
            nexts = [e.dst for e in job.succs(u) if e.kind is EdgeKind.AND]
            if len(or_edges) >= 2:
                if u in choice:
                    nexts.append(choice[u])
                elif pending is None:
                    pending = u
            else:
                nexts.extend(e.dst for e in or_edges)
            for v in nexts:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if pending is not None:
            for e in job.succs(pending):
                if e.kind is EdgeKind.OR:
                    walk({**choice, pending: e.dst})
            return
        results.add(
            frozenset(o for o in seen if job.op(o).kind is OpKind.OP)
        )

    walk({})
    return results


def exhaustive_min_makespan(spec: InstanceSpec, allow_wait: bool = True) -> int:
    """Minimum makespan over every decision trajectory, no pruning or memo."""
    env = SchedulingEnv(spec)
    best: list[int | None] = [None]

    def dfs() -> None:
        if env.done:
            if best[0] is None or env.makespan < best[0]:
                best[0] = env.makespan
            return
        space = env.action_space()
        options = list(space.pairs)
        if space.wait and (allow_wait or not options):
            options.append(WAIT)
        for action in options:
            snap = env.snapshot()
            env.step(action)
            dfs()
            env.restore(snap)

    dfs()
    assert best[0] is not None
    return best[0]
