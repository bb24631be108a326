"""Mixed-integer model of an instance, with LP text export and a checker.

One binary picks the combination per job (Y), one binary per in-combination
operation picks its machine (X), a continuous variable carries each
operation's completion time (C), and ordering binaries linearize job
exclusivity inside a combination (Z) and machine capacity across jobs (W —
one per operation pair, instantiated per shared machine).  Big-M is one
more than the sum of every operation's slowest option, so no feasible
completion can touch it.  The objective M dominates all completions.

``write_lp`` emits a deterministic, restricted LP dialect; ``parse_lp``
reads exactly that dialect back, and ``solve_lp`` hands the parsed matrix
to ``scipy.optimize.milp``, so solving an exported file exercises the full
text round trip.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .combinations import Combination, enumerate_all, regular_preds_within
from .errors import ScheduleFormatError
from .model import InstanceSpec
from .schedule import Schedule, ScheduleRecord, validate_schedule

__all__ = [
    "MilpModel",
    "build_milp",
    "write_lp",
    "export_milp",
    "ParsedLP",
    "parse_lp",
    "LpSolution",
    "solve_lp",
    "extract_schedule",
    "MilpCheck",
    "check_solution",
    "solve_instance",
]


@dataclass
class MilpModel:
    """Canonical-form model: rows of (terms, sense, rhs)."""

    spec: InstanceSpec
    variables: list[str] = field(default_factory=list)
    binaries: set[str] = field(default_factory=set)
    rows: list[tuple[dict[str, int], str, int]] = field(default_factory=list)
    big_m: int = 0

    def add_var(self, name: str, binary: bool = False) -> str:
        self.variables.append(name)
        if binary:
            self.binaries.add(name)
        return name

    def add_row(self, terms: dict[str, int], sense: str, rhs: int) -> None:
        assert sense in (">=", "<=", "=")
        self.rows.append((terms, sense, rhs))


def _reachable_within(preds: dict[int, set[int]]) -> dict[int, set[int]]:
    """op -> every op on some path before it (transitive closure)."""
    closure: dict[int, set[int]] = {}

    def visit(o: int) -> set[int]:
        if o not in closure:
            acc: set[int] = set()
            for p in preds[o]:
                acc.add(p)
                acc |= visit(p)
            closure[o] = acc
        return closure[o]

    for o in preds:
        visit(o)
    return closure


def build_milp(spec: InstanceSpec) -> MilpModel:
    combos = enumerate_all(spec)
    model = MilpModel(spec)
    big_m = 1 + sum(
        max(t for _m, t in op.machines)
        for job in spec.jobs
        for op in job.ops
        if not op.kind.is_super
    )
    model.big_m = big_m
    A = big_m

    model.add_var("M")
    instances: list[tuple[int, int, int]] = []  # (job, combo index, op)
    for job_id in spec.job_ids:
        for comb in combos[job_id]:
            for op_id in sorted(comb.regular_ops):
                instances.append((job_id, comb.index, op_id))

    y = lambda i, h: f"Y_{i}_{h}"
    x = lambda i, h, j, k: f"X_{i}_{h}_{j}_{k}"
    c = lambda i, h, j: f"C_{i}_{h}_{j}"

    for job_id in spec.job_ids:
        for comb in combos[job_id]:
            model.add_var(y(job_id, comb.index), binary=True)
    for i, h, j in instances:
        for k in spec.job(i).op(j).machine_ids:
            model.add_var(x(i, h, j, k), binary=True)
    for i, h, j in instances:
        model.add_var(c(i, h, j))

    # one combination per job
    for job_id in spec.job_ids:
        model.add_row(
            {y(job_id, comb.index): 1 for comb in combos[job_id]}, "=", 1
        )

    # machine choice active exactly when the combination is
    for i, h, j in instances:
        terms = {x(i, h, j, k): 1 for k in spec.job(i).op(j).machine_ids}
        terms[y(i, h)] = -1
        model.add_row(terms, "=", 0)

    # completion no earlier than the chosen duration
    for i, h, j in instances:
        op = spec.job(i).op(j)
        terms = {c(i, h, j): 1}
        for k in op.machine_ids:
            terms[x(i, h, j, k)] = -op.time_on(k)
        model.add_row(terms, ">=", 0)

    # precedence and job exclusivity inside each combination
    z_count = 0
    for job_id in spec.job_ids:
        job = spec.job(job_id)
        for comb in combos[job_id]:
            preds = regular_preds_within(job, comb)
            closure = _reachable_within(preds)
            i, h = job_id, comb.index
            for j in sorted(comb.regular_ops):
                opj = job.op(j)
                for p in sorted(preds[j]):
                    terms = {c(i, h, j): 1, c(i, h, p): -1, y(i, h): -A}
                    for k in opj.machine_ids:
                        terms[x(i, h, j, k)] = terms.get(x(i, h, j, k), 0) - opj.time_on(k)
                    model.add_row(terms, ">=", -A)
            ordered = sorted(comb.regular_ops)
            for a_idx, ja in enumerate(ordered):
                for jb in ordered[a_idx + 1:]:
                    if ja in closure[jb] or jb in closure[ja]:
                        continue
                    zv = model.add_var(f"Z_{z_count}", binary=True)
                    z_count += 1
                    opa, opb = job.op(ja), job.op(jb)
                    # zv = 1: ja before jb
                    terms = {c(i, h, jb): 1, c(i, h, ja): -1, zv: -A, y(i, h): -A}
                    for k in opb.machine_ids:
                        terms[x(i, h, jb, k)] = terms.get(x(i, h, jb, k), 0) - opb.time_on(k)
                    model.add_row(terms, ">=", -2 * A)
                    terms = {c(i, h, ja): 1, c(i, h, jb): -1, zv: A, y(i, h): -A}
                    for k in opa.machine_ids:
                        terms[x(i, h, ja, k)] = terms.get(x(i, h, ja, k), 0) - opa.time_on(k)
                    model.add_row(terms, ">=", -A)

    # machine capacity across jobs: one ordering binary per pair,
    # instantiated per shared machine
    w_count = 0
    for ai, a in enumerate(instances):
        for b in instances[ai + 1:]:
            if a[0] == b[0]:
                continue  # same job: exclusivity already covers the active pair
            opa = spec.job(a[0]).op(a[2])
            opb = spec.job(b[0]).op(b[2])
            shared = sorted(set(opa.machine_ids) & set(opb.machine_ids))
            if not shared:
                continue
            wv = model.add_var(f"W_{w_count}", binary=True)
            w_count += 1
            ca, cb = c(*a), c(*b)
            for k in shared:
                xa, xb = x(a[0], a[1], a[2], k), x(b[0], b[1], b[2], k)
                # wv = 1: a before b on k
                model.add_row(
                    {cb: 1, ca: -1, xb: -opb.time_on(k) - A, xa: -A, wv: -A},
                    ">=", -3 * A,
                )
                model.add_row(
                    {ca: 1, cb: -1, xa: -opa.time_on(k) - A, xb: -A, wv: A},
                    ">=", -2 * A,
                )

    # makespan dominates every completion
    for i, h, j in instances:
        model.add_row({"M": 1, c(i, h, j): -1}, ">=", 0)

    return model


def write_lp(model: MilpModel) -> str:
    """Deterministic LP text for the model (restricted dialect)."""
    out = [
        f"\\ instance: {model.spec.name or 'unnamed'}",
        f"\\ big-M: {model.big_m}",
        "Minimize",
        " obj: M",
        "Subject To",
    ]
    for idx, (terms, sense, rhs) in enumerate(model.rows):
        parts = []
        for var in sorted(terms):
            coef = terms[var]
            if coef == 0:
                continue
            sign = "-" if coef < 0 else "+"
            mag = abs(coef)
            parts.append(f"{sign} {mag} {var}" if mag != 1 else f"{sign} {var}")
        body = " ".join(parts).removeprefix("+ ")
        out.append(f" r{idx}: {body} {sense} {rhs}")
    out.append("Binary")
    for var in model.variables:
        if var in model.binaries:
            out.append(f" {var}")
    out.append("End")
    return "\n".join(out) + "\n"


def export_milp(spec: InstanceSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_lp(build_milp(spec)))


@dataclass
class ParsedLP:
    variables: list[str]
    binaries: set[str]
    objective: dict[str, int]
    rows: list[tuple[dict[str, int], str, int]]


_TERM_RE = re.compile(r"([+-])\s*(\d+)?\s*([A-Za-z][A-Za-z0-9_]*)")
_ROW_RE = re.compile(r"^\s*\w+:\s*(.*?)\s*(<=|>=|=)\s*(-?\d+)\s*$")


def _parse_terms(body: str) -> dict[str, int]:
    if not body.startswith(("+", "-")):
        body = "+ " + body
    terms: dict[str, int] = {}
    pos = 0
    for m in _TERM_RE.finditer(body):
        if body[pos:m.start()].strip():
            raise ScheduleFormatError(f"unreadable LP terms: {body[pos:m.start()]!r}")
        coef = int(m.group(2) or 1)
        if m.group(1) == "-":
            coef = -coef
        var = m.group(3)
        terms[var] = terms.get(var, 0) + coef
        pos = m.end()
    if body[pos:].strip():
        raise ScheduleFormatError(f"unreadable LP terms: {body[pos:]!r}")
    return terms


def parse_lp(text: str) -> ParsedLP:
    """Read back the dialect produced by :func:`write_lp`."""
    objective: dict[str, int] = {}
    rows: list[tuple[dict[str, int], str, int]] = []
    binaries: set[str] = set()
    variables: list[str] = []
    seen: set[str] = set()

    def note(var: str) -> None:
        if var not in seen:
            seen.add(var)
            variables.append(var)

    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "maximize"):
            if low == "maximize":
                raise ScheduleFormatError("only minimization is supported")
            section = "objective"
            continue
        if low == "subject to":
            section = "rows"
            continue
        if low == "binary":
            section = "binary"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "end":
            break
        if section == "objective":
            body = line.split(":", 1)[1] if ":" in line else line
            objective.update(_parse_terms(body))
            for v in objective:
                note(v)
        elif section == "rows":
            m = _ROW_RE.match(line)
            if not m:
                raise ScheduleFormatError(f"unreadable LP row: {line!r}")
            terms = _parse_terms(m.group(1))
            for v in terms:
                note(v)
            rows.append((terms, m.group(2), int(m.group(3))))
        elif section == "binary":
            binaries.add(line)
            note(line)
        elif section == "bounds":
            raise ScheduleFormatError("bounds sections are not part of the dialect")
        else:
            raise ScheduleFormatError(f"unexpected LP line outside sections: {line!r}")
    return ParsedLP(variables, binaries, objective, rows)


@dataclass(frozen=True)
class LpSolution:
    objective: float
    values: dict[str, float]


def solve_lp(source: str | ParsedLP, time_limit: float | None = None) -> LpSolution:
    """Solve with scipy's branch-and-cut over the parsed matrix."""
    import numpy as np
    from scipy import optimize, sparse

    parsed = parse_lp(source) if isinstance(source, str) else source
    index = {v: i for i, v in enumerate(parsed.variables)}
    n = len(parsed.variables)
    cost = np.zeros(n)
    for var, coef in parsed.objective.items():
        cost[index[var]] = coef

    data, ri, ci, lo, hi = [], [], [], [], []
    for r, (terms, sense, rhs) in enumerate(parsed.rows):
        for var, coef in terms.items():
            ri.append(r)
            ci.append(index[var])
            data.append(coef)
        lo.append(rhs if sense in (">=", "=") else -np.inf)
        hi.append(rhs if sense in ("<=", "=") else np.inf)
    mat = sparse.csr_array((data, (ri, ci)), shape=(len(parsed.rows), n))

    integrality = np.zeros(n)
    ub = np.full(n, np.inf)
    for var in parsed.binaries:
        integrality[index[var]] = 1
        ub[index[var]] = 1
    options = {}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = optimize.milp(
        cost,
        constraints=optimize.LinearConstraint(mat, lo, hi),
        integrality=integrality,
        bounds=optimize.Bounds(np.zeros(n), ub),
        options=options,
    )
    if not res.success:
        raise ScheduleFormatError(f"MILP solve failed: {res.message}")
    values = {v: float(res.x[i]) for v, i in index.items()}
    return LpSolution(float(res.fun), values)


def extract_schedule(spec: InstanceSpec, values: dict[str, float]) -> Schedule:
    """Schedule from a solution's Y/X/C variables."""
    combos = enumerate_all(spec)
    records = []
    for job_id in spec.job_ids:
        chosen = [
            comb for comb in combos[job_id]
            if values[f"Y_{job_id}_{comb.index}"] > 0.5
        ]
        if len(chosen) != 1:
            raise ScheduleFormatError(f"job {job_id}: no unique combination chosen")
        comb = chosen[0]
        for op_id in sorted(comb.regular_ops):
            op = spec.job(job_id).op(op_id)
            machines = [
                k for k in op.machine_ids
                if values[f"X_{job_id}_{comb.index}_{op_id}_{k}"] > 0.5
            ]
            if len(machines) != 1:
                raise ScheduleFormatError(
                    f"op ({job_id}, {op_id}): no unique machine chosen"
                )
            k = machines[0]
            end = round(values[f"C_{job_id}_{comb.index}_{op_id}"])
            records.append(
                ScheduleRecord(job_id, op_id, k, end - op.time_on(k), end)
            )
    return Schedule(records)


@dataclass(frozen=True)
class MilpCheck:
    """Outcome of validating an external solver's variable assignment."""

    feasible: bool
    makespan: int | None = None          # reconstructed schedule makespan (grains)
    objective: float | None = None       # the assignment's M variable, if present
    objective_consistent: bool | None = None  # M agrees with the reconstruction
    problems: tuple[str, ...] = ()
    schedule: Schedule | None = None

    def __bool__(self) -> bool:
        return self.feasible


def check_solution(spec: InstanceSpec, assignment: dict) -> MilpCheck:
    """Validate a solver's variable assignment against an instance.

    ``assignment`` is either ``{"variables": {name: value}, "objective": x}``
    or a flat ``{name: value}`` mapping.  The Y/X/C variables are
    reconstructed into a schedule, which is validated for completeness,
    precedence, and machine exclusivity; the M variable (or ``objective``),
    when present, must match the reconstruction's makespan.
    """
    if "variables" in assignment:
        values = dict(assignment["variables"])
        objective = assignment.get("objective")
    else:
        values = dict(assignment)
        objective = None
    if objective is None and "M" in values:
        objective = values["M"]

    try:
        schedule = extract_schedule(spec, values)
    except (ScheduleFormatError, KeyError) as exc:
        detail = str(exc) if str(exc) else repr(exc)
        return MilpCheck(False, problems=(f"reconstruction failed: {detail}",),
                         objective=objective)

    report = validate_schedule(spec, schedule)
    problems = [f"{v.condition}: {v.message}" for v in report.violations]
    consistent = None
    if objective is not None and report.ok:
        consistent = round(objective) == report.makespan
        if not consistent:
            problems.append(
                f"objective {objective} does not match reconstructed "
                f"makespan {report.makespan}"
            )
    feasible = report.ok and consistent is not False
    return MilpCheck(
        feasible=feasible,
        makespan=report.makespan if report.ok else None,
        objective=objective,
        objective_consistent=consistent,
        problems=tuple(problems),
        schedule=schedule,
    )


def solve_instance(spec: InstanceSpec, time_limit: float | None = None):
    """Build, export to text, parse back, solve, extract.

    Returns ``(makespan_grains, schedule)``; the text round trip makes the
    exported artifact itself the thing being solved.
    """
    text = write_lp(build_milp(spec))
    sol = solve_lp(text, time_limit=time_limit)
    sched = extract_schedule(spec, sol.values)
    return round(sol.objective), sched
