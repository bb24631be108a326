"""Integrated process planning and scheduling toolkit.

Jobs are AND/OR precedence graphs with alternative machines per operation.
The package provides the instance model, routing-combination enumeration,
an exact event-driven scheduling environment with waiting, a heterogeneous
graph state encoding with a line-JSON wire protocol, greedy dispatching
baselines, a mixed-integer model exporter, a synthetic instance generator,
and brute-force oracles for small instances.
"""

from .errors import (
    CombinationExplosionError,
    CrossRegionLinkError,
    DeadStateError,
    GenerationError,
    IllegalActionError,
    InfeasibleScheduleError,
    InstanceError,
    IppsError,
    OracleLimitError,
    ProtocolError,
    ReplayError,
    ScheduleFormatError,
)
from .model import (
    Edge,
    EdgeKind,
    InstanceSpec,
    JobGraph,
    Operation,
    OpKind,
    dump_instance,
    grains_to_units,
    load_instance,
    parse_instance,
    serialize_instance,
    validate_instance,
)
from .combinations import (
    COMBINATION_CAP,
    Combination,
    combination_min_work,
    enumerate_all,
    enumerate_combinations,
    instance_lower_bound,
    job_min_work,
)
from .schedule import (
    Schedule,
    ScheduleRecord,
    ValidationReport,
    Violation,
    gantt_data,
    schedule_from_json,
    schedule_to_json,
    validate_schedule,
)
from .env import (
    WAIT,
    Action,
    ActionSpace,
    EstimateConfig,
    OpStatus,
    RandomPolicy,
    RewardSpec,
    RolloutResult,
    SchedulingEnv,
    StepResult,
    random_rollout,
    rollout,
)
from .oracle import (
    OracleLimits,
    OracleResult,
    brute_force_optimum,
    canonicalize,
    replay_schedule,
)
from .greedy import (
    MACHINE_RULES,
    OP_RULES,
    GreedyResult,
    best_greedy,
    greedy_schedule,
    run_greedy,
)
from .generator import GenConfig, generate_instance, generate_job
from .heterograph import (
    COMBINATION_FEATURES,
    JOB_FEATURES,
    MACHINE_FEATURES,
    OP_FEATURES,
    GraphSnapshot,
    encode,
)
from .protocol import (
    SCHEMA_VERSION,
    ProtocolClient,
    ServeOptions,
    ServeStats,
    serve,
    serve_stdio,
    serve_tcp,
)
from .milp import (
    MilpCheck,
    MilpModel,
    build_milp,
    check_solution,
    export_milp,
    parse_lp,
    solve_instance,
    solve_lp,
    write_lp,
)
from .bench import BenchReport, BenchRow, load_suite, run_bench

__version__ = "0.1.0"
