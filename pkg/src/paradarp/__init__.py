"""Exact MIP optimization of demand-responsive paratransit schedules.

Builds dial-a-ride instances from booked trip requests, formulates the
Operator Model (minimize total vehicle operating time) and the User Model
(minimize scheduled-vs-actual time deviation with a lateness penalty) as
mixed integer programs, and solves them exactly with a built-in
branch-and-bound over a bounded-variable revised simplex.
"""

from paradarp.instance import (
    Direction,
    Fleet,
    Instance,
    InstanceConfig,
    InstanceError,
    ModelKind,
    NodeAttributes,
    NodeKind,
    TripRequest,
    build_instance,
    haversine_km,
    haversine_minutes,
    set_time_windows,
)
from paradarp.formulation import (
    BigMSet,
    LinearConstraint,
    ModelSpec,
    Variable,
    build_model,
    build_operator_model,
    build_user_model,
    compute_big_m,
    dump_lp,
)
from paradarp.mps import export_mps, import_mps
from paradarp.mip import (
    SolverConfig,
    SolveResult,
    check_solution,
    solve_lp,
    solve_mip,
)
from paradarp.oracle import EnumeratedSolution, OracleTooLarge, enumerate_optimal
from paradarp.report import (
    CrossEvaluation,
    cross_evaluate,
    evaluate_um_raw,
    report_model_stats,
)

__version__ = "0.1.0"

__all__ = [
    "BigMSet",
    "CrossEvaluation",
    "Direction",
    "EnumeratedSolution",
    "Fleet",
    "Instance",
    "InstanceConfig",
    "InstanceError",
    "LinearConstraint",
    "ModelKind",
    "ModelSpec",
    "NodeAttributes",
    "NodeKind",
    "OracleTooLarge",
    "SolveResult",
    "SolverConfig",
    "TripRequest",
    "Variable",
    "build_instance",
    "build_model",
    "build_operator_model",
    "build_user_model",
    "check_solution",
    "compute_big_m",
    "cross_evaluate",
    "dump_lp",
    "enumerate_optimal",
    "evaluate_um_raw",
    "export_mps",
    "haversine_km",
    "haversine_minutes",
    "import_mps",
    "report_model_stats",
    "set_time_windows",
    "solve_lp",
    "solve_mip",
]
