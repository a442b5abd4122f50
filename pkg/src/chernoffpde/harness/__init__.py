from .experiments import (
    AuditReport,
    ConvergenceReport,
    TangencyReport,
    run_audits,
    run_convergence,
    run_mc_check,
    run_tangency,
)
from .problem import ProblemError, ProblemSpec, load_problem, parse_problem
