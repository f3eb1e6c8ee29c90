"""Optimal per-iteration inexactness schedules for first-order methods with
tunable costly oracles, plus the inexact fast gradient method experiments
validating them.
"""

from .cost_models import (
    CostModel,
    CostModelError,
    h_derivative,
    h_derivative_inverse,
    h_eval,
    h_inverse,
    lambert_w0,
)
from .schedule_solver import (
    KktCertificate,
    Schedule,
    ScheduleProblem,
    SolverError,
    WorkProblem,
    accuracy_problem,
    brute_force_oracle,
    closed_form_interior_accuracy,
    closed_form_interior_work,
    descending_rank,
    online_extend_accuracy,
    online_extend_work,
    reference_budget,
    schedule_objective,
    solve_accuracy,
    solve_work,
)
from .certificates import (
    CertificateSequence,
    fixed_step_certificates,
    impact_coefficients_fgm,
    impact_coefficients_iafb,
    impact_coefficients_ipl,
    next_certificate,
)
from .fgm import (
    BoundTracker,
    FgmConfig,
    bound_value,
    fgm_run,
    line_search_validate,
    project_simplex,
)
from .problems import (
    InnerState,
    OracleReply,
    ScenarioData,
    estimate_fstar,
    fista_inner,
    fw_gap,
    generate_scenarios,
    hull_oracle,
    inner_q_value_grad,
    kappa_hat,
    noisy_oracle,
    softmax_value_grad,
)
from .harness import (
    ExperimentConfig,
    baseline_schedule,
    default_config,
    emit_outputs,
    load_config,
    match_budget,
    run_experiment,
    toy_instance,
)

__version__ = "0.1.0"
