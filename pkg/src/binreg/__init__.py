"""Binary sparse regression: exact solvers, phase-transition curves, and Monte Carlo checks.

The library generates instances of the planted model Y = X b + W with a
binary k-sparse coefficient vector, solves the k-sparse binary
least-squares problem exactly (including overlap-restricted variants),
evaluates the closed-form limiting curve and its thresholds, computes the
Gaussian interval/rectangle kernels behind the conditional moment
formulas, and runs reproducible desk-scale experiments.
"""

from .model import (
    Instance,
    ModelParams,
    generate_instance,
    generate_pure_noise,
    load_instance,
    save_instance,
)
from .theory import (
    GammaCurve,
    Regime,
    ThresholdReport,
    VacuousWindowError,
    check_binomial_lemma,
    gamma,
    gamma_curve,
    lower_bound_curve,
    ogp_hypotheses_hold,
    ogp_window,
    thresholds,
)
from .solver import (
    BudgetExceededError,
    LassoResult,
    NormMode,
    OverlapProfile,
    SolveResult,
    lasso_baseline,
    overlap_profile,
    solve_exact,
    solve_pure_noise,
    solve_restricted,
    support_objective,
)
from .moments import (
    MomentReport,
    chi_square_tail_bound,
    chi_square_tail_exponent,
    compute_moment_report,
    concavity_check_f_rho,
    cond_first_moment_log,
    cond_second_moment_log,
    p_ty,
    q_tyrho,
)
from .experiments import (
    ExperimentConfig,
    ExperimentRecord,
    run_all_or_nothing_sweep,
    run_gamma_validation,
    run_moment_validation,
    run_ogp_probe,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "Instance",
    "generate_instance",
    "generate_pure_noise",
    "save_instance",
    "load_instance",
    "Regime",
    "ThresholdReport",
    "GammaCurve",
    "VacuousWindowError",
    "gamma",
    "gamma_curve",
    "thresholds",
    "lower_bound_curve",
    "ogp_window",
    "ogp_hypotheses_hold",
    "check_binomial_lemma",
    "NormMode",
    "SolveResult",
    "OverlapProfile",
    "LassoResult",
    "BudgetExceededError",
    "solve_exact",
    "solve_restricted",
    "solve_pure_noise",
    "overlap_profile",
    "lasso_baseline",
    "support_objective",
    "MomentReport",
    "p_ty",
    "q_tyrho",
    "cond_first_moment_log",
    "cond_second_moment_log",
    "chi_square_tail_exponent",
    "chi_square_tail_bound",
    "concavity_check_f_rho",
    "compute_moment_report",
    "ExperimentConfig",
    "ExperimentRecord",
    "run_all_or_nothing_sweep",
    "run_gamma_validation",
    "run_ogp_probe",
    "run_moment_validation",
    "__version__",
]
