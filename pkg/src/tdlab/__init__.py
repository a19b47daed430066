"""Linear TD(0) with arbitrary features: fixed-point sets, mean-ODE limits, experiments."""

from .errors import (
    AssumptionViolation,
    BudgetTooSmall,
    InconsistentSystem,
    InvalidStochastic,
    NonFiniteIterate,
    NotIrreducible,
    ParseError,
    TdlabError,
    ValidationError,
    ZeroEigenvalueNotSemisimple,
)
from .fixed_points import (
    FixedPointSet,
    TdLinearSystem,
    build_system,
    check_equivalence,
    distance_to_fixed_set,
    mspbe,
    solve_fixed_points,
)
from .linalg import (
    FeatureMap,
    Projector,
    d_norm,
    least_norm_weight,
    numerical_rank,
    projection_matrix,
    pseudo_inverse,
)
from .markov import (
    Mdp,
    Policy,
    PolicyChain,
    bellman_apply,
    check_irreducible,
    induce_chain,
    stationary_distribution,
    true_value,
)
from .ode import (
    OdeLimit,
    OdeTrajectory,
    bounded_invariant_check,
    limit_projector,
    matrix_exponential,
    ode_solution,
    rk4_trajectory,
    spectral_gap,
    w_infinity,
)
from .sa_checks import (
    AssumptionReport,
    PairChain,
    build_pair_chain,
    check_assumptions,
    fundamental_matrix,
    gamma_projection,
    poisson_residual,
)
from .td import (
    LearningRateSchedule,
    TdConfig,
    TdTrace,
    local_stability_report,
    m_horizon,
    run_td,
    sample_step,
    schedule_alpha,
    td_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
