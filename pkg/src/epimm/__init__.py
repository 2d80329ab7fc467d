"""Minimax susceptible distributions for epidemics in metapopulations.

Groups are coupled by migration; susceptibles settle at a distribution
``pi`` and infectives migrate under a generator ``Q``. The package computes
growth rates and reproduction numbers of the early branching process, the
closed-form strategies that minimise their worst case over ``Q``, numerical
minimax checks, extinction and total-size outcomes, stochastic simulation
and the deterministic fluid models.
"""

import os as _os

# numba warns about old TBB builds; the workqueue layer needs nothing external
_os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

from .core import (  # noqa: E402
    GeneratorMatrix,
    InfectiveState,
    ModelParams,
    SimplexPoint,
    check_irreducible,
    generator_from_offdiag,
    stationary_distribution,
    validate_params,
)
from .errors import (  # noqa: E402
    AllRecoveryZero,
    ConditionViolated,
    DegenerateGroup,
    DimensionMismatch,
    EpimmError,
    IrreducibilityLost,
    LengthMismatch,
    MalformedGenerator,
    NegativeGamma,
    NoConvergence,
    NonPositiveBeta,
    NotIrreducible,
    OneWayEdge,
    SingularResidenceMatrix,
    StepSizeUnderflow,
    ValidationError,
    ZeroRecoveryGroup,
)
from .minimax import (  # noqa: E402
    GameResult,
    MinimaxResult,
    SearchBox,
    inf_pi_sup_Q_tau,
    minimax_r0,
    minimax_tau,
    sup_inf_tau,
    sup_r0_over_Q,
    sup_tau_over_Q,
)
from .ode import (  # noqa: E402
    FluidState,
    Trajectory,
    dfe_jacobian,
    dfe_spectrum_decomposition,
    integrate,
    match_spectra,
    ngm_ode,
    rhs_density,
    rhs_frequency,
)
from .outcomes import (  # noqa: E402
    Infinite,
    OutcomeReport,
    expected_total_size,
    extinction_prob_from_state,
    extinction_probs,
    outcome_report,
    pgf_eval,
)
from .sim import (  # noqa: E402
    SimConfig,
    SimOutcome,
    mc_extinction,
    mc_minor_outbreak,
    mc_total_size,
    simulate_branching,
    simulate_finite_N,
)
from .spectral import (  # noqa: E402
    SpectralPair,
    build_A,
    build_Lambda,
    expm_uniformized,
    mean_matrix,
    perron,
    r0,
    tau,
    tau_gradient,
)
from .strategies import (  # noqa: E402
    StrategyReport,
    adversarial_Q,
    border_controls,
    chi,
    condition_status,
    controlled_generator,
    epsilon_saddle_pi,
    omega,
    r0_optimal_pi,
    strategy_report,
    tau_optimal_pi,
)

__version__ = "0.1.0"

__all__ = [
    "GeneratorMatrix",
    "InfectiveState",
    "ModelParams",
    "SimplexPoint",
    "check_irreducible",
    "generator_from_offdiag",
    "stationary_distribution",
    "validate_params",
    "AllRecoveryZero",
    "ConditionViolated",
    "DegenerateGroup",
    "DimensionMismatch",
    "EpimmError",
    "IrreducibilityLost",
    "LengthMismatch",
    "MalformedGenerator",
    "NegativeGamma",
    "NoConvergence",
    "NonPositiveBeta",
    "NotIrreducible",
    "OneWayEdge",
    "SingularResidenceMatrix",
    "StepSizeUnderflow",
    "ValidationError",
    "ZeroRecoveryGroup",
    "GameResult",
    "MinimaxResult",
    "SearchBox",
    "inf_pi_sup_Q_tau",
    "minimax_r0",
    "minimax_tau",
    "sup_inf_tau",
    "sup_r0_over_Q",
    "sup_tau_over_Q",
    "FluidState",
    "Trajectory",
    "dfe_jacobian",
    "dfe_spectrum_decomposition",
    "integrate",
    "match_spectra",
    "ngm_ode",
    "rhs_density",
    "rhs_frequency",
    "Infinite",
    "OutcomeReport",
    "expected_total_size",
    "extinction_prob_from_state",
    "extinction_probs",
    "outcome_report",
    "pgf_eval",
    "SimConfig",
    "SimOutcome",
    "mc_extinction",
    "mc_minor_outbreak",
    "mc_total_size",
    "simulate_branching",
    "simulate_finite_N",
    "SpectralPair",
    "build_A",
    "build_Lambda",
    "expm_uniformized",
    "mean_matrix",
    "perron",
    "r0",
    "tau",
    "tau_gradient",
    "StrategyReport",
    "adversarial_Q",
    "border_controls",
    "chi",
    "condition_status",
    "controlled_generator",
    "epsilon_saddle_pi",
    "omega",
    "r0_optimal_pi",
    "strategy_report",
    "tau_optimal_pi",
]
