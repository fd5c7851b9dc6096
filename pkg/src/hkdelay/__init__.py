"""Simulation and analysis of Hegselmann-Krause consensus dynamics with
transmission-type and reaction-type delay."""

from .errors import (
    HKDelayError,
    HistoryUnderflow,
    InvalidConfig,
    InvalidDatum,
    InvalidInterval,
    InvalidProblem,
    InvalidWeights,
    NoRootFound,
    NonFinite,
    NonPositiveSeries,
    OutOfRange,
    PreconditionViolated,
    SpecError,
)
from .model import (
    DatumKind,
    DelayKind,
    InfluenceFunction,
    InfluenceKind,
    InitialDatum,
    RowSumContract,
    SystemConfig,
    WeightMatrix,
    WeightScheme,
    check_icass,
    eval_weights,
    has_symmetric_weights,
    psi_floor,
    weights_from_states,
)
from .dynamics import (
    IntegratorSpec,
    Method,
    Trajectory,
    default_spec,
    integrate,
    integrate_oracle,
    rhs,
    trajectory_to_csv,
    trajectory_to_json,
    velocity_from_states,
)
from .metrics import (
    MetricSeries,
    compute_metrics,
    consensus_time,
    count_sign_changes,
    diameter,
    dissipation,
    fit_decay_rate,
    fluctuation,
    lyapunov,
    mean,
    radius,
)
from .rates import (
    HalanayProblem,
    Measure,
    PreconditionReport,
    RateResult,
    ShrinkEstimate,
    check_preconditions,
    convexity_bound_check,
    psi0_lower_bound,
    rate_reaction_nonsymmetric,
    rate_transmission_normalized,
    shrink_factor,
    shrink_iteration,
    simulate_equality_case,
    solve_halanay,
)
from .toy import (
    CharRoot,
    ToyRegime,
    ToySeries,
    classify_regime,
    fitted_decay_rate,
    rightmost_root,
    simulate_toy,
)

__version__ = "0.1.0"
