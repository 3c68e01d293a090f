"""Decay certificates for Riccati-type differential inequalities and the
regularised Newton flow (DSM) for monotone equations."""

__version__ = "0.1.0"

from .certificates import (
    Certificate,
    CertificateReport,
    ContinuousInequality,
    DiscreteCertificate,
    DiscreteInequality,
    bound,
    check_continuous,
    check_discrete,
    check_initial,
    check_split,
    default_grid,
)
from .coefficients import Constant, Exponential, PowerLaw, Sum, Tabulated, coefficient_from_dict
from .dsm import (
    DsmConfig,
    DsmTrace,
    auto_schedule,
    check_dsm_bound,
    dsm_rhs,
    estimate_minimal_norm,
    solve_dsm,
    solve_regularized,
)
from .errors import (
    DecayError,
    EmptyGrid,
    NonPositiveMu,
    NegativeAlpha,
    ThetaOutOfRange,
    LengthMismatch,
    StepConstraint,
    NonMonotoneMu,
    ExponentOutOfRange,
    DomainMismatch,
    RankOutOfRange,
    MissingDiagnostics,
    BlowUp,
    StepUnderflow,
    Overflow,
    SolveFailure,
    NoConvergence,
)
from .integrators import DenseSolution, integrate
from .oracles import (
    DiscreteRun,
    Trajectory,
    generate_certified_discrete_instance,
    generate_certified_instance,
    integrate_extremal,
    iterate_discrete,
    verify_trajectory_bound,
)
from .problems import (
    MonotoneProblem,
    ProblemSpec,
    build_problem,
    make_cubic_monotone,
    make_power_monotone,
    make_scalar_linear,
    make_singular_linear,
)
from .schedule import RegularizationSchedule, ScheduleParams, build_schedule, verify_schedule
