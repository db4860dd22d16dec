"""Born's rule with a fourth-order detection correction: probabilities, optima, simulation."""

from .deviation import (
    DeviationReport,
    FirstOrderValidityWarning,
    GaussianOptimum,
    ModelParams,
    delta_first_order,
    deviation_report,
    exact_generalized_probability,
    gamma_constant,
    gaussian_delta_closed_form,
    gaussian_max_delta,
    gaussian_optimal_length,
    generalized_probability_first_order,
    optimize_interval,
    required_dispersion,
    scan_delta,
    step_delta_closed_form,
)
from .errors import (
    ConfigError,
    DegenerateSupport,
    GenbornError,
    InvalidParameter,
    NonConvergence,
    NonFinite,
    OutOfRange,
    ZeroNorm,
)
from .experiment import ExperimentPlan, PowerRequest, TrialOutcome, build_sampler, required_sample_size, run_experiment
from .numerics import Bracket, Interval, Tolerance, erf, erfc, golden_section_max, integrate
from .states import (
    AsymmetricStep,
    Gaussian,
    SymmetricUniform,
    Tabulated,
    WaveFunction,
    abs2_integral,
    abs4_integral,
    abs4_total,
    construct,
    density,
    load_tabulated,
)

__version__ = "0.1.0"
