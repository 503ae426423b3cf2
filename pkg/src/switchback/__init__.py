"""Design-based estimation and inference for lagged effects in switchback experiments."""

from switchback.design import (
    AssignmentDesign,
    ExposureSpec,
    Sampler,
    draw_assignment,
    draw_assignments,
    exposure_moments,
    exposure_transform,
    generalized_weights,
    interaction_weights,
    lag_weights,
    make_rng,
    normalize,
    validate_path,
)
from switchback.dgp import (
    ARPOModel,
    LinearPOModel,
    MAPOModel,
    brute_force_tau,
    impulse_responses,
    simulate,
    true_interaction_tau,
    true_tau,
)
from switchback.exceptions import DataError, DesignError, NumericalError, SingularDesignError, SwitchbackError
from switchback.hac import HacConfig, HacCovariance, bias_term, default_bandwidth, hac_covariance
from switchback.inference import InferenceReport, confidence_intervals, frt_sharp, report, wald_test
from switchback.montecarlo import (
    Experiment,
    ExperimentConfig,
    ReplicationSet,
    analytic_variances,
    coverage_table,
    error_curves,
    oracle_V,
    replicate,
)
from switchback.regression import EstimateResult, RegressionSpec, build_design, estimate, ols_no_intercept, wls_lag0

__version__ = "0.1.0"
