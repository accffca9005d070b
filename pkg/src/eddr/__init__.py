"""Bias-corrected Euclidean distance discriminant rule for high-dimensional data.

The package provides the two-group rule itself, consistent estimators of
the spectral (tr Sigma^i / p) and signal-strength (delta' Sigma^i delta)
functionals that govern its error, the limiting normal law of the
conditional misclassification error, two cut-off calibration policies
(expected-error and confidence-bound), an exact Wishart-moment oracle
used for verification, and a reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"

from .calibration import (
    CalibrationOutcome,
    CutoffRequest,
    CutoffResult,
    CutoffVariant,
    calibrate,
    gamma_logit,
    gamma_normal,
    m1_cutoff,
    m2_cutoff,
)
from .core import (
    PI1,
    PI2,
    Dims,
    LabeledSample,
    NormalParams,
    TwoSampleSummary,
    cholesky,
    classify,
    discriminant_score,
    oracle_score,
    pooled_summary,
    std_normal_cdf,
    std_normal_quantile,
    sym_sqrt,
)
from .error_model import (
    AsymptoticLaw,
    LimitParams,
    asymptotic_law,
    estimator_covariance,
    expected_error,
    h_u,
    h_uv,
    h_v,
    limit_params,
    statistic_covariance,
)
from .estimators import (
    DeltaEstimates,
    TraceEstimates,
    a1_hat,
    a2_hat,
    a3_hat,
    a4_hat,
    delta0_hat,
    delta1_hat,
    delta2_hat,
    delta3_hat,
    estimate_all,
)
from .exceptions import (
    CalibrationInfeasibleError,
    DataFormatError,
    DimensionError,
    EddrError,
    NotPositiveDefiniteError,
    SimulationError,
)
from .simulate import (
    SimConfig,
    SimResult,
    TrialRecord,
    attained_confidence_level,
    attained_error_rate,
    band_sigma,
    design_means,
    make_population,
    run_simulation,
    run_trial,
)
from .wishart import (
    MomentQuery,
    cov_delta01,
    moment_i,
    moment_ii,
    moment_iii,
    moment_iv,
    moment_v,
    moment_vi,
    moment_vii,
    quad_moment_mean,
    quad_moment_product,
    sample_wishart,
    var_a1,
    var_a2,
    var_delta0,
    var_delta1,
)
