"""Sensitivity spectra and quantum-limit certification for linear
optomechanical detectors with feedback."""

from .core import (
    DetectorModelError,
    DetectorNoiseModel,
    LoopGains,
    LoopSingularityError,
    OptimizerConfig,
    OptimumResult,
    PoleError,
    SamplerExhaustedError,
    Susceptibility,
    UnphysicalModelError,
    added_noise_spectrum,
    analytic_optimum_bound,
    bound_coefficients,
    displacement_sensitivity,
    force_sensitivity,
    is_physical,
    loop_factor,
    mech_susceptibility,
    numeric_optimum,
    sample_physical_noise,
    sql_displacement,
    sql_force,
    uncertainty_matrix,
    uql_displacement,
    uql_force,
)
from .optomech import (
    LambdaOptConfig,
    OptomechParams,
    SensitivityCurve,
    StateSpaceModel,
    TimeVariantModelError,
    ZeroSignalError,
    build_detuned_model,
    build_locking_model,
    force_to_displacement,
    frequency_grid,
    loop_factor_at,
    monitor_transfers,
    optimize_lambda,
    output_transfers,
    resolvent,
    sensitivity_at,
    sensitivity_point,
    stability,
    sweep_curve,
    transfer_at,
)

__version__ = "0.1.0"
