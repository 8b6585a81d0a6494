"""residlab: residual-based anomaly detection in closed control loops.

Simulates observer-based LTI loops under additive sensor attacks and
evaluates three detectors against them: the conventional chi-squared test
on the residual, the same test on a low-pass filtered residual, and a
discontinuous-observer detector that reconstructs the attack signal from
its switching term.  Ships the matching stealthy-attack generators, a
threshold tuner built on an in-house incomplete gamma implementation, and
a scenario harness with a CLI for seeded, replayable experiments.
"""

from .attacks import (
    AttackContext,
    ConstantAttack,
    FilteredHiddenAttack,
    FilteredZeroAlarmAttack,
    HiddenAttack,
    NoAttack,
    SinusoidAttack,
    ZeroAlarmAttack,
    attack_from_config,
    sqrt_psd,
)
from .detection import (
    ButterworthBank,
    ChiSquaredConfig,
    ChiSquaredDetector,
    FilteredChiSquaredConfig,
    FilteredChiSquaredDetector,
    YfDetector,
    YfThresholdConfig,
    build_detector,
    butterworth_matrices,
    calibrate_af,
    chi2_distance,
    filtered_covariance_closed_form,
    filtered_covariance_exact,
    inv_reg_lower_gamma,
    invert_residual_covariance,
    predict_yf,
    reconstruct_attack,
    reg_lower_gamma,
    threshold_test,
    tune_threshold,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    DomainError,
    HorizonZero,
    MissingAttackerKnowledge,
    NonPSD,
    NonPSDNoise,
    NonPositiveStep,
    NotHurwitz,
    NotSchur,
    NumericError,
    NumericallySingular,
    ParseError,
    ResidLabError,
    SchemaError,
    SingularResidualCovariance,
    TraceTooShort,
    UnknownCase,
    UnstableClosedLoop,
    ValidationError,
    WrongPlantClass,
    ZeroPlantParameter,
)
from .estimation import (
    DiscObserverGains,
    DiscObserverState,
    disc_observer_step,
    sign,
    solve_lyapunov_continuous,
    solve_lyapunov_discrete,
)
from .harness import (
    RunReport,
    Scenario,
    benchmark_loop,
    load_scenario,
    reproduce,
    run_calibration,
    run_experiment,
    scenario_from_dict,
    write_trace_csv,
)
from .statespace import (
    DiscreteClosedLoop,
    PlantModel,
    RunStats,
    SimulationTrace,
    discretize,
    run_simulation,
    sample_noise,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "AttackContext",
    "ButterworthBank",
    "ChiSquaredConfig",
    "ChiSquaredDetector",
    "ConfigError",
    "ConstantAttack",
    "DimensionMismatch",
    "DiscObserverGains",
    "DiscObserverState",
    "DiscreteClosedLoop",
    "DomainError",
    "FilteredChiSquaredConfig",
    "FilteredChiSquaredDetector",
    "FilteredHiddenAttack",
    "FilteredZeroAlarmAttack",
    "HiddenAttack",
    "HorizonZero",
    "MissingAttackerKnowledge",
    "NoAttack",
    "NonPSD",
    "NonPSDNoise",
    "NonPositiveStep",
    "NotHurwitz",
    "NotSchur",
    "NumericError",
    "NumericallySingular",
    "ParseError",
    "PlantModel",
    "ResidLabError",
    "RunReport",
    "RunStats",
    "Scenario",
    "SchemaError",
    "SimulationTrace",
    "SingularResidualCovariance",
    "SinusoidAttack",
    "TraceTooShort",
    "UnknownCase",
    "UnstableClosedLoop",
    "ValidationError",
    "WrongPlantClass",
    "YfDetector",
    "YfThresholdConfig",
    "ZeroAlarmAttack",
    "ZeroPlantParameter",
    "attack_from_config",
    "benchmark_loop",
    "build_detector",
    "butterworth_matrices",
    "calibrate_af",
    "chi2_distance",
    "disc_observer_step",
    "discretize",
    "filtered_covariance_closed_form",
    "filtered_covariance_exact",
    "inv_reg_lower_gamma",
    "invert_residual_covariance",
    "load_scenario",
    "predict_yf",
    "reconstruct_attack",
    "reg_lower_gamma",
    "reproduce",
    "run_calibration",
    "run_experiment",
    "run_simulation",
    "sample_noise",
    "scenario_from_dict",
    "sign",
    "solve_lyapunov_continuous",
    "solve_lyapunov_discrete",
    "sqrt_psd",
    "threshold_test",
    "tune_threshold",
    "validate_model",
    "write_trace_csv",
]
