"""Counterfactual SARIMA intervention analysis.

Fit a seasonal ARIMA-with-regressors model on pre-intervention data,
forecast the post period under no intervention, and test point, cumulative
and temporal-average effects with exact Gaussian null distributions or
residual-bootstrap critical values.  Includes a full-sample step-dummy
comparator and a Monte-Carlo replication lab.
"""

__version__ = "0.1.0"

from .causal import (
    AnalysisConfig,
    CausalReport,
    EffectPath,
    EffectTest,
    TreatmentPath,
    bootstrap_test,
    estimate_effects_original,
    estimate_effects_transformed,
    gaussian_test,
    run_carima,
    validate_treatment,
)
from .dataio import Dataset, ingest_csv
from .errors import CarimaError
from .regarima import RegArimaResult, build_step_dummy, fit_regarima
from .report import emit_report
from .sarima import (
    FittedModel,
    Forecast,
    ModelOrder,
    SarimaParams,
    fit,
    forecast,
    log_likelihood,
    psi_weights,
    select_order,
)
from .series import (
    DiffSpec,
    InversionCoeffs,
    LagPolynomial,
    TimeSeries,
    difference,
    expand_diff_polynomial,
    invert_diff_polynomial,
    poly_multiply,
    undifference,
)
from .simlab import (
    DgpConfig,
    InterventionSpec,
    StudyTables,
    apply_intervention,
    run_study,
    simulate_control,
)

__all__ = [
    "AnalysisConfig",
    "CarimaError",
    "CausalReport",
    "Dataset",
    "DgpConfig",
    "DiffSpec",
    "EffectPath",
    "EffectTest",
    "FittedModel",
    "Forecast",
    "InterventionSpec",
    "InversionCoeffs",
    "LagPolynomial",
    "ModelOrder",
    "RegArimaResult",
    "SarimaParams",
    "StudyTables",
    "TimeSeries",
    "TreatmentPath",
    "apply_intervention",
    "bootstrap_test",
    "build_step_dummy",
    "difference",
    "emit_report",
    "estimate_effects_original",
    "estimate_effects_transformed",
    "expand_diff_polynomial",
    "fit",
    "fit_regarima",
    "forecast",
    "gaussian_test",
    "ingest_csv",
    "invert_diff_polynomial",
    "log_likelihood",
    "poly_multiply",
    "psi_weights",
    "run_carima",
    "run_study",
    "select_order",
    "simulate_control",
    "undifference",
    "validate_treatment",
]
