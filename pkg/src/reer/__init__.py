"""Renewable expectile regression for streaming data batches."""

from .baselines import (
    BatchTooSmallError,
    DcerState,
    PaerState,
    WeightMode,
    dcer_finalize,
    dcer_init,
    dcer_update,
    merge,
    paer_finalize,
    paer_init,
    paer_update,
)
from .expectile import (
    Batch,
    Coefficients,
    IrlsConfig,
    IrlsFit,
    NoConvergenceError,
    asymmetric_loss,
    asymmetric_weight,
    batch_moments,
    irls_fit,
    loss_gradient,
    mean_loss,
    ols_fit,
    sandwich_covariance,
)
from .linalg import SingularMatrixError, accumulate_outer, spd_solve
from .renewable import SummaryState, current_estimate, fit_stream, init_state, renew_update
from .streams import (
    CsvBatchReader,
    EvalReport,
    MalformedRowError,
    StateFormatError,
    StreamSpec,
    evaluate_mpe,
    load_state,
    save_state,
)

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "BatchTooSmallError",
    "Coefficients",
    "CsvBatchReader",
    "DcerState",
    "EvalReport",
    "IrlsConfig",
    "IrlsFit",
    "MalformedRowError",
    "NoConvergenceError",
    "PaerState",
    "SingularMatrixError",
    "StateFormatError",
    "StreamSpec",
    "SummaryState",
    "WeightMode",
    "accumulate_outer",
    "asymmetric_loss",
    "asymmetric_weight",
    "batch_moments",
    "current_estimate",
    "dcer_finalize",
    "dcer_init",
    "dcer_update",
    "evaluate_mpe",
    "fit_stream",
    "init_state",
    "irls_fit",
    "load_state",
    "loss_gradient",
    "mean_loss",
    "merge",
    "ols_fit",
    "paer_finalize",
    "paer_init",
    "paer_update",
    "renew_update",
    "sandwich_covariance",
    "save_state",
    "spd_solve",
]
