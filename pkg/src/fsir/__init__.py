"""Functional single- and multiple-index regression.

A scalar response is modelled through one or more indices of a curve
predictor, each index being the integral of the curve against an unknown
direction function expanded in the estimated principal component basis.
"""

from .cv import CvGrid, CvResult, cv_score, default_cv_grid, fold_indices, select_tuning
from .fpca import Basis, estimate_eigenbasis, estimate_mean, project_scores
from .functional_data import (
    CsvParseError,
    Curve,
    CurveSet,
    GridMismatchError,
    TimeGrid,
    inner_product,
    l2_distance,
    load_csv,
    normalize_area,
    write_csv,
)
from .index import (
    FitReport,
    IndexModel,
    ObjectiveUndefinedError,
    coordinate_grid_start,
    fit_single_index,
    minimize,
    normalize_sign,
    objective,
    predict,
    predict_with_flags,
)
from .multi_index import (
    MultiIndexFitError,
    MultiIndexModel,
    backfit,
    fit_recursive,
    loo_error,
    predict_multi,
)
from .persistence import ModelFormatError, load_model, save_model
from .smoother import (
    BACKEND,
    LooFit,
    SmootherConfig,
    epanechnikov,
    link_evaluate,
    loo_fit,
    loo_predict,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Basis", "CsvParseError", "Curve", "CurveSet", "CvGrid", "CvResult",
    "FitReport", "GridMismatchError", "IndexModel", "LooFit", "ModelFormatError",
    "MultiIndexFitError", "MultiIndexModel", "ObjectiveUndefinedError", "SmootherConfig",
    "TimeGrid", "backfit", "coordinate_grid_start", "cv_score", "default_cv_grid",
    "epanechnikov", "estimate_eigenbasis", "estimate_mean", "fit_recursive", "fit_single_index",
    "fold_indices", "inner_product", "l2_distance", "link_evaluate", "load_csv", "load_model",
    "loo_error", "loo_fit", "loo_predict", "minimize", "normalize_area", "normalize_sign",
    "objective", "predict", "predict_multi", "predict_with_flags", "project_scores",
    "save_model", "select_tuning", "write_csv",
]
