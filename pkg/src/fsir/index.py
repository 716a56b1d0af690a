"""Single-index estimation: leave-one-out least squares over basis coefficients.

The direction is parameterized as ``beta = sum_k b_k psi_k`` and the index of
curve i is ``z_i = sum_k b_k xi_ik``. For given ``b`` the criterion is the
mean squared leave-one-out residual of the kernel smoother of Y on z.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .fpca import Basis, project_scores
from .functional_data import Curve, CurveSet, GridMismatchError
from .smoother import SmootherConfig, link_evaluate_many, loo_fit, loo_predict, loo_sse

__all__ = [
    "ObjectiveUndefinedError",
    "IndexModel",
    "FitReport",
    "objective",
    "coordinate_grid_start",
    "minimize",
    "fit_single_index",
    "predict",
    "predict_with_flags",
    "normalize_sign",
]

log = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 21
SIMPLEX_TOL = 1e-6
SIMPLEX_STEP = 0.1
EVALS_PER_COEF = 500


class ObjectiveUndefinedError(ValueError):
    """Every point was dropped by the kernel-mass threshold; check h and lambda."""


def normalize_sign(b) -> np.ndarray:
    """Scale to unit norm and make the first nonzero coordinate positive."""
    b = np.asarray(b, dtype=float)
    nrm = np.linalg.norm(b)
    if not np.isfinite(nrm) or nrm == 0:
        raise ValueError("coefficient vector must be finite and nonzero")
    b = b / nrm
    nz = np.flatnonzero(b)
    if b[nz[0]] < 0:
        b = -b
    return b


def _index_values(b, scores) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    return scores[:, : b.size] @ b


def objective(b, scores, y, cfg: SmootherConfig) -> float:
    """Mean squared leave-one-out residual over the non-dropped points."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or not np.any(b):
        raise ValueError("b must be a nonzero vector")
    sse, kept = loo_sse(_index_values(b, scores), y, cfg)
    if kept == 0:
        raise ObjectiveUndefinedError(
            f"all {len(y)} points dropped (bandwidth={cfg.bandwidth:g}, threshold={cfg.threshold:g})"
        )
    return sse / kept


def _safe_objective(b, scores, y, cfg) -> float:
    try:
        return objective(b, scores, y, cfg)
    except (ObjectiveUndefinedError, ValueError):
        return np.inf


def _argmin_keep_incumbent(values, incumbent_idx) -> int:
    """Smallest-index argmin, except an incumbent that attains the minimum is kept."""
    values = np.asarray(values)
    if not np.any(np.isfinite(values)):
        return incumbent_idx
    best = int(np.argmin(values))
    if incumbent_idx is not None and values[incumbent_idx] <= values[best]:
        return incumbent_idx
    return best


def coordinate_grid_start(
    scores, y, cfg: SmootherConfig, grid_size: int = DEFAULT_GRID_SIZE, normalize: bool = False
) -> np.ndarray:
    """Starting coefficients from one-dimensional grid searches.

    b_1 is searched on a grid over [0, 1] with the other coordinates zero,
    then b_2 on [-1, 1] holding b_1, and so on. The incumbent value (1 for
    b_1, 0 for the rest) is only replaced by a strictly better grid point,
    so a flat criterion returns e_1. The criterion is evaluated at b as is
    with the bandwidth fixed, so the scan picks the scale of b relative to h
    as well as its direction. The zero vector is skipped. With ``normalize`` it
    is evaluated at b/|b| instead, which confines later coordinates to
    within 45 degrees of the first.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    scores = np.asarray(scores, dtype=float)
    r = scores.shape[1]
    y = np.asarray(y, dtype=float)

    def f(b):
        if not normalize:
            return _safe_objective(b, scores, y, cfg)
        if not np.any(b):
            return np.inf
        return _safe_objective(b / np.linalg.norm(b), scores, y, cfg)

    b = np.zeros(r)
    b[0] = 1.0
    g1 = np.linspace(0.0, 1.0, grid_size)
    g2 = np.linspace(-1.0, 1.0, grid_size)
    for k in range(r):
        grid = g1 if k == 0 else g2
        vals = []
        for v in grid:
            cand = b.copy()
            cand[k] = v
            vals.append(f(cand))
        incumbent = b[k]
        hit = np.flatnonzero(np.isclose(grid, incumbent, rtol=0, atol=1e-12))
        inc_idx = int(hit[0]) if hit.size else None
        idx = _argmin_keep_incumbent(vals, inc_idx)
        if idx is not None:
            b[k] = grid[idx]
    if not np.any(b):
        b = np.zeros(r)
        b[0] = 1.0
    return b


@dataclass
class FitReport:
    objective: float
    n_dropped: int
    iterations: int
    evaluations: int
    start: np.ndarray
    bandwidth: float
    mode: str = "constrained"
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)


def minimize(
    b0,
    scores,
    y,
    cfg: SmootherConfig,
    mode: Literal["constrained", "rescale"] = "constrained",
    max_evals: int | None = None,
) -> tuple[np.ndarray, FitReport]:
    """Nelder-Mead descent on the leave-one-out criterion.

    ``constrained`` evaluates the criterion at b/|b| with the bandwidth held
    fixed. ``rescale`` optimizes b freely from ``b0`` as given and then maps
    (b, h) to (b/|b|, h/|b|); the report's ``bandwidth`` carries the rescaled
    value.
    The returned coefficients are unit norm with the first nonzero entry
    positive, and never score worse than the start.
    """
    if mode not in ("constrained", "rescale"):
        raise ValueError(f"unknown mode {mode!r}")
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    if not np.all(np.isfinite(b0)) or not np.any(b0):
        raise ValueError("start point must be finite and nonzero")
    r = b0.size
    if mode == "constrained":
        x0 = b0 / np.linalg.norm(b0)

        def f(b):
            nrm = np.linalg.norm(b)
            return np.inf if nrm == 0 else _safe_objective(b / nrm, scores, y, cfg)
    else:
        x0 = b0.copy()

        def f(b):
            return _safe_objective(b, scores, y, cfg) if np.any(b) else np.inf

    f0 = f(x0)
    if not np.isfinite(f0):
        raise ValueError(f"criterion is undefined at the start point {x0}")

    max_evals = EVALS_PER_COEF * r if max_evals is None else max_evals
    simplex = np.vstack([x0, x0 + SIMPLEX_STEP * np.eye(r)])
    res = _scipy_minimize(
        f,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": SIMPLEX_TOL,
            "fatol": np.inf,
            "maxfev": max_evals,
            "maxiter": max_evals,
        },
    )
    bx, fx = np.asarray(res.x, dtype=float), float(res.fun)
    if not np.isfinite(fx) or fx > f0 or not np.any(bx):
        bx, fx = x0, f0
    nrm = np.linalg.norm(bx)
    h = cfg.bandwidth / nrm if mode == "rescale" else cfg.bandwidth
    b_hat = normalize_sign(bx)
    out_cfg = cfg.with_bandwidth(h)
    fit = loo_fit(_index_values(b_hat, scores), y, out_cfg)
    report = FitReport(
        objective=objective(b_hat, scores, y, out_cfg),
        n_dropped=fit.n_dropped,
        iterations=int(res.nit),
        evaluations=int(res.nfev),
        start=x0,
        bandwidth=h,
        mode=mode,
        converged=bool(res.success),
    )
    return b_hat, report


@dataclass(frozen=True, eq=False)
class IndexModel:
    """A fitted single-index component: direction, bandwidth and link data.

    The link is the kernel smoother through ``(index_values, targets)``.
    """

    basis: Basis
    coefficients: np.ndarray
    smoother: SmootherConfig
    index_values: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.coefficients, dtype=float)
        if b.ndim != 1 or b.size < 1 or b.size > self.basis.r_max:
            raise ValueError("coefficient count must be between 1 and the basis size")
        if abs(np.linalg.norm(b) - 1.0) > 1e-9:
            raise ValueError("coefficients must have unit norm")
        if b[np.flatnonzero(b)[0]] < 0:
            raise ValueError("first nonzero coefficient must be positive")
        z = np.asarray(self.index_values, dtype=float)
        t = np.asarray(self.targets, dtype=float)
        if z.shape != t.shape or z.ndim != 1:
            raise ValueError("index values and targets must align")
        for name, arr in (("coefficients", b), ("index_values", z), ("targets", t)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def r(self) -> int:
        return self.coefficients.size

    @property
    def bandwidth(self) -> float:
        return self.smoother.bandwidth

    @property
    def beta_curve(self) -> Curve:
        return self.basis.combine(self.coefficients)

    def index_of(self, data: CurveSet) -> np.ndarray:
        return _index_values(self.coefficients, project_scores(data, self.basis, self.r))

    def fitted_loo(self) -> np.ndarray:
        """Leave-one-out link values at the training index values."""
        return loo_predict(self.index_values, self.targets, self.smoother)


def fit_single_index(
    data: CurveSet,
    basis: Basis,
    h: float,
    r: int,
    cfg: SmootherConfig | None = None,
    *,
    mode: Literal["constrained", "rescale"] = "constrained",
    grid_size: int = DEFAULT_GRID_SIZE,
    start=None,
    scores=None,
) -> tuple[IndexModel, FitReport]:
    """Estimate direction and link for one index with bandwidth ``h`` and ``r`` basis terms.

    ``start`` adds a candidate starting vector (used for warm restarts in
    backfitting); the better of it and the grid-search start is used.
    ``scores`` may pass precomputed basis scores for ``data``.
    """
    y = data.require_responses()
    if data.n < 3:
        raise ValueError("need at least 3 curves to fit an index")
    if not 1 <= r <= basis.r_max:
        raise ValueError(f"r={r} out of range 1..{basis.r_max}")
    cfg = (cfg or SmootherConfig()).with_bandwidth(h)
    if scores is None:
        scores = project_scores(data, basis, r)
    scores = np.asarray(scores, dtype=float)[:, :r]
    b0 = coordinate_grid_start(scores, y, cfg, grid_size)
    if start is not None:
        start = np.asarray(start, dtype=float)[:r]
        if np.any(start):
            s = start / np.linalg.norm(start)
            g = b0 / np.linalg.norm(b0) if mode == "constrained" else b0
            if _safe_objective(s, scores, y, cfg) < _safe_objective(g, scores, y, cfg):
                b0 = s
    b_hat, report = minimize(b0, scores, y, cfg, mode)
    out_cfg = cfg.with_bandwidth(report.bandwidth)
    model = IndexModel(basis, b_hat, out_cfg, _index_values(b_hat, scores), y)
    log.debug("fit r=%d h=%.4g objective=%.5g evals=%d", r, h, report.objective, report.evaluations)
    return model, report


def predict_with_flags(
    model: IndexModel, newdata: CurveSet, fallback: Literal["mean", "nearest"] = "mean"
) -> tuple[np.ndarray, np.ndarray]:
    """Predictions plus a mask of curves whose index fell outside the link's support.

    Out-of-support predictions are replaced by the mean training target, or
    with ``fallback="nearest"`` by the target at the closest training index.
    """
    if newdata.grid != model.basis.grid:
        raise GridMismatchError("new curves are not on the model's grid")
    u = model.index_of(newdata)
    z, t = model.index_values, model.targets
    vals = link_evaluate_many(u, z, t, model.smoother)
    outside = np.isnan(vals)
    if fallback == "mean":
        vals = np.where(outside, t.mean(), vals)
    elif fallback == "nearest":
        for j in np.flatnonzero(outside):
            dist = np.abs(z - u[j])
            vals[j] = t[dist == dist.min()].mean()
    else:
        raise ValueError(f"unknown fallback {fallback!r}")
    return vals, outside


def predict(model: IndexModel, newdata: CurveSet, fallback: str = "mean") -> np.ndarray:
    return predict_with_flags(model, newdata, fallback)[0]
