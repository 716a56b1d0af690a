"""Additive multiple-index models: recursive residual fitting and backfitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cv import CvGrid, select_tuning
from .fpca import Basis, project_scores
from .functional_data import CurveSet, l2_distance
from .index import IndexModel, fit_single_index, predict
from .smoother import SmootherConfig

__all__ = [
    "MultiIndexModel",
    "MultiIndexFitError",
    "fit_recursive",
    "backfit",
    "predict_multi",
    "loo_error",
]

log = logging.getLogger(__name__)

GridSpec = CvGrid | Callable[[CurveSet, Basis], CvGrid]


class MultiIndexFitError(RuntimeError):
    """A component fit failed; ``partial`` holds the components fitted so far."""

    def __init__(self, message, partial: "MultiIndexModel"):
        super().__init__(message)
        self.partial = partial


@dataclass
class MultiIndexModel:
    components: list
    iterations_used: int = 0
    converged: bool = False
    final_delta: float = float("nan")
    tol: float = 0.01
    diagnostics: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def basis(self) -> Basis:
        return self.components[0].basis

    def truncated(self, k: int) -> "MultiIndexModel":
        """The first k components, as a fresh recursive-fit model."""
        if not 1 <= k <= self.p:
            raise ValueError(f"k must be in 1..{self.p}")
        return MultiIndexModel(list(self.components[:k]), tol=self.tol)


def _resolve_grid(grid: GridSpec, data, basis) -> CvGrid:
    return grid(data, basis) if callable(grid) else grid


def fit_recursive(
    data: CurveSet,
    basis: Basis,
    p: int,
    grid: GridSpec,
    cfg: SmootherConfig | None = None,
    *,
    mode: str = "constrained",
    grid_size: int = 21,
    threads: int | None = None,
) -> MultiIndexModel:
    """Fit p components one at a time, each to the residuals of those before it.

    Each step re-selects (r, h) by cross-validation on the current residuals
    and subtracts the component's leave-one-out fitted values.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    y = data.require_responses()
    scores = project_scores(data, basis)
    target = y.copy()
    residuals = [target.copy()]
    comps: list[IndexModel] = []
    tuning = []
    for k in range(p):
        current = data.with_responses(target)
        try:
            g = _resolve_grid(grid, current, basis)
            pairs = [(r, h) for r, h in g.pairs() if r <= basis.r_max]
            if len(pairs) == 1:
                r, h = pairs[0]
            else:
                sel = select_tuning(current, basis, g, cfg, mode=mode,
                                    grid_size=grid_size, threads=threads)
                r, h = sel.r, sel.h
            comp, _ = fit_single_index(current, basis, h, r, cfg, mode=mode,
                                       grid_size=grid_size, scores=scores)
        except ValueError as exc:
            partial = MultiIndexModel(comps, diagnostics={"residuals": residuals, "tuning": tuning})
            raise MultiIndexFitError(f"component {k + 1} failed: {exc}", partial) from exc
        comps.append(comp)
        tuning.append((r, h))
        target = target - comp.fitted_loo()
        residuals.append(target.copy())
        log.info("component %d: r=%d h=%.4g", k + 1, r, h)
    return MultiIndexModel(comps, diagnostics={"residuals": residuals, "tuning": tuning})


def backfit(
    data: CurveSet,
    basis: Basis,
    initial: MultiIndexModel,
    cfg: SmootherConfig | None = None,
    tol: float = 0.01,
    max_iter: int = 10,
    *,
    mode: str = "constrained",
    grid_size: int = 21,
) -> MultiIndexModel:
    """Cyclically refit each component against the partial residuals of the others.

    Within pass d, component k is refitted to Y minus the already updated
    components j < k and the previous-pass components j > k. Each component
    keeps its (r, h). Iteration stops when the first direction moves less
    than ``tol`` in L2 or after ``max_iter`` passes.
    """
    if initial.p < 1:
        raise ValueError("initial model has no components")
    if max_iter < 0:
        raise ValueError("max_iter must be nonnegative")
    if max_iter == 0:
        return initial
    y = data.require_responses()
    scores = project_scores(data, basis)
    comps = list(initial.components)
    fitted = [c.fitted_loo() for c in comps]
    kind_cfg = cfg or comps[0].smoother
    deltas, drift = [], []
    delta = float("nan")
    d = 0
    for d in range(1, max_iter + 1):
        before = [c.beta_curve for c in comps]
        for k, old in enumerate(comps):
            partial = y - sum(f for j, f in enumerate(fitted) if j != k)
            c_cfg = SmootherConfig(kind_cfg.kind, old.bandwidth, kind_cfg.threshold)
            new, _ = fit_single_index(
                data.with_responses(partial), basis, old.bandwidth, old.r, c_cfg,
                mode=mode, grid_size=grid_size, start=old.coefficients, scores=scores,
            )
            comps[k] = new
            fitted[k] = new.fitted_loo()
        moves = [l2_distance(b, c.beta_curve) for b, c in zip(before, comps)]
        delta = moves[0]
        deltas.append(delta)
        drift.append(moves[1:])
        if delta < tol:
            break
    return MultiIndexModel(
        comps,
        iterations_used=d,
        converged=bool(delta < tol),
        final_delta=delta,
        tol=tol,
        diagnostics={"deltas": deltas, "drift": drift},
    )


def predict_multi(model: MultiIndexModel, newdata: CurveSet) -> np.ndarray:
    """Sum of the component predictions."""
    return np.sum([predict(c, newdata) for c in model.components], axis=0)



def loo_error(model: IndexModel | MultiIndexModel, y) -> float:
    """Mean squared leave-one-curve-out error of ``y`` at the fitted directions.

    Each curve's response is predicted by the link smoothers built from the
    other curves; the directions themselves are not re-estimated.
    """
    comps = [model] if isinstance(model, IndexModel) else model.components
    resid = np.asarray(y, dtype=float) - sum(c.fitted_loo() for c in comps)
    return float(resid @ resid / resid.size)
