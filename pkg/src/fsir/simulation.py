"""Synthetic single- and multiple-index designs, error metrics and Monte Carlo driver.

Predictors are ``X_i(t) = t + sum_k xi_ik phi_k(t)`` on 50 equispaced points
of [0, 1] with trigonometric ``phi_k`` normalized to unit L2 norm and
``xi_ik ~ N(0, lambda_k)``, ``lambda = (1, 1/2, 1/4, 1/8)``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from .cv import CvGrid, default_cv_grid, select_tuning
from .fpca import estimate_eigenbasis
from .functional_data import Curve, CurveSet, TimeGrid, l2_distance
from .index import fit_single_index
from .multi_index import backfit, fit_recursive
from .smoother import SmootherConfig, loo_predict

__all__ = [
    "MODEL_IDS",
    "SimScenario",
    "FitMethod",
    "McSummary",
    "basis_functions",
    "beta_curve",
    "generate_predictors",
    "true_components",
    "generate_response",
    "rase",
    "rse",
    "monte_carlo",
]

log = logging.getLogger(__name__)

EIGENVALUES = np.array([1.0, 0.5, 0.25, 0.125])
GRID_POINTS = 50

_S3, _S6 = 1 / np.sqrt(3), 1 / np.sqrt(6)
BETA_COEFS = np.array([
    [_S3, _S3, _S6, _S6],
    [_S3, -_S3, -_S6, _S6],
    [-_S3, _S3, _S6, _S6],
])

Link = Callable[[np.ndarray], np.ndarray]

# (direction index, link) per additive component
_COMPONENTS: dict[str, list[tuple[int, Link]]] = {
    "i": [(0, np.cos)],
    "ii": [(0, np.square)],
    "iii": [(0, lambda z: z)],
    "iv": [(0, lambda z: np.exp(2.0 + z))],
    "v": [(0, lambda z: 0.5 * np.cos(2.0 * z) + 0.5)],
    "vi": [(0, np.cos), (1, lambda z: 0.5 * np.sin(z))],
    "vii": [(0, lambda z: z), (1, lambda z: np.exp(0.5 * z))],
    "viii": [(0, lambda z: z), (1, lambda z: 0.5 * z**2)],
    "ix": [(0, lambda z: z), (1, lambda z: np.exp(0.5 * z)), (2, lambda z: 0.5 * z**2)],
    "x": [(0, lambda z: z), (1, lambda z: 0.5 * z**2), (2, lambda z: 0.25 * z**3)],
}
_NOISE = {"iv": "poisson", "v": "binomial"}
MODEL_IDS = tuple(_COMPONENTS)


def _check_model(model_id: str) -> str:
    mid = str(model_id).strip().lower()
    if mid not in _COMPONENTS:
        raise ValueError(f"unknown model id {model_id!r}; expected one of {', '.join(MODEL_IDS)}")
    return mid


def n_indices(model_id: str) -> int:
    return len(_COMPONENTS[_check_model(model_id)])


@dataclass(frozen=True)
class SimScenario:
    model_id: str
    N: int
    R: float = 0.1
    seed: int = 0
    grid_points: int = GRID_POINTS

    def __post_init__(self):
        object.__setattr__(self, "model_id", _check_model(self.model_id))
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.R < 0:
            raise ValueError("noise ratio R must be nonnegative")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.equispaced(self.grid_points)


def basis_functions(grid: TimeGrid) -> np.ndarray:
    """The four generating functions as rows, shape (4, m)."""
    t = grid.points
    s2 = np.sqrt(2.0)
    return np.stack([
        s2 * np.sin(2 * np.pi * t),
        s2 * np.cos(2 * np.pi * t),
        s2 * np.sin(4 * np.pi * t),
        s2 * np.cos(4 * np.pi * t),
    ])


def beta_curve(j: int, grid: TimeGrid) -> Curve:
    """True direction function j (0-based) of the simulation designs."""
    return Curve(grid, BETA_COEFS[j] @ basis_functions(grid))


def generate_predictors(scn: SimScenario) -> CurveSet:
    grid = scn.grid
    rng = np.random.default_rng(scn.seed)
    xi = rng.standard_normal((scn.N, 4)) * np.sqrt(EIGENVALUES)
    values = grid.points[None, :] + xi @ basis_functions(grid)
    return CurveSet(grid, values)


def true_components(model_id: str, data: CurveSet) -> np.ndarray:
    """Noiseless component signals g_j(<beta_j, X_i>), shape (p, n).

    The mean response is their sum.
    """
    mid = _check_model(model_id)
    w = data.grid.weights
    out = []
    for j, link in _COMPONENTS[mid]:
        z = data.values @ (w * beta_curve(j, data.grid).values)
        out.append(link(z))
    return np.array(out)


def generate_response(model_id: str, data: CurveSet, R: float, seed: int) -> np.ndarray:
    """Responses for a design; Gaussian noise variance is R times the sample signal variance.

    R is ignored for the Poisson (iv) and Bernoulli (v) designs.
    """
    mid = _check_model(model_id)
    if R < 0:
        raise ValueError("R must be nonnegative")
    signal = true_components(mid, data).sum(axis=0)
    rng = np.random.default_rng(seed)
    kind = _NOISE.get(mid)
    if kind == "poisson":
        return rng.poisson(signal).astype(float)
    if kind == "binomial":
        return rng.binomial(1, np.clip(signal, 0.0, 1.0)).astype(float)
    if R == 0:
        return signal
    return signal + rng.standard_normal(data.n) * np.sqrt(R * np.var(signal))


def rase(predictions, signal) -> float:
    """Root average squared error against the noiseless signal."""
    p = np.asarray(predictions, dtype=float)
    s = np.asarray(signal, dtype=float)
    if p.shape != s.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {s.shape}")
    return float(np.sqrt(np.mean((p - s) ** 2)))


def rse(beta_hat: Curve, beta_true: Curve) -> float:
    """L2 distance between direction functions after aligning the sign."""
    return min(l2_distance(beta_hat, beta_true), l2_distance(-beta_hat, beta_true))


@dataclass(frozen=True)
class FitMethod:
    """How each Monte Carlo replicate is fitted.

    ``indices`` > 1 fits recursively (and with ``backfit`` also by
    backfitting). ``fixed_h``/``fixed_r`` skip cross-validation.
    """

    kind: Literal["local_constant", "local_linear"] = "local_constant"
    indices: int = 1
    backfit: bool = False
    threshold: float = 0.1
    mode: Literal["constrained", "rescale"] = "constrained"
    folds: int = 10
    r_candidates: tuple | None = None
    n_h: int = 10
    fixed_h: float | None = None
    fixed_r: int | None = None
    grid_size: int = 21
    backfit_tol: float = 0.01
    backfit_max_iter: int = 10

    @property
    def smoother(self) -> SmootherConfig:
        return SmootherConfig(self.kind, 1.0, self.threshold)


@dataclass
class McSummary:
    scenario: SimScenario
    method: FitMethod
    runs: int
    k_max: int
    per_run: list = field(default_factory=list)  # dicts of metric -> value
    failures: list = field(default_factory=list)  # (run, message)

    @property
    def metrics(self) -> list[str]:
        keys: list[str] = []
        for row in self.per_run:
            keys.extend(k for k in row if k not in keys)
        return keys

    def values(self, metric: str) -> np.ndarray:
        return np.array([row[metric] for row in self.per_run if metric in row], dtype=float)

    def mean(self, metric: str) -> float:
        return float(np.mean(self.values(metric)))

    def median(self, metric: str) -> float:
        return float(np.median(self.values(metric)))

    def stderr(self, metric: str) -> float:
        v = self.values(metric)
        return float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0

    def summary_row(self) -> dict:
        scn = self.scenario
        row = {"model": scn.model_id, "N": scn.N, "R": scn.R, "runs": self.runs,
               "completed": len(self.per_run), "failed": len(self.failures)}
        for m in self.metrics:
            row[m] = self.mean(m)
        for m in self.metrics:
            row[f"{m}_se"] = self.stderr(m)
        return row

    def to_csv(self, path) -> None:
        row = self.summary_row()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(list(row))
            w.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])

    def per_run_csv(self, path) -> None:
        metrics = self.metrics
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["run", *metrics])
            for i, row in enumerate(self.per_run):
                w.writerow([i, *(repr(row.get(m, float("nan"))) for m in metrics)])


def _basis_for(data: CurveSet, method: FitMethod):
    r_top = max(method.r_candidates or (6,))
    if method.fixed_r is not None:
        r_top = max(r_top, method.fixed_r)
    r_max = min(r_top, data.n - 1, len(data.grid))
    return estimate_eigenbasis(data, r_max)


def _grid_factory(method: FitMethod, seed: int):
    def make(data, basis):
        if method.fixed_h is not None and method.fixed_r is not None:
            return CvGrid((method.fixed_h,), (method.fixed_r,), 2, seed)
        g = default_cv_grid(data, basis, method.folds, seed, method.r_candidates, method.n_h)
        if method.fixed_h is not None:
            g = replace(g, h_candidates=(method.fixed_h,))
        if method.fixed_r is not None:
            g = replace(g, r_candidates=(method.fixed_r,))
        return g
    return make


def _single_run(scn: SimScenario, method: FitMethod, k_max: int) -> dict:
    data = generate_predictors(scn)
    y = generate_response(scn.model_id, data, scn.R, scn.seed + 1_000_003)
    data = data.with_responses(y)
    comps = true_components(scn.model_id, data)
    signal = comps.sum(axis=0)
    p_true = comps.shape[0]
    basis = _basis_for(data, method)
    make_grid = _grid_factory(method, scn.seed)
    cfg = method.smoother
    out: dict = {}

    if k_max == 1 and method.indices == 1:
        grid = make_grid(data, basis)
        if len(grid.pairs()) == 1:
            r, h = grid.pairs()[0]
        else:
            sel = select_tuning(data, basis, grid, cfg, mode=method.mode, grid_size=method.grid_size)
            r, h = sel.r, sel.h
        model, _ = fit_single_index(data, basis, h, r, cfg, mode=method.mode, grid_size=method.grid_size)
        out["RASE"] = rase(loo_predict(model.index_values, y, model.smoother), signal)
        out["RSE"] = rse(model.beta_curve, beta_curve(_COMPONENTS[scn.model_id][0][0], data.grid))
        out["r"] = float(model.r)
        out["h"] = model.bandwidth
        return out

    rec = fit_recursive(data, basis, k_max, make_grid, cfg, mode=method.mode, grid_size=method.grid_size)
    cum = np.zeros(data.n)
    for k, comp in enumerate(rec.components, start=1):
        cum = cum + comp.fitted_loo()
        out[f"RASE_R{k}"] = rase(cum, signal)
        if k <= p_true:
            j = _COMPONENTS[scn.model_id][k - 1][0]
            out[f"RSE_R{k}"] = rse(comp.beta_curve, beta_curve(j, data.grid))
    if method.backfit:
        out["RASE_I1"] = out["RASE_R1"]
        for k in range(2, k_max + 1):
            bf = backfit(data, basis, rec.truncated(k), cfg=cfg, tol=method.backfit_tol,
                         max_iter=method.backfit_max_iter, mode=method.mode,
                         grid_size=method.grid_size)
            fitted = sum(c.fitted_loo() for c in bf.components)
            out[f"RASE_I{k}"] = rase(fitted, signal)
            out[f"iters_I{k}"] = float(bf.iterations_used)
            if k == min(p_true, k_max):
                for jj, comp in enumerate(bf.components, start=1):
                    j = _COMPONENTS[scn.model_id][jj - 1][0]
                    out[f"RSE_I{jj}"] = rse(comp.beta_curve, beta_curve(j, data.grid))
    return out


def monte_carlo(
    scn: SimScenario,
    runs: int = 20,
    method: FitMethod | None = None,
    k_max: int | None = None,
) -> McSummary:
    """Repeat generate-fit-evaluate ``runs`` times with seeds ``scn.seed + j``.

    Fitted values at the training curves are leave-one-out, so RASE never
    uses Y_i to predict at X_i. Failed runs are recorded and excluded.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    method = method or FitMethod()
    if k_max is None:
        k_max = method.indices
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    summary = McSummary(scn, method, runs, k_max)
    for j in range(runs):
        run_scn = replace(scn, seed=scn.seed + j)
        try:
            summary.per_run.append(_single_run(run_scn, method, k_max))
        except (ValueError, ArithmeticError) as exc:
            log.warning("run %d failed: %s", j, exc)
            summary.failures.append((j, str(exc)))
    return summary
