"""K-fold cross-validation over (r, h) for the single-index estimator."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fpca import Basis, project_scores
from .functional_data import CurveSet
from .index import DEFAULT_GRID_SIZE, ObjectiveUndefinedError, fit_single_index, predict
from .smoother import SmootherConfig

__all__ = [
    "CvGrid",
    "CvResult",
    "fold_indices",
    "cv_score",
    "select_tuning",
    "default_cv_grid",
    "resolve_threads",
]

log = logging.getLogger(__name__)

CV_FALLBACK = "nearest"


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("FSIR_THREADS", "1") or 1)
    return max(1, int(threads))


@dataclass(frozen=True)
class CvGrid:
    h_candidates: tuple
    r_candidates: tuple
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        hs = tuple(float(h) for h in self.h_candidates)
        rs = tuple(int(r) for r in self.r_candidates)
        if not hs or not rs:
            raise ValueError("candidate lists must be nonempty")
        if any(not np.isfinite(h) or h <= 0 for h in hs):
            raise ValueError("bandwidth candidates must be positive")
        if any(r < 1 for r in rs):
            raise ValueError("r candidates must be positive integers")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        object.__setattr__(self, "h_candidates", hs)
        object.__setattr__(self, "r_candidates", rs)

    def pairs(self):
        """Grid points in table order: r-major, then h."""
        return [(r, h) for r in self.r_candidates for h in self.h_candidates]


@dataclass
class CvResult:
    table: list  # rows of (r, h, score)
    r: int
    h: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def score(self) -> float:
        return min(row[2] for row in self.table)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "h", "score"])
            for r, h, s in self.table:
                w.writerow([r, repr(h), repr(s)])


def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle of 0..n-1 cut into contiguous, near-equal blocks."""
    if not 2 <= folds <= n:
        raise ValueError(f"folds must be in 2..n (n={n}), got {folds}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(b) for b in np.array_split(perm, folds)]


def cv_score(
    data: CurveSet,
    basis: Basis,
    h: float,
    r: int,
    cfg: SmootherConfig | None = None,
    folds: int = 10,
    seed: int = 0,
    *,
    mode: str = "constrained",
    grid_size: int = DEFAULT_GRID_SIZE,
    diagnostics: dict | None = None,
) -> float:
    """Total held-out squared error over all folds divided by n.

    A fold whose fit is undefined (every point dropped) makes the score +inf.
    """
    y = data.require_responses()
    scores = project_scores(data, basis, r)
    total = 0.0
    for k, test in enumerate(fold_indices(data.n, folds, seed)):
        train = np.setdiff1d(np.arange(data.n), test)
        try:
            model, _ = fit_single_index(
                data.subset(train), basis, h, r, cfg,
                mode=mode, grid_size=grid_size, scores=scores[train],
            )
        except (ObjectiveUndefinedError, ValueError) as exc:
            if diagnostics is not None:
                diagnostics.setdefault("failures", []).append((r, h, k, str(exc)))
            return np.inf
        resid = y[test] - predict(model, data.subset(test), CV_FALLBACK)
        total += float(resid @ resid)
    return total / data.n


def select_tuning(
    data: CurveSet,
    basis: Basis,
    grid: CvGrid,
    cfg: SmootherConfig | None = None,
    *,
    mode: str = "constrained",
    grid_size: int = DEFAULT_GRID_SIZE,
    threads: int | None = None,
) -> CvResult:
    """Score every (r, h) pair and return the table with its minimizer.

    Ties go to the earliest pair in table order.
    """
    pairs = [(r, h) for r, h in grid.pairs() if r <= basis.r_max]
    if not pairs:
        raise ValueError("no grid point has r within the basis size")
    diag: dict = {}

    def one(pair):
        r, h = pair
        return cv_score(data, basis, h, r, cfg, grid.folds, grid.seed,
                        mode=mode, grid_size=grid_size, diagnostics=diag)

    nthreads = resolve_threads(threads)
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            scores = list(ex.map(one, pairs))
    else:
        scores = [one(p) for p in pairs]
    table = [(r, h, s) for (r, h), s in zip(pairs, scores)]
    finite = [i for i, s in enumerate(scores) if np.isfinite(s)]
    if not finite:
        raise ValueError("every cross-validation grid point failed; widen the bandwidth grid")
    best = min(finite, key=lambda i: (scores[i], i))
    r, h, _ = table[best]
    log.info("cv selected r=%d h=%.4g score=%.5g", r, h, scores[best])
    return CvResult(table, r, h, diag)


def _numerical_rank(basis: Basis) -> int:
    lam = basis.eigenvalues
    if lam[0] <= 0:  # user-supplied basis without eigenvalues
        return basis.r_max
    return max(1, int(np.sum(lam > 1e-10 * lam[0])))


def default_cv_grid(
    data: CurveSet,
    basis: Basis,
    folds: int = 10,
    seed: int = 0,
    r_candidates: Sequence[int] | None = None,
    n_h: int = 10,
) -> CvGrid:
    """r in 1..6 and 10 log-spaced bandwidths in [0.25, 4] times a pilot scale.

    The pilot is the standard deviation of the first-component scores times
    n^(-1/5). r stops at the number of numerically nonzero eigenvalues, since
    directions with zero score variance cannot change the index.
    """
    s1 = project_scores(data, basis, 1)[:, 0]
    pilot = float(np.std(s1)) * data.n ** (-0.2)
    if pilot <= 0:
        pilot = 1.0
    hs = tuple(pilot * np.geomspace(0.25, 4.0, n_h))
    if r_candidates is not None:
        rs = tuple(r_candidates)
    else:
        rs = tuple(range(1, min(6, _numerical_rank(basis)) + 1))
    return CvGrid(hs, rs, min(folds, data.n), seed)
