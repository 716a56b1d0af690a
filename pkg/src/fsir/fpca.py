"""Mean function, eigenfunction basis and basis scores for a CurveSet.

The covariance operator is discretized with trapezoid weights ``W`` and the
symmetric matrix ``W^{1/2} C W^{1/2}`` is diagonalized, so the returned
eigenfunctions are orthonormal in the quadrature L2 inner product rather than
in plain Euclidean coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functional_data import Curve, CurveSet, GridMismatchError, TimeGrid

__all__ = ["Basis", "estimate_mean", "estimate_eigenbasis", "project_scores"]

_NEG_EIG_TOL = 1e-10
_ORTHO_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Basis:
    """Orthonormal functions on a grid plus the centring curve used for scores.

    Attributes
    ----------
    grid : TimeGrid
    functions : ndarray, shape (r_max, m)
        Basis functions, one per row.
    eigenvalues : ndarray, shape (r_max,)
        Nonincreasing, nonnegative. Zeros for user-supplied bases.
    mean : ndarray, shape (m,)
        Curve subtracted before projecting.
    """

    grid: TimeGrid
    functions: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        f = np.array(self.functions, dtype=float)
        if f.ndim != 2 or f.shape[1] != len(self.grid) or f.shape[0] < 1:
            raise ValueError("basis functions must have shape (r_max, grid length)")
        lam = np.array(self.eigenvalues, dtype=float)
        if lam.shape != (f.shape[0],):
            raise ValueError("need one eigenvalue per basis function")
        if np.any(lam < 0) or np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be nonnegative and nonincreasing")
        mu = np.array(self.mean, dtype=float)
        if mu.shape != (len(self.grid),):
            raise ValueError("mean curve does not match the grid")
        gram = (f * self.grid.weights) @ f.T
        if not np.allclose(gram, np.eye(f.shape[0]), atol=_ORTHO_TOL, rtol=0):
            raise ValueError("basis functions are not orthonormal on this grid")
        for name, arr in (("functions", f), ("eigenvalues", lam), ("mean", mu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def fixed(cls, functions, grid: TimeGrid, mean=None) -> "Basis":
        """Wrap a user-supplied orthonormal basis (no eigenvalues)."""
        f = np.atleast_2d(np.asarray(functions, dtype=float))
        mu = np.zeros(len(grid)) if mean is None else mean
        return cls(grid, f, np.zeros(f.shape[0]), mu)

    @property
    def r_max(self) -> int:
        return self.functions.shape[0]

    def function(self, k: int) -> Curve:
        return Curve(self.grid, self.functions[k])

    def mean_curve(self) -> Curve:
        return Curve(self.grid, self.mean)

    def combine(self, coefs) -> Curve:
        """Return the curve sum_k coefs[k] * psi_k."""
        coefs = np.asarray(coefs, dtype=float)
        return Curve(self.grid, coefs @ self.functions[: coefs.size])


def estimate_mean(data: CurveSet) -> Curve:
    return Curve(data.grid, data.values.mean(axis=0))


def _sign_normalize(vecs: np.ndarray) -> np.ndarray:
    # make the entry of largest magnitude positive, first such entry on ties
    idx = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(vecs.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vecs * signs[:, None]


def estimate_eigenbasis(data: CurveSet, r_max: int) -> Basis:
    """Leading ``r_max`` eigenfunctions of the sample covariance of the curves."""
    n, m = data.values.shape
    if r_max < 1 or r_max > min(n - 1, m):
        raise ValueError(
            f"r_max={r_max} out of range; need 1 <= r_max <= min(n-1, m) = {min(n - 1, m)}"
        )
    mu = data.values.mean(axis=0)
    centered = data.values - mu
    sw = np.sqrt(data.grid.weights)
    a = centered * sw
    cov = a.T @ a / n
    cov = (cov + cov.T) / 2
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1][:r_max]
    evals = evals[order]
    if np.any(evals < -_NEG_EIG_TOL):
        raise ArithmeticError(f"covariance has a negative eigenvalue {evals.min():.3e}")
    evals = np.clip(evals, 0.0, None)
    funcs = (evecs[:, order] / sw[:, None]).T
    funcs = _sign_normalize(funcs)
    return Basis(data.grid, funcs, evals, mu)


def project_scores(data: CurveSet, basis: Basis, r: int | None = None) -> np.ndarray:
    """Scores xi_ik = <psi_k, X_i - mean>, shape (n, r)."""
    if data.grid != basis.grid:
        raise GridMismatchError("curve set and basis are on different grids")
    r = basis.r_max if r is None else r
    if not 1 <= r <= basis.r_max:
        raise ValueError(f"r={r} out of range 1..{basis.r_max}")
    centered = data.values - basis.mean
    return (centered * data.grid.weights) @ basis.functions[:r].T
