"""Dense numpy implementation of the leave-one-out Epanechnikov smoother.

This is the reference/fallback backend; ``_kernels_cy`` implements the same
contract with a sorted sliding window. Both return, for every j, the smoother
fitted at z_j from the pairs (z_i, y_i), i != j.
"""

import numpy as np

# relative floor for the local-linear denominator, in units of mass * h^2
DEGENERATE_EPS = 1e-12


def epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def loo_fit(z, y, h, lam, local_linear):
    """Return ``(pred, dropped, slopes, mass)`` arrays of length n.

    ``pred`` is NaN where ``dropped`` is set. ``slopes`` is NaN for the
    local-constant smoother.
    """
    z = np.ascontiguousarray(z, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    d = z[None, :] - z[:, None]  # d[j, i] = z_i - z_j
    k = epanechnikov(d / h)
    np.fill_diagonal(k, 0.0)
    mass = k.sum(axis=1)
    dropped = (mass < lam) | (mass <= 0.0)
    safe = np.where(dropped, 1.0, mass)
    ybar = (k @ y) / safe
    slopes = np.full(z.size, np.nan)
    if local_linear:
        dbar = (k * d).sum(axis=1) / safe
        dc = d - dbar[:, None]
        yc = y[None, :] - ybar[:, None]
        num = (k * dc * yc).sum(axis=1)
        den = (k * dc * dc).sum(axis=1)
        dropped |= den <= DEGENERATE_EPS * mass * h * h
        theta = num / np.where(dropped, 1.0, den)
        pred = ybar - theta * dbar
        slopes = np.where(dropped, np.nan, theta)
    else:
        pred = ybar
    pred = np.where(dropped, np.nan, pred)
    return pred, dropped, slopes, mass


def loo_sse(z, y, h, lam, local_linear):
    """Return ``(sum of squared LOO residuals over kept points, kept count)``."""
    pred, dropped, _, _ = loo_fit(z, y, h, lam, local_linear)
    keep = ~dropped
    r = np.asarray(y, dtype=float)[keep] - pred[keep]
    return float(r @ r), int(keep.sum())
