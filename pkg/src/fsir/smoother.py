"""Epanechnikov leave-one-out smoothers over scalar index values.

The leave-one-out sweep is the hot loop of the whole package. A compiled
sliding-window implementation is used when the extension is importable;
otherwise (or with ``FSIR_PURE_PYTHON=1``) a dense numpy version is used.
``BACKEND`` names the active choice.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kernels_py

__all__ = [
    "BACKEND",
    "SmootherConfig",
    "LooFit",
    "epanechnikov",
    "loo_fit",
    "loo_predict",
    "link_evaluate",
    "link_evaluate_many",
    "available_backends",
]


def _select_backend():
    if os.environ.get("FSIR_PURE_PYTHON", "").strip() not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _kernels_cy
    except ImportError:
        return _kernels_py, "python"
    return _kernels_cy, "cython"


_impl, BACKEND = _select_backend()


def available_backends() -> dict:
    """Map backend name to kernel module, for tests and benchmarks."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels_cy

        out["cython"] = _kernels_cy
    except ImportError:
        pass
    return out


@dataclass(frozen=True)
class SmootherConfig:
    """Smoother kind, bandwidth and minimum leave-one-out kernel mass."""

    kind: Literal["local_constant", "local_linear"] = "local_constant"
    bandwidth: float = 1.0
    threshold: float = 0.1

    def __post_init__(self):
        if self.kind not in ("local_constant", "local_linear"):
            raise ValueError(f"unknown smoother kind {self.kind!r}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError("bandwidth must be positive")
        if not (np.isfinite(self.threshold) and self.threshold >= 0):
            raise ValueError("threshold must be nonnegative")

    @property
    def local_linear(self) -> bool:
        return self.kind == "local_linear"

    def with_bandwidth(self, h: float) -> "SmootherConfig":
        return SmootherConfig(self.kind, float(h), self.threshold)


@dataclass(frozen=True)
class LooFit:
    predictions: np.ndarray
    dropped: np.ndarray
    slopes: np.ndarray | None
    mass: np.ndarray

    @property
    def n_dropped(self) -> int:
        return int(self.dropped.sum())


def epanechnikov(u):
    """0.75 (1 - u^2) on [-1, 1], zero outside. Works on scalars and arrays."""
    out = _kernels_py.epanechnikov(u)
    return float(out) if np.ndim(out) == 0 else out


def _check_pairs(z, y):
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if z.ndim != 1 or z.shape != y.shape:
        raise ValueError("index values and responses must be 1-d arrays of equal length")
    return z, y


def loo_fit(z, y, cfg: SmootherConfig, backend=None) -> LooFit:
    """Leave-one-out smoother at each z_j from the other n-1 pairs.

    Points whose leave-one-out kernel mass is below ``cfg.threshold``, or
    whose local-linear window is degenerate, are flagged in ``dropped``.
    """
    z, y = _check_pairs(z, y)
    if z.size < 2:
        raise ValueError("leave-one-out fitting needs at least 2 points")
    impl = _impl if backend is None else backend
    pred, dropped, slopes, mass = impl.loo_fit(
        z, y, cfg.bandwidth, cfg.threshold, cfg.local_linear
    )
    return LooFit(pred, dropped, slopes if cfg.local_linear else None, mass)


def loo_sse(z, y, cfg: SmootherConfig, backend=None) -> tuple[float, int]:
    impl = _impl if backend is None else backend
    return impl.loo_sse(z, y, cfg.bandwidth, cfg.threshold, cfg.local_linear)


def loo_predict(z, y, cfg: SmootherConfig) -> np.ndarray:
    """Leave-one-out fitted values with no point left empty.

    The mass threshold is not applied. A degenerate local-linear window falls
    back to local-constant. An empty window takes the response of the nearest
    other index value (ties averaged), which is what the local-constant
    smoother converges to as the window is widened just enough to be nonempty.
    """
    z, y = _check_pairs(z, y)
    if z.size == 1:
        return y.copy()
    relaxed = SmootherConfig(cfg.kind, cfg.bandwidth, 0.0)
    fit = loo_fit(z, y, relaxed)
    pred = fit.predictions.copy()
    if fit.dropped.any() and cfg.local_linear:
        lc = loo_fit(z, y, SmootherConfig("local_constant", cfg.bandwidth, 0.0))
        fix = fit.dropped & ~lc.dropped
        pred[fix] = lc.predictions[fix]
    for j in np.flatnonzero(~np.isfinite(pred)):
        dist = np.abs(z - z[j])
        dist[j] = np.inf
        pred[j] = y[dist == dist.min()].mean()
    return pred


def link_evaluate_many(u, z, y, cfg: SmootherConfig) -> np.ndarray:
    """Link estimate at each u from all n pairs; NaN where the window is empty."""
    z, y = _check_pairs(z, y)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    h = cfg.bandwidth
    d = z[None, :] - u[:, None]
    k = _kernels_py.epanechnikov(d / h)
    s0 = k.sum(axis=1)
    ok = s0 > 0
    s0s = np.where(ok, s0, 1.0)
    ybar = (k @ y) / s0s
    out = ybar
    if cfg.local_linear:
        dbar = (k * d).sum(axis=1) / s0s
        dc = d - dbar[:, None]
        num = (k * dc * (y[None, :] - ybar[:, None])).sum(axis=1)
        den = (k * dc * dc).sum(axis=1)
        good = den > _kernels_py.DEGENERATE_EPS * s0 * h * h
        theta = np.where(good, num / np.where(good, den, 1.0), 0.0)
        out = ybar - theta * dbar
    return np.where(ok, out, np.nan)


def link_evaluate(u: float, z, y, cfg: SmootherConfig) -> float | None:
    """Link estimate at a single point; ``None`` marks an empty kernel window."""
    if np.size(z) < 1:
        raise ValueError("need at least one pair")
    v = link_evaluate_many([u], z, y, cfg)[0]
    return None if np.isnan(v) else float(v)
