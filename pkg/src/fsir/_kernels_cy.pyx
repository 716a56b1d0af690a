# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Sorted sliding-window leave-one-out Epanechnikov smoother.

Same contract as ``fsir._kernels_py``. Cost is O(n log n + n * window)
instead of O(n^2); the inner loops run without the GIL.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport NAN

cnp.import_array()

cdef double DEGENERATE_EPS = 1e-12


cdef void _sweep(const double[::1] zs, const double[::1] ys, double h, double lam,
                 bint local_linear, double[::1] pred, unsigned char[::1] dropped,
                 double[::1] slopes, double[::1] mass) noexcept nogil:
    cdef Py_ssize_t n = zs.shape[0]
    cdef Py_ssize_t p, i, lo = 0, hi = 0
    cdef double zp, d, u, k, s0, sy, sd, ybar, dbar, dc, num, den, theta
    cdef double inv_h = 1.0 / h
    for p in range(n):
        zp = zs[p]
        while lo < n and zp - zs[lo] >= h:
            lo += 1
        if hi < p + 1:
            hi = p + 1
        while hi < n and zs[hi] - zp < h:
            hi += 1
        s0 = 0.0
        sy = 0.0
        sd = 0.0
        for i in range(lo, hi):
            if i == p:
                continue
            d = zs[i] - zp
            u = d * inv_h
            k = 0.75 * (1.0 - u * u)
            if k <= 0.0:
                continue
            s0 += k
            sy += k * ys[i]
            sd += k * d
        mass[p] = s0
        slopes[p] = NAN
        if s0 < lam or s0 <= 0.0:
            dropped[p] = 1
            pred[p] = NAN
            continue
        ybar = sy / s0
        if not local_linear:
            dropped[p] = 0
            pred[p] = ybar
            continue
        dbar = sd / s0
        num = 0.0
        den = 0.0
        for i in range(lo, hi):
            if i == p:
                continue
            d = zs[i] - zp
            u = d * inv_h
            k = 0.75 * (1.0 - u * u)
            if k <= 0.0:
                continue
            dc = d - dbar
            num += k * dc * (ys[i] - ybar)
            den += k * dc * dc
        if den <= DEGENERATE_EPS * s0 * h * h:
            dropped[p] = 1
            pred[p] = NAN
            continue
        theta = num / den
        dropped[p] = 0
        slopes[p] = theta
        pred[p] = ybar - theta * dbar


def _sorted_sweep(z, y, double h, double lam, bint local_linear):
    z = np.ascontiguousarray(z, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0]
    order = np.argsort(z, kind="stable")
    zs = np.ascontiguousarray(z[order])
    ys = np.ascontiguousarray(y[order])
    pred = np.empty(n)
    slopes = np.empty(n)
    mass = np.empty(n)
    dropped = np.empty(n, dtype=np.uint8)
    cdef double[::1] zs_v = zs, ys_v = ys, pred_v = pred, slopes_v = slopes, mass_v = mass
    cdef unsigned char[::1] dropped_v = dropped
    with nogil:
        _sweep(zs_v, ys_v, h, lam, local_linear, pred_v, dropped_v, slopes_v, mass_v)
    return order, ys, pred, dropped, slopes, mass


def loo_fit(z, y, double h, double lam, bint local_linear):
    order, _, pred, dropped, slopes, mass = _sorted_sweep(z, y, h, lam, local_linear)
    inv = np.empty_like(order)
    inv[order] = np.arange(order.shape[0])
    if not local_linear:
        slopes[:] = np.nan
    return pred[inv], dropped[inv].astype(bool), slopes[inv], mass[inv]


def loo_sse(z, y, double h, double lam, bint local_linear):
    _, ys, pred, dropped, _, _ = _sorted_sweep(z, y, h, lam, local_linear)
    cdef double[::1] p_v = pred, y_v = ys
    cdef unsigned char[::1] d_v = dropped
    cdef Py_ssize_t i, n = pred.shape[0], kept = 0
    cdef double r, sse = 0.0
    for i in range(n):
        if d_v[i]:
            continue
        r = y_v[i] - p_v[i]
        sse += r * r
        kept += 1
    return sse, kept
