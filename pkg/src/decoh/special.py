"""Spherical Bessel functions of integer order by three-term recurrence.

j_l is generated upward where that is stable (l < x) and by Miller's
downward recurrence, normalised against j_0, elsewhere. y_l is always
generated upward, which is the stable direction for it.
"""
from __future__ import annotations

import numpy as np


def spherical_jn_all(lmax, x):
    """Return j_0..j_lmax evaluated at ``x``; result shape (lmax+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    out = np.empty((lmax + 1, flat.size))
    for idx, xv in enumerate(flat):
        out[:, idx] = _jn_column(lmax, float(xv))
    return out.reshape((lmax + 1,) + x.shape)


def _jn_column(lmax, x):
    col = np.zeros(lmax + 1)
    if x == 0.0:
        col[0] = 1.0
        return col
    if x < 1e-3:
        # leading two terms of the power series x^l/(2l+1)!! (1 - x^2/(2(2l+3)))
        term = 1.0
        for ell in range(lmax + 1):
            if ell > 0:
                term *= x / (2 * ell + 1)
            if term < 1e-300:
                break
            col[ell] = term * (1.0 - x * x / (2.0 * (2 * ell + 3)))
        return col
    j0 = np.sin(x) / x
    if lmax == 0:
        col[0] = j0
        return col
    j1 = np.sin(x) / x**2 - np.cos(x) / x
    upward_limit = min(lmax, int(x))
    col[0], col[1] = j0, j1
    for ell in range(1, upward_limit):
        col[ell + 1] = (2 * ell + 1) / x * col[ell] - col[ell - 1]
    if upward_limit >= lmax:
        return col
    # Miller: start well above both lmax and x, recur down, normalise.
    start = lmax + int(np.sqrt(40.0 * (lmax + x))) + 20 + int(x)
    nxt, cur = 0.0, 1e-300
    down = np.zeros(lmax + 1)
    for ell in range(start, 0, -1):
        prev = (2 * ell + 1) / x * cur - nxt
        nxt, cur = cur, prev
        if ell - 1 <= lmax:
            down[ell - 1] = cur
        if abs(cur) > 1e250:
            nxt *= 1e-250
            cur *= 1e-250
            down *= 1e-250
    # normalise with whichever of j0/j1 is larger in magnitude
    if abs(j0) >= abs(j1):
        scale = j0 / down[0]
    else:
        scale = j1 / down[1]
    down *= scale
    col[upward_limit + 1:] = down[upward_limit + 1:]
    return col


def spherical_yn_all(lmax, x):
    """Return y_0..y_lmax; upward recurrence, x must be > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("spherical y_l needs x > 0")
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = -np.cos(x) / x
    if lmax >= 1:
        out[1] = -np.cos(x) / x**2 - np.sin(x) / x
    with np.errstate(over="ignore", invalid="ignore"):
        for ell in range(1, lmax):
            out[ell + 1] = (2 * ell + 1) / x * out[ell] - out[ell - 1]
    # past overflow y_l -> -inf for every l; inf - inf produced nan
    return np.where(np.isnan(out), -np.inf, out)
