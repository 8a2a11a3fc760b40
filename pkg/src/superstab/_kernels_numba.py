"""Numba twins of the kernels in :mod:`superstab.kernels`.

Same arithmetic, same evaluation order as the numpy implementations so
results agree bit for bit; only the loop structure differs.  Importing
this module requires numba.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def orbit_iterates(orbit_logf, g_a):
    rows, m = orbit_logf.shape
    out = np.empty((rows, m), dtype=np.float64)
    for j in range(m):
        out[0, j] = orbit_logf[0, j]
    scale = 1.0
    for n in range(1, rows):
        scale = scale / g_a
        for j in range(m):
            out[n, j] = orbit_logf[n, j] * scale
    return out


@njit(cache=True)
def successive_defect_sups(orbit_logf, orbit_weight, g_a, tol):
    rows, m = orbit_logf.shape
    depth = rows - 1
    defect = np.empty((depth, m), dtype=np.float64)
    for s in range(depth):
        for j in range(m):
            defect[s, j] = abs(orbit_logf[s + 1, j] / g_a - orbit_logf[s, j])
    out = np.empty(depth, dtype=np.float64)
    scale = 1.0
    count = 0
    for n in range(depth):
        best = -np.inf
        for k in range(depth - n):
            for j in range(m):
                t = defect[n + k, j] / orbit_weight[k, j]
                if t > best:
                    best = t
        value = best * scale
        out[n] = value
        count = n + 1
        if value < tol:
            break
        scale = scale / abs(g_a)
    return out[:count].copy()


@njit(cache=True)
def hypothesis_violations(log_fxy, g_x, log_fy, psi):
    n = log_fxy.shape[0]
    r = np.empty(n, dtype=np.float64)
    viol = np.empty(n, dtype=np.float64)
    for i in range(n):
        ri = math.expm1(log_fxy[i] - g_x[i] * log_fy[i])
        r[i] = ri
        lo = -ri
        hi = ri - psi[i]
        viol[i] = lo if lo > hi else hi
    return r, viol


@njit(cache=True)
def linear_residuals(t_xy, g_x, t_y):
    n = t_xy.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = abs(t_xy[i] - g_x[i] * t_y[i])
    return out


@njit(cache=True)
def partial_bound_tables(orbit_logf, orbit_weight, g_a):
    rows, m = orbit_logf.shape
    abs_g = abs(g_a)
    lhs = np.zeros((rows, m), dtype=np.float64)
    stepwise = np.zeros((rows, m), dtype=np.float64)
    geometric = np.zeros((rows, m), dtype=np.float64)
    g_pow = 1.0
    abs_pow = 1.0
    for n in range(1, rows):
        g_pow = g_pow * g_a
        abs_pow = abs_pow * abs_g
        ratio = (abs_pow - 1.0) / (abs_g - 1.0)
        for j in range(m):
            lhs[n, j] = abs(orbit_logf[n, j] - g_pow * orbit_logf[0, j])
            stepwise[n, j] = abs_g * stepwise[n - 1, j] + orbit_weight[n - 1, j]
            geometric[n, j] = orbit_weight[0, j] * ratio
    return lhs, stepwise, geometric
