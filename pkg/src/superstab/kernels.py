"""Hot numeric kernels with selectable backends.

The recovery pipeline spends its time in a handful of dense reductions
over orbit tables (levels x points) and pair grids.  Each kernel exists
twice: a pure-numpy implementation in this module and a numba ``@njit``
twin in :mod:`superstab._kernels_numba`.  The active backend is chosen at
import time from the ``SUPERSTAB_BACKEND`` environment variable:

* ``auto`` (default) -- numba when importable, numpy otherwise;
* ``numpy`` -- force the pure-numpy path;
* ``numba`` -- force the jitted path, raising if numba is unavailable.

Both paths use identical arithmetic (the same scaling recurrences, the
same evaluation order), so their outputs agree bit for bit, with one
caveat: ``hypothesis_violations`` goes through expm1, whose vectorized
numpy build and libm (used by numba) may differ in the last ulp.  The
test suite pins exact equality for the other kernels and 1-ulp agreement
there.  ``benchmarks/bench_kernels.py`` compares throughput at inflated
sizes.

Array contracts, shared by all kernels:

* ``orbit_logf`` -- shape (K+1, m); row k holds ln f(a^k y_j) for the m
  evaluation points y_j.
* ``orbit_weight`` -- shape (K, m); row k holds the weight 1 + psi(a, a^k y_j)
  used by the anchored sup-metric.
"""

from __future__ import annotations

import os

import numpy as np

ENV_VAR = "SUPERSTAB_BACKEND"


# -- pure-numpy implementations ------------------------------------------


def _np_orbit_iterates(orbit_logf: np.ndarray, g_a: float) -> np.ndarray:
    """Successive contraction iterates from a start table.

    Row n is the n-th iterate evaluated on the base points: row 0 is the
    start function, row n is orbit row n divided by g_a n times (one
    division per step, matching the literal iteration).
    """
    rows, m = orbit_logf.shape
    out = np.empty((rows, m), dtype=np.float64)
    out[0, :] = orbit_logf[0, :]
    scale = 1.0
    for n in range(1, rows):
        scale = scale / g_a
        out[n, :] = orbit_logf[n, :] * scale
    return out


def _np_successive_defect_sups(
    orbit_logf: np.ndarray, orbit_weight: np.ndarray, g_a: float, tol: float
) -> np.ndarray:
    """Weighted sup-distances between consecutive iterates.

    Entry n is the distance between iterates n and n+1, measured as the
    sup of |difference| / weight over every orbit point still reachable
    by both iterates (levels shrink by one per step, so entry n reduces
    over levels 0..K-n-1).  With weights non-increasing along the orbit
    the sequence contracts by at least 1/|g_a| per step.

    Scanning stops after the first entry below ``tol`` (pass 0.0 to force
    the full table); the returned array holds every computed entry.
    """
    rows, m = orbit_logf.shape
    depth = rows - 1
    with np.errstate(over="ignore"):  # inf is the documented extended value
        defect = np.abs(orbit_logf[1:, :] / g_a - orbit_logf[:-1, :])
    out = np.empty(depth, dtype=np.float64)
    scale = 1.0
    count = 0
    for n in range(depth):
        ratios = defect[n:depth, :] / orbit_weight[0 : depth - n, :]
        value = ratios.max() * scale
        out[n] = value
        count = n + 1
        if value < tol:
            break
        scale = scale / abs(g_a)
    return out[:count].copy()


def _np_hypothesis_violations(
    log_fxy: np.ndarray, g_x: np.ndarray, log_fy: np.ndarray, psi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided ratio-condition defects for a batch of pairs.

    Returns (r, violation) where r = f(xy)/f(y)^g(x) - 1 computed in log
    space and violation = max(-r, r - psi): positive means the pair
    breaks the hypothesis band [0, psi].
    """
    r = np.expm1(log_fxy - g_x * log_fy)
    viol = np.maximum(-r, r - psi)
    return r, viol


def _np_linear_residuals(t_xy: np.ndarray, g_x: np.ndarray, t_y: np.ndarray) -> np.ndarray:
    """|T(xy) - g(x) T(y)| for a batch of pairs (log-domain conclusion check)."""
    return np.abs(t_xy - g_x * t_y)


def _np_partial_bound_tables(
    orbit_logf: np.ndarray, orbit_weight: np.ndarray, g_a: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orbit defect against its two geometric majorants.

    For every depth n and point j computes

    * ``lhs``      -- |ln f(a^n y) - g^n ln f(y)|,
    * ``stepwise`` -- sum_{i<n} weight(a, a^i y) |g|^(n-1-i)  (sharp form),
    * ``geometric``-- weight(a, y) (|g|^n - 1)/(|g| - 1)      (closed form).

    Shapes: inputs (N+1, m) and (N, m); outputs all (N+1, m).
    """
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
        lhs[n, :] = np.abs(orbit_logf[n, :] - g_pow * orbit_logf[0, :])
        stepwise[n, :] = abs_g * stepwise[n - 1, :] + orbit_weight[n - 1, :]
        geometric[n, :] = orbit_weight[0, :] * ((abs_pow - 1.0) / (abs_g - 1.0))
    return lhs, stepwise, geometric


_NUMPY_BACKEND = {
    "orbit_iterates": _np_orbit_iterates,
    "successive_defect_sups": _np_successive_defect_sups,
    "hypothesis_violations": _np_hypothesis_violations,
    "linear_residuals": _np_linear_residuals,
    "partial_bound_tables": _np_partial_bound_tables,
}


# -- backend selection -----------------------------------------------------


def _load_numba_backend() -> dict:
    from . import _kernels_numba as knb

    return {
        "orbit_iterates": knb.orbit_iterates,
        "successive_defect_sups": knb.successive_defect_sups,
        "hypothesis_violations": knb.hypothesis_violations,
        "linear_residuals": knb.linear_residuals,
        "partial_bound_tables": knb.partial_bound_tables,
    }


_active_name = "numpy"
_active = _NUMPY_BACKEND


def set_backend(name: str) -> str:
    """Select 'numpy', 'numba', or 'auto'; returns the resolved name."""
    global _active_name, _active
    if name not in ("auto", "numpy", "numba"):
        raise ValueError(f"unknown backend {name!r}; expected auto, numpy, or numba")
    if name == "numpy":
        _active_name, _active = "numpy", _NUMPY_BACKEND
    elif name == "numba":
        _active_name, _active = "numba", _load_numba_backend()
    else:
        try:
            _active_name, _active = "numba", _load_numba_backend()
        except ImportError:
            _active_name, _active = "numpy", _NUMPY_BACKEND
    return _active_name


def get_backend() -> str:
    return _active_name


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        import numba  # noqa: F401

        names.append("numba")
    except ImportError:
        pass
    return names


def backend_functions(name: str) -> dict:
    """Expose one backend's kernel table (used by benchmarks and parity tests)."""
    if name == "numpy":
        return dict(_NUMPY_BACKEND)
    if name == "numba":
        return _load_numba_backend()
    raise ValueError(f"unknown backend {name!r}")


set_backend(os.environ.get(ENV_VAR, "auto"))


# -- dispatching wrappers ---------------------------------------------------


def orbit_iterates(orbit_logf, g_a):
    return _active["orbit_iterates"](np.asarray(orbit_logf, dtype=np.float64), float(g_a))


def successive_defect_sups(orbit_logf, orbit_weight, g_a, tol=0.0):
    return _active["successive_defect_sups"](
        np.asarray(orbit_logf, dtype=np.float64),
        np.asarray(orbit_weight, dtype=np.float64),
        float(g_a),
        float(tol),
    )


def hypothesis_violations(log_fxy, g_x, log_fy, psi):
    return _active["hypothesis_violations"](
        np.asarray(log_fxy, dtype=np.float64),
        np.asarray(g_x, dtype=np.float64),
        np.asarray(log_fy, dtype=np.float64),
        np.asarray(psi, dtype=np.float64),
    )


def linear_residuals(t_xy, g_x, t_y):
    return _active["linear_residuals"](
        np.asarray(t_xy, dtype=np.float64),
        np.asarray(g_x, dtype=np.float64),
        np.asarray(t_y, dtype=np.float64),
    )


def partial_bound_tables(orbit_logf, orbit_weight, g_a):
    return _active["partial_bound_tables"](
        np.asarray(orbit_logf, dtype=np.float64),
        np.asarray(orbit_weight, dtype=np.float64),
        float(g_a),
    )
