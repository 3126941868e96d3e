"""Quadrature helpers shared by the rate and certificate machinery.

Everything here works on vectorized callables ``f(ts: ndarray) -> ndarray``
so that both parsed rate expressions and derived quantities (decay-rate
profiles, catastrophe floors) can be integrated with the same code.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

VecFn = Callable[[np.ndarray], np.ndarray]

#: starting subinterval count for the interval-doubling Simpson rule
SIMPSON_START = 2048
#: hard cap on subintervals; discontinuous integrands stop here
SIMPSON_CAP = 2**20
#: default number of samples per period for grid suprema and profiles
ANALYSIS_GRID = 4096

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _simpson_sum(vals: np.ndarray, h: float) -> float:
    return (h / 3.0) * (
        vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-1:2].sum()
    )


def adaptive_simpson(f: VecFn, a: float, b: float, tol: float = 1e-10,
                     start: int = SIMPSON_START, cap: int = SIMPSON_CAP) -> float:
    """Composite Simpson integral of ``f`` over [a, b] with interval doubling.

    The subinterval count doubles until two successive estimates agree to
    ``tol`` (relative to max(1, |I|)) or ``cap`` subintervals are reached;
    at the cap the last estimate is returned.  Previously evaluated nodes
    are reused across doublings.
    """
    if b <= a:
        raise ValueError(f"empty integration interval [{a}, {b}]")
    m = start
    xs = np.linspace(a, b, m + 1)
    vals = np.asarray(f(xs), dtype=float)
    est = _simpson_sum(vals, (b - a) / m)
    while m < cap:
        mids = a + (b - a) * (np.arange(m) + 0.5) / m
        mid_vals = np.asarray(f(mids), dtype=float)
        merged = np.empty(2 * m + 1)
        merged[0::2] = vals
        merged[1::2] = mid_vals
        m *= 2
        vals = merged
        new_est = _simpson_sum(vals, (b - a) / m)
        if abs(new_est - est) <= tol * max(1.0, abs(new_est)):
            return new_est
        est = new_est
    return est


def gauss_integral(f: VecFn, a: float, b: float) -> float:
    """Fixed 32-node Gauss-Legendre integral; exact enough for cell-sized
    smooth integrands."""
    if b == a:
        return 0.0
    half = 0.5 * (b - a)
    xs = 0.5 * (a + b) + half * _GAUSS_NODES
    return half * float(np.dot(_GAUSS_WEIGHTS, np.asarray(f(xs), dtype=float)))


def _golden_max(fn: Callable[[float], float], a: float, b: float,
                iters: int = 80) -> float:
    """Maximum of a unimodal scalar function on [a, b] by golden section."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(iters):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fn(x2)
    return max(f1, f2)


def simpson_on_grid(vals: np.ndarray, width: float, tol: float = 1e-10) -> float | None:
    """Simpson integral from values on a uniform grid (even subinterval
    count), cross-checked against the half-resolution estimate; ``None``
    when the two disagree beyond ``tol`` and the caller should fall back
    to adaptive quadrature.
    """
    m = len(vals) - 1
    if m % 4:
        raise ValueError("grid must have a subinterval count divisible by 4")
    fine = _simpson_sum(vals, width / m)
    coarse = _simpson_sum(vals[::2], 2.0 * width / m)
    if abs(fine - coarse) <= tol * max(1.0, abs(fine)):
        return fine
    return None


def peak_running_integral(f: VecFn, period: float, mean: float,
                          grid: int = ANALYSIS_GRID,
                          values: np.ndarray | None = None) -> float:
    """sup over u in [0, period] of the running integral of ``f - mean``.

    The running integral is accumulated by the trapezoid rule on a doubled
    grid and Richardson-extrapolated (O(h^4) at the coarse nodes); the
    winning cell is then refined by golden section with Gauss-Legendre
    integration inside the cell.  The supremum is at least 0 because the
    running integral vanishes at u = 0.  ``values``, when given, must be
    ``f`` evaluated on ``doubled_grid(period, grid)``.
    """
    m = grid
    xs = np.linspace(0.0, period, 2 * m + 1)
    if values is None:
        values = np.asarray(f(xs), dtype=float)
    elif len(values) != 2 * m + 1:
        raise ValueError("precomputed values do not match the doubled grid")
    g = values - mean
    h = period / (2 * m)
    cum_fine = np.concatenate(([0.0], np.cumsum(h * 0.5 * (g[1:] + g[:-1]))))
    g_coarse = g[0::2]
    cum_coarse = np.concatenate(
        ([0.0], np.cumsum(2.0 * h * 0.5 * (g_coarse[1:] + g_coarse[:-1])))
    )
    cum = (4.0 * cum_fine[0::2] - cum_coarse) / 3.0

    j = int(np.argmax(cum))
    lo = max(j - 1, 0)
    hi = min(j + 1, m)
    base = cum[lo]
    x_lo = xs[2 * lo]

    def running(u: float) -> float:
        return base + gauss_integral(lambda ts: np.asarray(f(ts)) - mean, x_lo, u)

    refined = _golden_max(running, x_lo, xs[2 * hi])
    return max(float(cum[j]), refined, 0.0)


def period_grid(period: float, grid: int = ANALYSIS_GRID) -> np.ndarray:
    """Uniform closed grid over one period, ``grid`` subintervals."""
    return np.linspace(0.0, period, grid + 1)


def doubled_grid(period: float, grid: int = ANALYSIS_GRID) -> np.ndarray:
    """Grid refined once; used for sup-type certificates so that every
    coarse node is also probed."""
    return np.linspace(0.0, period, 2 * grid + 1)
