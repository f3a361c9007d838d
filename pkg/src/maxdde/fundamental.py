"""Fundamental solution of v' = a v + b v(t - h) with v(0) = 1, v = 0 on [-h, 0).

Method of steps gives a finite sum on every [kh, (k+1)h):

    v(t) = sum_{k <= t/h} b^k (t - kh)^k e^{a (t - kh)} / k!

and V(t) = v(t) + b * int_{t-h}^t v = 1 + (a + b) * int_0^t v, because
V' = (a + b) v for t > 0 and V(0) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import Parameters, ProblemError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _v_scalar(a: float, b: float, h: float, t: float) -> float:
    if t < 0:
        return 0.0
    total = 0.0
    k = 0
    while k * h <= t:
        s = t - k * h
        total += b ** k * s ** k * math.exp(a * s) / math.factorial(k)
        k += 1
    return total


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    params: Parameters
    t_max: float
    grid: np.ndarray
    v_grid: np.ndarray
    V_grid: np.ndarray

    def v(self, t):
        p = self.params
        vals = [_v_scalar(p.a, p.b, p.h, float(x)) for x in np.atleast_1d(t)]
        return np.asarray(vals) if np.ndim(t) else vals[0]

    def integral(self, t: float) -> float:
        """int_0^t v, exact up to Gauss-Legendre rounding (v is smooth between multiples of h)."""
        if t <= 0:
            return 0.0
        h = self.params.h
        breaks = [0.0]
        k = 1
        while k * h < t:
            breaks.append(k * h)
            k += 1
        breaks.append(t)
        total = 0.0
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            # split long pieces so polynomial degree growth stays well inside the rule
            n_sub = max(1, int(math.ceil((hi - lo) / (h / 4))))
            edges = np.linspace(lo, hi, n_sub + 1)
            for x0, x1 in zip(edges[:-1], edges[1:]):
                mid, half = 0.5 * (x0 + x1), 0.5 * (x1 - x0)
                pts = mid + half * _GL_NODES
                # interior points never hit a break so the piecewise sum is smooth
                total += half * float(np.dot(_GL_WEIGHTS, self.v(pts)))
        return total

    def V(self, t):
        p = self.params
        if np.ndim(t):
            return np.array([1.0 + (p.a + p.b) * self.integral(float(x)) for x in t])
        return 1.0 + (p.a + p.b) * self.integral(float(t))


def fundamental_solution(params: Parameters, t_max: float | None = None,
                         n_grid: int = 4001) -> FundamentalSolution:
    if t_max is None:
        t_max = 4 * params.h
    if t_max < 4 * params.h * (1 - 1e-12):
        raise ProblemError("t_max must be at least 4h")
    grid = np.linspace(0.0, t_max, n_grid)
    proto = FundamentalSolution(params, t_max, grid, np.empty(0), np.empty(0))
    v_grid = proto.v(grid)
    # cumulative integral piece by piece keeps the grid build linear in n_grid
    cum = np.zeros(n_grid)
    for i in range(1, n_grid):
        cum[i] = cum[i - 1] + _piece_integral(proto, grid[i - 1], grid[i])
    V_grid = 1.0 + (params.a + params.b) * cum
    return FundamentalSolution(params, t_max, grid, v_grid, V_grid)


def _piece_integral(fs: FundamentalSolution, lo: float, hi: float) -> float:
    h = fs.params.h
    k = math.floor(lo / h) + 1
    cuts = [lo]
    while k * h < hi:
        cuts.append(k * h)
        k += 1
    cuts.append(hi)
    total = 0.0
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        mid, half = 0.5 * (x0 + x1), 0.5 * (x1 - x0)
        total += half * float(np.dot(_GL_WEIGHTS, fs.v(mid + half * _GL_NODES)))
    return total


def V_roots(params: Parameters, t_max: float | None = None) -> tuple[float, float]:
    """First two sign changes (alpha_star, beta_star) of V."""
    if t_max is None:
        t_max = 8 * params.h
    fs = fundamental_solution(params, t_max)
    Vg = fs.V_grid
    idx = np.nonzero(np.sign(Vg[:-1]) * np.sign(Vg[1:]) < 0)[0]
    if idx.size == 0:
        raise ProblemError(f"V has no sign change on [0, {t_max}]")
    roots = [brentq(fs.V, fs.grid[i], fs.grid[i + 1], xtol=1e-13) for i in idx[:2]]
    if len(roots) < 2:
        raise ProblemError(f"V has a single sign change on [0, {t_max}]")
    return roots[0], roots[1]
