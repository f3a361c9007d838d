"""Exact two-step solution for u' = 0.32 u - max_{[t-3pi/2, t]} u + 1 - sin t.

Raw time coordinates throughout. For q in [-pi/2, 0.4] and constant history
p = (1 - sin q)/0.68 on [q - h, q], the first step solves u' = a u - p + f and
the second u' = a u - u(t - h) + f. Both are elementary; the functions
``psi`` and ``phi`` are the second-step derivative and value written in the
local variable s = t - q - h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

A = 0.32
H = 1.5 * math.pi
D = 0.68
Q_MIN = -0.5 * math.pi
Q_MAX = 0.4
THETA0 = math.asin(1.0 / math.sqrt(A * A + 1.0))


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentConstants:
    q: float
    p: float
    theta0: float
    C0: float
    C1: float
    C2: float
    C3: float
    C0s: float
    C1s: float
    C2s: float


def initial_value(q):
    return (1.0 - np.sin(q)) / D


def constants(q: float, check: bool = True) -> SegmentConstants:
    if check and not (Q_MIN - 1e-12 <= q <= Q_MAX + 1e-12):
        raise RangeError(f"q={q} outside [{Q_MIN}, {Q_MAX}]")
    p = float(initial_value(q))
    c0 = 1.0 / math.sqrt(A * A + 1.0)
    c1 = (p - 1.0) / A
    c2 = p - c1 - c0 * math.sin(q + THETA0)
    c3 = -c0 * math.cos(q + THETA0) + c1 + c2 * math.exp(A * H)
    c0s = 1.0 / (A * A + 1.0)
    c1s = (c1 - 1.0) / A
    c2s = c3 - c0s * math.sin(q + 2 * THETA0) + c0 * math.cos(q + THETA0) - c1s
    return SegmentConstants(q, p, THETA0, c0, c1, c2, c3, c0s, c1s, c2s)


def _vec_constants(q):
    # array version of ``constants`` for grid scans
    p = initial_value(q)
    c0 = 1.0 / math.sqrt(A * A + 1.0)
    c1 = (p - 1.0) / A
    c2 = p - c1 - c0 * np.sin(q + THETA0)
    c3 = -c0 * np.cos(q + THETA0) + c1 + c2 * math.exp(A * H)
    c0s = 1.0 / (A * A + 1.0)
    c1s = (c1 - 1.0) / A
    c2s = c3 - c0s * np.sin(q + 2 * THETA0) + c0 * np.cos(q + THETA0) - c1s
    return c0, c1, c2, c3, c0s, c1s, c2s


def segment1(q: float, t):
    """u on [q, q + h]."""
    c = constants(q)
    t = np.asarray(t, dtype=float)
    if np.any(t < q - 1e-12) or np.any(t > q + H + 1e-12):
        raise RangeError("t outside the first step [q, q + h]")
    out = c.C0 * np.sin(t + THETA0) + c.C1 + c.C2 * np.exp(A * (t - q))
    return out if out.ndim else float(out)


def segment2(q: float, t):
    """u on [q + h, q + 2h]."""
    c = constants(q)
    t = np.asarray(t, dtype=float)
    if np.any(t < q + H - 1e-12) or np.any(t > q + 2 * H + 1e-12):
        raise RangeError("t outside the second step [q + h, q + 2h]")
    x = t - H - q
    out = (c.C0s * np.cos(t + 2 * THETA0) + c.C0 * np.sin(t + THETA0) + c.C1s
           - c.C2 * x * np.exp(A * x) + c.C2s * np.exp(A * x))
    return out if out.ndim else float(out)


def solution(q: float, t):
    """Piecewise closed form on [q, q + 2h]."""
    t = np.asarray(t, dtype=float)
    first = t <= q + H
    out = np.empty_like(t)
    if np.any(first):
        out[first] = segment1(q, t[first])
    if np.any(~first):
        out[~first] = segment2(q, t[~first])
    return out if out.ndim else float(out)


def derivative(q: float, t):
    """u' on [q, q + 2h], from the right-hand sides of the two linear steps."""
    t = np.asarray(t, dtype=float)
    u = solution(q, t)
    p = initial_value(q)
    delayed = np.where(t <= q + H, p, solution(q, np.clip(t - H, q, q + H)))
    return A * u - delayed + 1.0 - np.sin(t)


def psi(s, q):
    """d/ds of u(q + h + s)."""
    c0, _, c2, _, c0s, _, c2s = _vec_constants(q)
    return (c0 * np.sin(s + q + THETA0) + c0s * np.cos(s + q + 2 * THETA0)
            + (-c2 * A * s + (c2s * A - c2)) * np.exp(A * s))


def phi(s, q):
    """u(q + h + s)."""
    c0, _, c2, _, c0s, c1s, c2s = _vec_constants(q)
    return (c0s * np.sin(s + q + 2 * THETA0) - c0 * np.cos(s + q + THETA0) + c1s
            + (-c2 * s + c2s) * np.exp(A * s))


def increment(q):
    """u(q + 2h) - u(q + h)."""
    c0, _, c2, c3, c0s, c1s, c2s = _vec_constants(q)
    return (-c0s * np.cos(q + 2 * THETA0) - c0 * np.sin(q + THETA0) + c1s
            - c2 * H * math.exp(A * H) + c2s * math.exp(A * H) - c3)


# grid search plus coordinate-wise golden refinement ------------------------

def _refine_2d(func, s0, q0, s_lim, q_lim, sign, sweeps=6):
    s, q = s0, q0
    for _ in range(sweeps):
        lo, hi = s_lim(q)
        s = minimize_scalar(lambda x: sign * func(x, q), bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-12}).x
        lo, hi = q_lim(s)
        q = minimize_scalar(lambda y: sign * func(s, y), bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-12}).x
    return float(s), float(q), float(func(s, q))


def min_psi(n: int = 2000) -> tuple[float, float, float]:
    """min over [0, 1.5 pi] x [0.105, 0.4]; returns (value, s, q)."""
    s_grid = np.linspace(0.0, 1.5 * math.pi, n)
    q_grid = np.linspace(0.105, 0.4, n)
    S, Q = np.meshgrid(s_grid, q_grid, indexing="ij")
    vals = psi(S, Q)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    s, q, v = _refine_2d(psi, s_grid[i], q_grid[j], lambda q: (0.0, 1.5 * math.pi),
                         lambda s: (0.105, 0.4), 1.0)
    if vals[i, j] < v:
        return float(vals[i, j]), float(s_grid[i]), float(q_grid[j])
    return v, s, q


def min_increment(n: int = 2000) -> tuple[float, float]:
    """min over q in [-0.12, 0.4]; returns (value, q)."""
    qs = np.linspace(-0.12, 0.4, n)
    vals = increment(qs)
    k = int(np.argmin(vals))
    lo, hi = qs[max(k - 1, 0)], qs[min(k + 1, n - 1)]
    res = minimize_scalar(increment, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if res.fun < vals[k]:
        return float(res.fun), float(res.x)
    return float(vals[k]), float(qs[k])


def max_phi(n: int = 2000) -> tuple[float, float, float]:
    """max over {s >= 0, s + q <= pi, -pi/2 <= q <= 0.15}; returns (value, s, q)."""
    q_grid = np.linspace(Q_MIN, 0.15, n)
    frac = np.linspace(0.0, 1.0, n)
    Q, F = np.meshgrid(q_grid, frac, indexing="ij")
    S = F * (math.pi - Q)
    vals = phi(S, Q)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    s, q, v = _refine_2d(phi, S[i, j], q_grid[i], lambda q: (0.0, math.pi - q),
                         lambda s: (Q_MIN, min(0.15, math.pi - s)), -1.0)
    if vals[i, j] > v:
        return float(vals[i, j]), float(S[i, j]), float(q_grid[i])
    return v, s, q


@dataclass(frozen=True)
class AppendixReport:
    min_psi: float
    argmin_psi: tuple
    min_increment: float
    argmin_increment: float
    max_phi: float
    argmax_phi: tuple
    grid: int

    def as_dict(self) -> dict:
        return {"min_psi": self.min_psi, "argmin": {"s": self.argmin_psi[0], "q": self.argmin_psi[1]},
                "min_increment": self.min_increment, "argmin_increment": self.argmin_increment,
                "max_phi": self.max_phi, "argmax_phi": {"s": self.argmax_phi[0], "q": self.argmax_phi[1]},
                "grid": self.grid,
                "tolerances": {"min_psi": 5e-4, "min_increment": 5e-4, "max_phi": 5e-4}}


def verify_appendix_minima(n: int = 2000) -> AppendixReport:
    mp, ms, mq = min_psi(n)
    mi, iq = min_increment(n)
    xp, xs, xq = max_phi(n)
    return AppendixReport(mp, (ms, mq), mi, iq, xp, (xs, xq), n)


def validity_end(q: float, n: int = 20001) -> float:
    """End of the stretch of [q, q + 2h] on which the closed form also solves the max equation.

    The linear second step uses u(t - h) in place of the window max; the two
    agree while the max over [t - h, t] sits at the left end t - h (or while
    the history p still dominates during the first step).
    """
    ts = np.linspace(q, q + 2 * H, n)
    u = solution(q, ts)
    p = initial_value(q)
    dt = ts[1] - ts[0]
    width = int(round(H / dt))
    tol = 1e-9
    for k in range(1, n):
        lo = k - width
        if lo <= 0:
            if np.max(u[:k + 1]) > p + tol:
                return float(ts[k - 1])
        elif np.max(u[lo:k + 1]) > u[lo] + tol:
            return float(ts[k - 1])
    return float(ts[-1])
