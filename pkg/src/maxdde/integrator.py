"""Fixed-step integration with sliding-window maxima and qualified-maximum events.

The step is snapped so that the window length h spans an integer number of
steps; off-grid values (the left edge of the window, delayed values) come
from the cubic Hermite interpolant built on stored values and derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .core import NormalizedProblem, ProblemError

DEFAULT_STEPS_PER_WINDOW = 2000
KERNEL_QUAL_TOL = 1e-7


@dataclass(frozen=True)
class QualifiedMax:
    tau: float
    value: float
    epsilon_used: float
    branch_j: int


@dataclass(frozen=True)
class Grazing:
    """Solution touching the zero minimum of the forcing while being the window max."""

    time: float
    value: float
    gap: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    problem: NormalizedProblem
    t0: float
    dt: float
    n_hist: int
    values: np.ndarray
    derivs: np.ndarray
    window_max: np.ndarray
    d_hist_end: float
    mode: str = "max"
    events: tuple = ()
    grazing: tuple = ()
    complete: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + (np.arange(self.values.size) - self.n_hist) * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + (self.values.size - 1 - self.n_hist) * self.dt

    @property
    def h(self) -> float:
        return self.problem.params.h

    def _locate(self, t):
        x = (np.asarray(t, dtype=float) - self.t0) / self.dt + self.n_hist
        last = self.values.size - 1
        if np.any(x < -1e-9) or np.any(x > last + 1e-9):
            raise ValueError(f"time outside stored range [{self.t0 - self.h}, {self.t_end}]")
        k = np.clip(np.floor(x).astype(np.int64), 0, last - 1)
        th = np.clip(x - k, 0.0, 1.0)
        m0 = self.derivs[k]
        m1 = np.where(k + 1 == self.n_hist, self.d_hist_end, self.derivs[np.minimum(k + 1, last)])
        return k, th, m0, m1

    def __call__(self, t):
        """Dense output (cubic Hermite)."""
        k, th, m0, m1 = self._locate(t)
        u = self.values
        th2 = th * th
        th3 = th2 * th
        out = ((2 * th3 - 3 * th2 + 1) * u[k] + (th3 - 2 * th2 + th) * self.dt * m0
               + (-2 * th3 + 3 * th2) * u[k + 1] + (th3 - th2) * self.dt * m1)
        return out if np.ndim(t) else float(out)

    def deriv(self, t):
        k, th, m0, m1 = self._locate(t)
        u = self.values
        th2 = th * th
        out = ((6 * th2 - 6 * th) * u[k] + (3 * th2 - 4 * th + 1) * self.dt * m0
               + (-6 * th2 + 6 * th) * u[k + 1] + (3 * th2 - 2 * th) * self.dt * m1) / self.dt
        return out if np.ndim(t) else float(out)

    def index_of(self, t: float) -> float:
        return (t - self.t0) / self.dt + self.n_hist


def _history_samples(history, t0, dt, n_hist, history_deriv):
    th = t0 + (np.arange(n_hist + 1) - n_hist) * dt
    if callable(history):
        vals = np.asarray(history(th), dtype=float) * np.ones_like(th)
        if history_deriv is not None:
            ders = np.asarray(history_deriv(th), dtype=float) * np.ones_like(th)
        else:
            e = 1e-5 * dt * n_hist
            ders = (np.asarray(history(th + e), dtype=float)
                    - np.asarray(history(th - e), dtype=float)) / (2 * e) * np.ones_like(th)
    else:
        vals = np.full(n_hist + 1, float(history))
        ders = np.zeros(n_hist + 1)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(ders))):
        raise ProblemError("initial history must be finite")
    return vals, ders


def steps_per_window(h: float, dt: float | None) -> int:
    if dt is None:
        return DEFAULT_STEPS_PER_WINDOW
    if not dt > 0:
        raise ProblemError("dt must be positive")
    n = int(round(h / dt))
    if h / dt < 100 * (1 - 1e-9) or n < 100:
        raise ProblemError(f"dt={dt} too large: need dt <= h/100 = {h / 100}")
    return n


def integrate(problem: NormalizedProblem, history: float | Callable, t_end: float,
              dt: float | None = None, *, t0: float = 0.0, mode: str = "max",
              max_events: int | None = None, eps: float | None = None,
              history_deriv: Callable | None = None, qual_tol: float = 1e-9) -> Trajectory:
    """Integrate from ``history`` on [t0 - h, t0] up to ``t_end`` (normalized time).

    ``history`` is a constant or a vectorized callable. ``mode="delay"``
    integrates the linear delay equation u' = a u + b u(t - h) + f instead,
    which the closed-form oracles use. With ``max_events`` set, integration
    stops once that many qualified maxima are confirmed.
    """
    if mode not in ("max", "delay"):
        raise ValueError("mode must be 'max' or 'delay'")
    if not t_end > t0:
        raise ProblemError("t_end must exceed t0")
    p = problem.params
    n_hist = steps_per_window(p.h, dt)
    step = p.h / n_hist
    if eps is None:
        eps = 1e-3 * problem.period
    n_steps = int(math.ceil((t_end - t0) / step - 1e-9))
    u_hist, d_hist = _history_samples(history, t0, step, n_hist, history_deriv)
    f_half = np.asarray(problem.forcing(t0 + 0.5 * step * np.arange(2 * n_steps + 1)), dtype=float)
    kmode = K.MODE_MAX if mode == "max" else K.MODE_DELAY
    eps_steps = int(math.ceil(eps / step)) + 1
    want = 0 if (max_events is None or mode != "max") else int(max_events)
    extra = 0
    while True:
        u, d, w, n_done, status, _, _ = K.integrate_kernel(
            p.a, p.b, step, n_hist, u_hist, d_hist, f_half, n_steps, kmode,
            want + extra if want else 0, eps_steps, KERNEL_QUAL_TOL)
        size = n_hist + 1 + n_done
        traj = Trajectory(problem=problem, t0=t0, dt=step, n_hist=n_hist,
                          values=u[:size], derivs=d[:size], window_max=w[:size],
                          d_hist_end=float(d_hist[n_hist]), mode=mode,
                          complete=status == K.STATUS_DONE)
        if mode != "max":
            return traj
        events = detect_qualified_maxima(traj, eps, tol=qual_tol)
        if not want or len(events) >= want or status == K.STATUS_DONE:
            break
        extra += 1
    if want:
        events = events[:want]
    graze = detect_grazing(traj)
    return Trajectory(problem=problem, t0=t0, dt=step, n_hist=n_hist, values=traj.values,
                      derivs=traj.derivs, window_max=traj.window_max,
                      d_hist_end=traj.d_hist_end, mode=mode, events=tuple(events),
                      grazing=tuple(graze), complete=traj.complete)


def window_max(traj: Trajectory, t: float) -> float:
    """max of the dense interpolant over [t - h, t]."""
    last = traj.values.size - 1
    x = traj.index_of(t)
    if x < traj.n_hist - 1e-9 or x > last + 1e-9:
        raise ValueError(f"t={t} not covered: need t in [{traj.t0}, {traj.t_end}]")
    x = min(max(x, float(traj.n_hist)), float(last))
    return float(K.window_max_at(traj.values, traj.derivs, traj.n_hist, traj.d_hist_end,
                                 traj.dt, last, x))


def sliding_window_max(values: np.ndarray, width: int) -> np.ndarray:
    """out[i] = max(values[max(0, i - width) : i + 1]) with a monotone deque."""
    from collections import deque

    out = np.empty(len(values))
    dq: deque[int] = deque()
    for i, v in enumerate(values):
        while dq and values[dq[-1]] <= v:
            dq.pop()
        dq.append(i)
        if dq[0] < i - width:
            dq.popleft()
        out[i] = values[dq[0]]
    return out


def _refine_peak(traj: Trajectory, k: int) -> float:
    """Event time near cell k: upward crossing of g = u - ftilde, else the slope root."""
    u, d = traj.values, traj.derivs
    m1 = traj.d_hist_end if k + 1 == traj.n_hist else d[k + 1]
    th = K.peak_in_cell(u[k], u[k + 1], d[k], m1, traj.dt)
    t_peak = traj.t0 + (k - traj.n_hist + max(th, 0.0)) * traj.dt
    lo = max(t_peak - traj.dt, traj.t0)
    hi = min(t_peak + traj.dt, traj.t_end)
    ts = np.linspace(lo, hi, 9)
    g = traj(ts) - traj.problem.ftilde(ts)
    idx = np.nonzero((g[:-1] < 0) & (g[1:] >= 0))[0]
    if idx.size == 0:
        return t_peak
    i = idx[np.argmin(np.abs(ts[idx] - t_peak))]
    if g[i + 1] == 0:
        return float(ts[i + 1])

    def gfun(x):
        return traj(x) - float(traj.problem.ftilde(x))

    return brentq(gfun, ts[i], ts[i + 1], xtol=1e-14, rtol=1e-15)


def detect_qualified_maxima(traj: Trajectory, eps: float | None = None,
                            tol: float = 1e-9) -> list[QualifiedMax]:
    """Times tau > t0 with u(tau) = max of u over [tau - h, tau + eps]."""
    if eps is None:
        eps = 1e-3 * traj.problem.period
    u, d = traj.values, traj.derivs
    N = traj.n_hist
    last = u.size - 1
    if last - N < 2:
        return []
    dd = d[N:last + 1]
    cells = np.nonzero((dd[:-1] > 0) & (dd[1:] <= 0))[0] + N
    T = traj.problem.period
    events: list[QualifiedMax] = []
    for k in cells:
        tau = _refine_peak(traj, int(k))
        if tau <= traj.t0 + 1e-6 * traj.dt or tau + eps > traj.t_end:
            continue
        if events and tau <= events[-1].tau:
            continue
        val = traj(tau)
        xq = min(traj.index_of(tau), float(last))
        past = K.window_max_at(u, d, N, traj.d_hist_end, traj.dt, last, xq)
        if past > val + tol:
            continue
        k_hi = int(math.floor(traj.index_of(tau + eps)))
        after = u[int(k) + 1:k_hi + 1]
        after = after[traj.times[int(k) + 1:k_hi + 1] > tau]
        if after.size and after.max() >= val:
            continue
        if traj(tau + eps) >= val:
            continue
        events.append(QualifiedMax(tau=float(tau), value=float(val), epsilon_used=float(eps),
                                   branch_j=int(math.floor(tau / T))))
    return events


def detect_grazing(traj: Trajectory, tol: float = 1e-6) -> list[Grazing]:
    """Passages through (beta + jT, 0) with u equal to its window max (degenerate peaks)."""
    prob = traj.problem
    T, beta = prob.period, prob.beta
    j0 = math.ceil((traj.t0 - beta) / T)
    out = []
    j = j0
    while beta + j * T <= traj.t_end:
        t = beta + j * T
        if t > traj.t0:
            v = traj(t)
            if abs(v) < tol:
                gap = window_max(traj, t) - v
                if gap < tol:
                    out.append(Grazing(time=t, value=v, gap=gap))
        j += 1
    return out
