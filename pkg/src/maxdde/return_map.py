"""Return map on qualified maxima, its derivative and continuity structure.

All times are in normalized coordinates: the forcing peaks at 0 and is
decreasing on [0, beta]. A starting value p in K = [0, ftilde(0)] is paired
with q = ftilde_inverse(p) and the constant history u = p on [q - h, q].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .core import NormalizedProblem, ProblemError, ftilde_inverse
from .fundamental import FundamentalSolution, fundamental_solution
from .integrator import Trajectory, integrate, window_max

SIMPSON_PANELS = 10_000


class ReturnMapError(RuntimeError):
    """Raised when no qualified maximum follows the initial time."""


@dataclass(frozen=True)
class ReturnMapSample:
    p: float
    q: float
    lam: float
    mu: float
    nu_star: float
    R: float
    Rprime: float | None
    branch_j: int
    u_shaped: bool
    grazing: bool = False

    def as_row(self) -> dict:
        return {"p": self.p, "q": self.q, "lambda": self.lam, "mu": self.mu,
                "nu_star": self.nu_star, "R": self.R,
                "Rprime": "" if self.Rprime is None else self.Rprime,
                "branch_j": self.branch_j, "u_shaped": int(self.u_shaped)}


def simpson(func, lo: float, hi: float, panels: int = SIMPSON_PANELS) -> float:
    x = np.linspace(lo, hi, 2 * panels + 1)
    y = func(x)
    step = (hi - lo) / (2 * panels)
    return float(step / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))


@lru_cache(maxsize=16)
def _fundamental(a: float, b: float, h: float) -> FundamentalSolution:
    from .core import Parameters

    return fundamental_solution(Parameters(a, b, h), 4 * h, n_grid=257)


def run_from(problem: NormalizedProblem, p: float, *, dt: float | None = None,
             eps: float | None = None, periods: float = 4.0,
             max_events: int = 1) -> tuple[float, Trajectory]:
    """Integrate from the constant history p at q = ftilde_inverse(p)."""
    q = ftilde_inverse(problem, p)
    T = problem.period
    for span in (periods * T, max(12.0, periods) * T):
        traj = integrate(problem, p, q + span, dt, t0=q, max_events=max_events, eps=eps)
        if len(traj.events) >= max_events:
            return q, traj
    raise ReturnMapError(f"fewer than {max_events} qualified maxima before q + {span:.4g} (p={p})")


def _first_crossing_up(traj: Trajectory, level: float, t_lo: float, t_hi: float) -> float | None:
    """First time in (t_lo, t_hi] where u rises through ``level`` after having dipped below it."""
    k0 = int(math.ceil(traj.index_of(t_lo)))
    k1 = int(math.floor(traj.index_of(t_hi)))
    seg = traj.values[k0:k1 + 1] - level
    scale = max(1.0, abs(level))
    below = np.nonzero(seg < -1e-12 * scale)[0]
    if below.size == 0:
        return None
    start = below[0]
    up = np.nonzero(seg[start:] >= 0)[0]
    if up.size == 0:
        return None
    k = k0 + start + up[0]
    times = traj.times
    return brentq(lambda t: traj(t) - level, times[k - 1], times[k], xtol=1e-14)


def _max_gap(traj: Trajectory, t: float) -> float:
    return window_max(traj, t) - traj(t)


def segmentation(traj: Trajectory, p: float, q: float, nu: float) -> tuple[float, float, bool]:
    """(lambda, mu, u_shaped) for the run from constant history p at q with first peak nu."""
    h = traj.h
    scale = max(1.0, abs(p))
    tol = 1e-11 * scale
    cross = _first_crossing_up(traj, p, q, min(q + h, nu))
    lam = cross if cross is not None else min(q + h, nu)

    k_nu = int(math.floor(traj.index_of(nu)))
    k_q = traj.n_hist
    gap = traj.window_max[k_q:k_nu + 1] - traj.values[k_q:k_nu + 1]
    pos = np.nonzero(gap > tol)[0]
    if pos.size == 0:
        mu = q
    else:
        k = k_q + pos[-1]
        times = traj.times
        lo, hi = times[k], min(times[k + 1], nu)
        if _max_gap(traj, hi) > tol:
            mu = hi
        else:
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if _max_gap(traj, mid) > tol:
                    lo = mid
                else:
                    hi = mid
            mu = 0.5 * (lo + hi)
    if cross is None and mu <= q + 1e-9 * h:
        lam = mu
    # history leaving the window and u taking over can coincide; keep lam <= mu
    lam = min(lam, mu)
    d = traj.derivs[k_q + 1:k_nu + 1]
    signs = np.sign(d[np.abs(d) > 1e-10 * scale])
    u_shaped = bool(np.all(np.diff(signs) >= 0))
    return float(lam), float(mu), u_shaped


def derivative_from_segment(problem: NormalizedProblem, q: float, mu: float, nu: float) -> float:
    """V(mu - q) * exp((a + b)(nu - mu))."""
    p = problem.params
    fs = _fundamental(p.a, p.b, p.h)
    return float(fs.V(mu - q)) * math.exp((p.a + p.b) * (nu - mu))


def derivative_fr(problem: NormalizedProblem, q: float, mu: float, nu: float) -> float:
    """Elementary form valid when mu - q <= h (including the a -> 0 limit)."""
    p = problem.params
    x = mu - q
    if p.a == 0:
        core = 1.0 + p.b * x
    else:
        core = (1.0 + p.b / p.a) * math.exp(p.a * x) - p.b / p.a
    return core * math.exp((p.a + p.b) * (nu - mu))


def eval_R(problem: NormalizedProblem, p: float, *, dt: float | None = None,
           eps: float | None = None, with_derivative: bool = True) -> ReturnMapSample:
    q, traj = run_from(problem, p, dt=dt, eps=eps)
    ev = traj.events[0]
    lam, mu, u_shaped = segmentation(traj, p, q, ev.tau)
    grazing = any(g.time < ev.tau for g in traj.grazing)
    rp = None
    if with_derivative and u_shaped and not grazing:
        rp = derivative_from_segment(problem, q, mu, ev.tau)
    return ReturnMapSample(p=float(p), q=q, lam=lam, mu=mu, nu_star=ev.tau, R=ev.value,
                           Rprime=rp, branch_j=ev.branch_j, u_shaped=u_shaped, grazing=grazing)


def R_value(problem: NormalizedProblem, p: float, **kw) -> float:
    return eval_R(problem, p, with_derivative=False, **kw).R


def segment(problem: NormalizedProblem, p: float, **kw) -> tuple[float, float, float]:
    s = eval_R(problem, p, with_derivative=False, **kw)
    if not s.u_shaped:
        raise ReturnMapError(f"solution from p={p} is not U-shaped before its first peak")
    return s.lam, s.mu, s.nu_star


def derivative_R(problem: NormalizedProblem, p: float, **kw) -> float:
    s = eval_R(problem, p, **kw)
    if s.grazing:
        raise ReturnMapError(f"p={p} sits on a discontinuity (grazing orbit)")
    if s.Rprime is None:
        raise ReturnMapError(f"derivative undefined at p={p}: solution not U-shaped")
    return s.Rprime


def finite_difference_R(problem: NormalizedProblem, p: float, step: float = 1e-4, **kw) -> float:
    return (R_value(problem, p + step, **kw) - R_value(problem, p - step, **kw)) / (2 * step)


# continuity predicates ------------------------------------------------------

def condition_fs(problem: NormalizedProblem, q: float) -> float:
    a, h = problem.params.a, problem.params.h
    f = problem.forcing
    fq = float(f(q))
    return simpson(lambda s: np.exp(a * s) * (f(q + h - s) - fq), 0.0, h)


def condition_ss(problem: NormalizedProblem, q: float, **kw) -> float:
    a, h = problem.params.a, problem.params.h
    f = problem.forcing
    nu = eval_R(problem, float(problem.ftilde(q)), with_derivative=False, **kw).nu_star
    fn = float(f(nu))
    return simpson(lambda s: np.exp(a * s) * (f(nu - s) - fn), 0.0, h)


def _sign_changes(func, lo: float, hi: float, n: int = 400) -> list[tuple[float, float]]:
    xs = np.linspace(lo, hi, n + 1)
    ys = np.array([func(x) for x in xs])
    return [(xs[i], xs[i + 1]) for i in range(n) if ys[i] * ys[i + 1] < 0]


def beta1(problem: NormalizedProblem) -> float:
    """Left end of the interval (beta1, beta) where condition_fs is positive."""
    beta = problem.beta
    brackets = _sign_changes(lambda q: condition_fs(problem, q), 0.0, beta)
    if len(brackets) != 1:
        raise ProblemError(f"condition_fs has {len(brackets)} sign changes on [0, beta]; "
                           "expected exactly one")
    lo, hi = brackets[0]
    if condition_fs(problem, hi) < 0:
        raise ProblemError("condition_fs is positive left of its root; expected the reverse")
    return brentq(lambda q: condition_fs(problem, q), lo, hi, xtol=1e-13)


def q0_applicable(problem: NormalizedProblem) -> bool:
    a, b, h = problem.params.a, problem.params.b, problem.params.h
    return a > 0 and b < a / (math.exp(-a * h) - 1.0)


def m1_residual(problem: NormalizedProblem, tau: float) -> float:
    a, b = problem.params.a, problem.params.b
    upper = math.log(b / (a + b)) / a
    f = problem.forcing
    return float(f(tau)) + b * simpson(lambda u: np.exp(-a * u) * f(u + tau), 0.0, upper)


def q0_root(problem: NormalizedProblem) -> float:
    """Root of the critical-point equation on (beta1, beta), the turning point of R."""
    if not q0_applicable(problem):
        raise ProblemError("critical-point equation not applicable: needs a > 0 and "
                           "b < a / (exp(-a h) - 1)")
    lo, hi = beta1(problem), problem.beta
    brackets = _sign_changes(lambda t: m1_residual(problem, t), lo, hi, n=200)
    if len(brackets) != 1:
        raise ProblemError(f"critical-point equation has {len(brackets)} roots on (beta1, beta)")
    return brentq(lambda t: m1_residual(problem, t), *brackets[0], xtol=1e-13)


# discontinuities and periodic points ----------------------------------------

@dataclass(frozen=True)
class Discontinuity:
    p: float
    R_left: float
    R_at: float
    R_zero: float
    j_left: int
    j_right: int
    left_samples: tuple

    @property
    def contract_ok(self) -> bool:
        return abs(self.R_left) < 2e-2 and abs(self.R_at - self.R_zero) < 2e-2

    def as_dict(self) -> dict:
        return {"p_j": self.p, "R_left": self.R_left, "R_at": self.R_at,
                "R_zero": self.R_zero, "j_left": self.j_left, "j_right": self.j_right,
                "contract_ok": self.contract_ok}


def branch_index(problem: NormalizedProblem, p: float, **kw) -> int:
    return eval_R(problem, p, with_derivative=False, **kw).branch_j


def _bisect_jump(problem, lo, hi, j_lo, j_hi, tol, **kw):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        j = branch_index(problem, mid, **kw)
        if j == j_lo:
            lo = mid
        elif j == j_hi:
            hi = mid
        else:
            raise ProblemError(f"branch index not monotone on [{lo}, {hi}]: found {j} "
                               f"between {j_lo} and {j_hi}")
    return lo, hi


def find_discontinuities(problem: NormalizedProblem, p_range=None, n_grid: int = 400,
                         tol: float = 1e-11, **kw) -> list[Discontinuity]:
    lo_p, hi_p = p_range if p_range is not None else (0.0, problem.ftilde_max)
    ps = np.linspace(lo_p, hi_p, n_grid + 1)
    js = [branch_index(problem, float(x), **kw) for x in ps]
    r0 = R_value(problem, 0.0, **kw)
    out = []
    for i in range(n_grid):
        if js[i] == js[i + 1]:
            continue
        lo, hi = _bisect_jump(problem, ps[i], ps[i + 1], js[i], js[i + 1], tol, **kw)
        left = tuple(R_value(problem, hi - d, **kw) for d in (1e-4, 1e-5, 1e-6))
        r_at = R_value(problem, hi, **kw)
        out.append(Discontinuity(p=float(hi), R_left=left[-1], R_at=r_at, R_zero=r0,
                                 j_left=js[i], j_right=js[i + 1], left_samples=left))
    return out


def iterate(problem: NormalizedProblem, p: float, n: int, **kw) -> tuple[list[float], list[int]]:
    """Orbit p, R(p), ..., R^n(p) together with the branch indices used."""
    orbit, branches = [float(p)], []
    for _ in range(n):
        s = eval_R(problem, orbit[-1], with_derivative=False, **kw)
        orbit.append(s.R)
        branches.append(s.branch_j)
    return orbit, branches


@dataclass(frozen=True)
class FixedPoint:
    p: float
    n: int
    orbit: tuple
    multiplier: float | None
    residual: float


def _multiplier(problem, orbit, **kw):
    m = 1.0
    for x in orbit[:-1]:
        s = eval_R(problem, x, **kw)
        if s.Rprime is None:
            return None
        m *= s.Rprime
    return m


def fixed_points(problem: NormalizedProblem, n: int = 1, p_range=None, n_grid: int = 800,
                 xtol: float = 1e-11, **kw) -> list[FixedPoint]:
    """Roots of R^n(p) = p, bracketed only within runs of constant itinerary."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lo_p, hi_p = p_range if p_range is not None else (0.0, problem.ftilde_max * (1 - 1e-9))
    ps = np.linspace(lo_p, hi_p, n_grid + 1)

    def g(x):
        orbit, br = iterate(problem, x, n, **kw)
        return orbit[-1] - x, tuple(br)

    vals = [g(float(x)) for x in ps]
    brackets = []
    for i in range(n_grid):
        (g0, it0), (g1, it1) = vals[i], vals[i + 1]
        if it0 == it1:
            if g0 == 0:
                brackets.append((ps[i], ps[i], it0))
            elif g0 * g1 < 0:
                brackets.append((ps[i], ps[i + 1], it0))
            continue
        # split at itinerary changes; solve only the pieces with a constant itinerary
        lo, hi = ps[i], ps[i + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if g(mid)[1] == it0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12:
                break
        gl, itl = g(lo)
        gr, itr = g(hi)
        if itl == it0 and g0 * gl < 0:
            brackets.append((ps[i], lo, it0))
        if itr == it1 and gr * g1 < 0:
            brackets.append((hi, ps[i + 1], it1))
    roots = []
    for a, b, it in brackets:
        if a == b:
            r = a
        else:
            r = brentq(lambda x: g(x)[0], a, b, xtol=xtol)
        orbit, _ = iterate(problem, r, n, **kw)
        if roots and abs(r - roots[-1].p) < 10 * xtol:
            continue
        roots.append(FixedPoint(p=r, n=n, orbit=tuple(orbit), multiplier=_multiplier(problem, orbit, **kw),
                                residual=orbit[-1] - r))
    return roots


def return_map_grid(problem: NormalizedProblem, n_grid: int, p_range=None,
                    with_derivative: bool = True, **kw) -> list[ReturnMapSample]:
    if n_grid < 2:
        raise ValueError("grid needs at least two points")
    lo_p, hi_p = p_range if p_range is not None else (0.0, problem.ftilde_max)
    return [eval_R(problem, float(x), with_derivative=with_derivative, **kw)
            for x in np.linspace(lo_p, hi_p, n_grid)]
