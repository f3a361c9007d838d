"""Problem definition for u'(t) = a u(t) + b max_{[t-h,t]} u(s) + f(t).

Raw forcing is normalized so that its maximum sits at t = 0, its minimum is
0 and is attained at ``beta``: f is strictly decreasing on [0, beta] and
strictly increasing on [beta, T]. Everything downstream works in these
normalized coordinates; ``NormalizedProblem`` converts back to raw time and
raw solution values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar


class ProblemError(ValueError):
    """Invalid parameters, forcing or problem file."""


@dataclass(frozen=True)
class Parameters:
    a: float
    b: float
    h: float

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ProblemError(f"window length h must be positive, got {self.h}")
        if self.a + self.b == 0:
            raise ProblemError("a + b must be nonzero")

    @property
    def abs_sum(self) -> float:
        return abs(self.a + self.b)


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    branch: str | None  # "first" (a+b<0, ah<=1), "second" (bh<-exp(ah-1), ah>=1) or None


def stability_check(params: Parameters) -> StabilityResult:
    """Uniform asymptotic stability of the trivial solution of the unforced equation."""
    a, b, h = params.a, params.b, params.h
    if a + b < 0 and a * h <= 1:
        return StabilityResult(True, "first")
    if b * h < -math.exp(a * h - 1) and a * h >= 1:
        return StabilityResult(True, "second")
    return StabilityResult(False, None)


def map_hedonic_params(alpha: float, beta_gain: float) -> tuple[float, float]:
    """Coefficients (a, b) of u' = -alpha u + beta_gain (u - max u) + f."""
    return beta_gain - alpha, -beta_gain


# --------------------------------------------------------------------------
# raw forcing terms


class RawForcing:
    """A T-periodic forcing term in raw coordinates, vectorized over numpy arrays.

    Subclasses may set ``argmax``/``argmin`` when the extrema are known exactly.
    """

    period: float
    argmax: float | None = None
    argmin: float | None = None

    def __call__(self, t):
        raise NotImplementedError

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        eps = 1e-6 * self.period
        return (self(t + eps) - self(t - eps)) / (2 * eps)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SineForcingRaw(RawForcing):
    """f(t) = level - amplitude * sin(t - phase); ``level=1, amplitude=1`` is 1 - sin t."""

    level: float = 1.0
    amplitude: float = 1.0
    phase: float = 0.0
    period: float = 2 * math.pi

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ProblemError("amplitude must be positive")
        if not math.isclose(self.period, 2 * math.pi):
            raise ProblemError("sine forcing has period 2*pi")

    @property
    def argmax(self):
        return self.phase - math.pi / 2

    @property
    def argmin(self):
        return self.phase + math.pi / 2

    def __call__(self, t):
        return self.level - self.amplitude * np.sin(np.asarray(t, dtype=float) - self.phase)

    def deriv(self, t):
        return -self.amplitude * np.cos(np.asarray(t, dtype=float) - self.phase)

    def describe(self):
        if self.level == 1 and self.amplitude == 1 and self.phase == 0:
            return {"type": "one_minus_sin", "period": self.period}
        return {"type": "sine", "period": self.period, "level": self.level,
                "amplitude": self.amplitude, "phase": self.phase}


@dataclass(frozen=True)
class CosineMaxForcing(RawForcing):
    """f(t) = -sin t + max_{[t-3pi/2, t]} cos s, which makes cos t a solution for a=0, b=-1."""

    period: float = 2 * math.pi
    argmax: float = -math.pi / 2
    argmin: float = math.pi / 2

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        r = np.mod(t, 2 * math.pi)
        tail = np.maximum(np.cos(r - 1.5 * math.pi), np.cos(r))
        m = np.where(r <= 1.5 * math.pi, 1.0, tail)
        return -np.sin(t) + m

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        r = np.mod(t, 2 * math.pi)
        left = np.cos(r - 1.5 * math.pi) >= np.cos(r)
        dm = np.where(left, -np.sin(r - 1.5 * math.pi), -np.sin(r))
        dm = np.where(r <= 1.5 * math.pi, 0.0, dm)
        return -np.cos(t) + dm

    def describe(self):
        return {"type": "cos_max", "period": self.period}


@dataclass(frozen=True, eq=False)
class TableForcing(RawForcing):
    """Periodic cubic spline through samples [(t, f), ...] covering one period."""

    times: tuple
    values: tuple
    period: float
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 8:
            raise ProblemError("table forcing needs at least 8 (t, f) samples")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ProblemError("table forcing samples must be finite")
        if np.any(np.diff(t) <= 0):
            raise ProblemError("table forcing times must be strictly increasing")
        span = t[-1] - t[0]
        if span > self.period * (1 + 1e-12):
            raise ProblemError("table forcing samples exceed one period")
        if math.isclose(span, self.period, rel_tol=1e-12):
            v = v.copy()
            v[-1] = v[0]
        else:
            t = np.append(t, t[0] + self.period)
            v = np.append(v, v[0])
        object.__setattr__(self, "_spline", CubicSpline(t, v, bc_type="periodic"))

    def __call__(self, t):
        return self._spline(np.asarray(t, dtype=float))

    def deriv(self, t):
        return self._spline(np.asarray(t, dtype=float), 1)

    def describe(self):
        return {"type": "table", "period": self.period,
                "samples": [[float(x), float(y)] for x, y in zip(self.times, self.values)]}


# --------------------------------------------------------------------------
# normalized problem


@dataclass(frozen=True)
class SineForcing:
    """Forcing in normalized coordinates: f(s) = raw(s + shift) - offset."""

    raw: RawForcing
    shift: float
    offset: float
    period: float
    beta: float
    fmax: float
    fmin: float = 0.0

    def __call__(self, s):
        return self.raw(np.asarray(s, dtype=float) + self.shift) - self.offset

    def deriv(self, s):
        return self.raw.deriv(np.asarray(s, dtype=float) + self.shift)


@dataclass(frozen=True)
class NormalizedProblem:
    params: Parameters
    forcing: SineForcing
    name: str = "custom"

    @property
    def shift(self) -> float:
        return self.forcing.shift

    @property
    def offset(self) -> float:
        return self.forcing.offset

    @property
    def period(self) -> float:
        return self.forcing.period

    @property
    def beta(self) -> float:
        return self.forcing.beta

    @property
    def ftilde_max(self) -> float:
        return self.forcing.fmax / self.params.abs_sum

    @property
    def fstar(self) -> float:
        """Upper bound max f / |a+b| of solutions after transients (normalized values)."""
        return self.ftilde_max

    def ftilde(self, t):
        return self.forcing(t) / self.params.abs_sum

    def to_raw_time(self, s):
        return np.asarray(s, dtype=float) + self.shift if np.ndim(s) else float(s) + self.shift

    def from_raw_time(self, t):
        return np.asarray(t, dtype=float) - self.shift if np.ndim(t) else float(t) - self.shift

    def to_raw_value(self, v):
        return v + self.offset / self.params.abs_sum

    def from_raw_value(self, u):
        return u - self.offset / self.params.abs_sum

    def describe(self) -> dict:
        return {"name": self.name, "a": self.params.a, "b": self.params.b,
                "h": self.params.h, "forcing": self.forcing.raw.describe(),
                "shift": self.shift, "offset": self.offset, "beta": self.beta,
                "period": self.period, "ftilde_max": self.ftilde_max}


def _count_sign_changes(x: np.ndarray) -> int:
    s = np.sign(x)
    s = s[s != 0]
    if s.size == 0:
        return 0
    return int(np.count_nonzero(s != np.roll(s, 1)))


def _polish_extremum(raw: RawForcing, t0: float, step: float, kind: str) -> float:
    sign = -1.0 if kind == "max" else 1.0
    res = minimize_scalar(lambda t: sign * float(raw(t)), bounds=(t0 - step, t0 + step),
                          method="bounded", options={"xatol": 1e-10 * raw.period})
    t = float(res.x)
    # value comparisons stall near sqrt(eps); finish on the derivative when it brackets
    lo, hi = t - 1e-6 * raw.period, t + 1e-6 * raw.period
    dlo, dhi = float(raw.deriv(lo)), float(raw.deriv(hi))
    if dlo * dhi < 0:
        t = brentq(lambda x: float(raw.deriv(x)), lo, hi, xtol=1e-14, rtol=1e-15)
    return t


def normalize_forcing(raw: RawForcing, period: float, params: Parameters,
                      name: str = "custom", n_samples: int = 4096) -> NormalizedProblem:
    """Shift and offset a sine-like raw forcing into normalized coordinates.

    Raises ProblemError when the sampled derivative changes sign more than
    twice per period.
    """
    if not period > 0:
        raise ProblemError("period must be positive")
    grid = np.linspace(0.0, period, n_samples, endpoint=False)
    vals = np.asarray(raw(grid), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ProblemError("forcing is not finite on its period")
    nch = _count_sign_changes(np.roll(vals, -1) - vals)
    if nch != 2:
        raise ProblemError(f"forcing is not sine-like: slope changes sign {nch} times per period")
    step = period / n_samples
    if raw.argmax is not None and raw.argmin is not None:
        tmax, tmin = float(raw.argmax), float(raw.argmin)
    else:
        tmax = _polish_extremum(raw, grid[int(np.argmax(vals))], step, "max")
        tmin = _polish_extremum(raw, grid[int(np.argmin(vals))], step, "min")
    shift = math.remainder(tmax, period)
    beta = (tmin - shift) % period
    offset = float(raw(tmin))
    fmax = float(raw(tmax)) - offset
    forcing = SineForcing(raw=raw, shift=shift, offset=offset, period=period,
                          beta=beta, fmax=fmax)
    return NormalizedProblem(params=params, forcing=forcing, name=name)


def ftilde(problem: NormalizedProblem, t):
    """f(t)/|a+b| in normalized coordinates."""
    return problem.ftilde(t)


def ftilde_inverse(problem: NormalizedProblem, p: float) -> float:
    """The unique q in [0, beta] with ftilde(q) = p."""
    top = problem.ftilde_max
    tol = 1e-12 * top
    if not (-tol <= p <= top + tol):
        raise ProblemError(f"p={p} outside K=[0, {top}]")
    if p >= top:
        return 0.0
    if p <= 0:
        return problem.beta
    return brentq(lambda q: float(problem.ftilde(q)) - p, 0.0, problem.beta,
                  xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


# --------------------------------------------------------------------------
# presets and problem files


def preset(name: str) -> NormalizedProblem:
    """Named examples: 'ex1' (a=0, b=-1, cos-max forcing), 'ex2' (a=0.32, b=-1, 1 - sin t)."""
    h = 1.5 * math.pi
    if name == "ex1":
        return normalize_forcing(CosineMaxForcing(), 2 * math.pi, Parameters(0.0, -1.0, h), "ex1")
    if name == "ex2":
        return normalize_forcing(SineForcingRaw(), 2 * math.pi, Parameters(0.32, -1.0, h), "ex2")
    raise ProblemError(f"unknown preset {name!r}")


def forcing_from_dict(definition: dict) -> RawForcing:
    kind = definition.get("type")
    period = float(definition.get("period", 2 * math.pi))
    if kind == "one_minus_sin":
        return SineForcingRaw(period=period)
    if kind == "sine":
        return SineForcingRaw(level=float(definition.get("level", 1.0)),
                              amplitude=float(definition.get("amplitude", 1.0)),
                              phase=float(definition.get("phase", 0.0)), period=period)
    if kind == "cos_max":
        return CosineMaxForcing()
    if kind == "table":
        samples = definition.get("samples")
        if not samples:
            raise ProblemError("table forcing needs 'samples'")
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ProblemError("samples must be a list of [t, f] pairs")
        return TableForcing(tuple(arr[:, 0]), tuple(arr[:, 1]), period)
    raise ProblemError(f"unknown forcing type {kind!r}")


def problem_from_dict(definition: dict, name: str = "custom") -> NormalizedProblem:
    try:
        params = Parameters(float(definition["a"]), float(definition["b"]), float(definition["h"]))
        raw = forcing_from_dict(definition["forcing"])
    except (KeyError, TypeError) as exc:
        raise ProblemError(f"malformed problem definition: {exc!r}") from exc
    return normalize_forcing(raw, raw.period, params, name=name)


def load_problem(path: str | Path) -> NormalizedProblem:
    path = Path(path)
    try:
        definition = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemError(f"cannot read problem file {path}: {exc}") from exc
    if not isinstance(definition, dict):
        raise ProblemError("problem file must hold a JSON object")
    return problem_from_dict(definition, name=path.stem)


def problem_to_dict(problem: NormalizedProblem) -> dict:
    p = problem.params
    return {"a": p.a, "b": p.b, "h": p.h, "forcing": problem.forcing.raw.describe()}

