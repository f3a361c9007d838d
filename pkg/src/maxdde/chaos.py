"""Covering relations, Markov graph and periodic-orbit census for the return map."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import NormalizedProblem, ProblemError
from .return_map import (R_value, branch_index, eval_R, find_discontinuities, fixed_points,
                         q0_applicable, q0_root)

MARGIN_THRESHOLD = 1e-3
ANCHOR_TOL = 1e-5
GRID = 2001


class CertificationError(RuntimeError):
    """Raised when a covering relation fails; ``relation`` names it."""

    def __init__(self, message: str, relation: str | None = None):
        super().__init__(message)
        self.relation = relation


@dataclass(frozen=True)
class Intervals:
    p0: float
    alpha: float
    kappa: float
    p1: float
    R0: float
    pc: float
    # endpoint identities holding by construction: source point -> target value
    anchors: tuple = ()

    @property
    def intervals(self) -> tuple[tuple[float, float], ...]:
        return ((self.p0, self.alpha), (self.alpha, self.kappa), (self.p1, self.R0))

    def as_dict(self) -> dict:
        return {"p0": self.p0, "alpha": self.alpha, "kappa": self.kappa, "p1": self.p1,
                "R0": self.R0, "pc": self.pc,
                "I1": list(self.intervals[0]), "I2": list(self.intervals[1]),
                "I3": list(self.intervals[2])}


@dataclass(frozen=True)
class Covering:
    source: int
    targets: tuple
    image: tuple
    margin: float
    free_margin: float
    anchored: tuple
    ok: bool

    @property
    def name(self) -> str:
        tgt = " u ".join(f"I{t + 1}" for t in self.targets)
        return f"{tgt} in R(I{self.source + 1})"

    def as_dict(self) -> dict:
        return {"relation": self.name, "image": list(self.image), "margin": self.margin,
                "free_margin": self.free_margin,
                "anchored": [{"endpoint": e, "residual": r} for e, r in self.anchored],
                "ok": self.ok}


@dataclass(frozen=True)
class ChaosCertificate:
    intervals: Intervals
    coverings: tuple
    adjacency: np.ndarray
    transitive_power: int | None
    spectral_radius: float
    entropy_lower: float
    orbit_counts: tuple
    located_orbits: tuple = ()
    census: tuple = field(default=())

    @property
    def covering_margins(self) -> tuple[float, ...]:
        return tuple(c.margin for c in self.coverings)

    @property
    def valid(self) -> bool:
        return all(c.ok for c in self.coverings) and self.transitive_power is not None

    def as_dict(self) -> dict:
        return {"intervals": self.intervals.as_dict(),
                "coverings": [c.as_dict() for c in self.coverings],
                "covering_margins": list(self.covering_margins),
                "adjacency": self.adjacency.tolist(),
                "transitive_power": self.transitive_power,
                "spectral_radius": self.spectral_radius,
                "entropy_lower": self.entropy_lower,
                "orbit_counts": list(self.orbit_counts),
                "located_orbits": [dict(o) for o in self.located_orbits],
                "census": [dict(c) for c in self.census],
                "valid": self.valid}


def _leftmost_discontinuity_above(problem, lo, **kw):
    found = [d for d in find_discontinuities(problem, (lo, problem.ftilde_max), n_grid=300, **kw)
             if d.p > lo]
    if not found:
        raise CertificationError("return map has no discontinuity to the right of its peak")
    return found[0]


def build_intervals(problem: NormalizedProblem, n_grid: int = GRID, **kw) -> Intervals:
    R0 = R_value(problem, 0.0, **kw)
    if q0_applicable(problem):
        pc = float(problem.ftilde(q0_root(problem)))
    else:
        grid = np.linspace(0.0, problem.ftilde_max, 201)
        pc = float(grid[int(np.argmax([R_value(problem, x, **kw) for x in grid]))])
    disc = _leftmost_discontinuity_above(problem, pc, **kw)
    p1 = disc.p
    fps = [fp.p for fp in fixed_points(problem, 1, (pc, p1 - 1e-9), n_grid=400, **kw)]
    if not fps:
        raise CertificationError("no fixed point between the peak and the first discontinuity")
    alpha = fps[0]
    if not 0.9 < alpha < p1:
        raise CertificationError(f"leftmost fixed point {alpha:.6g} not in (0.9, p1={p1:.6g})")

    def gap(x):
        return R_value(problem, x, **kw) - R0

    if not gap(pc) > 0 > gap(alpha):
        raise CertificationError("no bracket for p0 with R(p0) = R(0) on (pc, alpha)")
    p0 = brentq(gap, pc, alpha, xtol=1e-13)

    ks = np.linspace(alpha, p1, n_grid)[1:-1]
    kappa = None
    for x in ks[::-1]:
        s = eval_R(problem, float(x), with_derivative=False, **kw)
        if s.branch_j == disc.j_left and s.R < p0 - MARGIN_THRESHOLD:
            kappa = float(x)
            break
    if kappa is None:
        raise CertificationError("no grid point kappa in (alpha, p1) with R(kappa) < p0")
    anchors = ((alpha, alpha), (p0, R0), (p1, R0))
    return Intervals(p0=p0, alpha=alpha, kappa=kappa, p1=p1, R0=R0, pc=pc, anchors=anchors)


def image_bounds(problem, lo: float, hi: float, n_grid: int = GRID, **kw):
    """(min, argmin, max, argmax) of R over [lo, hi] after checking continuity."""
    xs = np.linspace(lo, hi, n_grid)
    samples = [eval_R(problem, float(x), with_derivative=False, **kw) for x in xs]
    js = {s.branch_j for s in samples}
    if len(js) > 1:
        raise CertificationError(f"R jumps inside [{lo:.6g}, {hi:.6g}] (branches {sorted(js)})")
    ys = np.array([s.R for s in samples])
    out = []
    for sign in (1.0, -1.0):
        k = int(np.argmin(sign * ys))
        val, arg = ys[k], xs[k]
        if 0 < k < n_grid - 1:
            res = minimize_scalar(lambda x: sign * R_value(problem, x, **kw),
                                  bounds=(xs[k - 1], xs[k + 1]), method="bounded",
                                  options={"xatol": 1e-10})
            if sign * res.fun < sign * val:
                val, arg = sign * res.fun, res.x
        out += [float(val), float(arg)]
    return out[0], out[1], out[2], out[3]


def _anchor_residual(problem, iv: Intervals, arg: float, target: float, **kw):
    for src, tgt in iv.anchors:
        if abs(arg - src) < 1e-9 and abs(tgt - target) < 1e-12:
            return abs(R_value(problem, src, **kw) - tgt)
    return None


def verify_coverings(problem: NormalizedProblem, iv: Intervals,
                     relations=((0, (1, 2)), (1, (0,)), (2, (1, 2))),
                     n_grid: int = GRID, threshold: float = MARGIN_THRESHOLD,
                     **kw) -> tuple[Covering, ...]:
    """Check each ``target ⊂ R(source)`` relation on the hull of its targets.

    An endpoint where the image meets the target through an identity that
    holds by construction (a fixed point, R(p0) = R(0), R(p1) = R(0)) is
    certified by its residual; every other endpoint needs margin > threshold.
    """
    ivs = iv.intervals
    out = []
    for src, targets in relations:
        lo, hi = ivs[src]
        rmin, amin, rmax, amax = image_bounds(problem, lo, hi, n_grid, **kw)
        t_lo = min(ivs[t][0] for t in targets)
        t_hi = max(ivs[t][1] for t in targets)
        m_lo, m_hi = t_lo - rmin, rmax - t_hi
        anchored, free = [], []
        for m, arg, tgt, end in ((m_lo, amin, t_lo, "lower"), (m_hi, amax, t_hi, "upper")):
            # extremes attained at the source endpoints are the candidates for anchoring
            src_end = lo if abs(arg - lo) < abs(arg - hi) else hi
            res = _anchor_residual(problem, iv, src_end, tgt, **kw) if abs(m) < threshold else None
            if res is not None:
                anchored.append((end, res))
            else:
                free.append(m)
        free_margin = min(free) if free else math.inf
        ok = free_margin > threshold and all(r < ANCHOR_TOL for _, r in anchored)
        out.append(Covering(source=src, targets=tuple(targets), image=(rmin, rmax),
                            margin=min(m_lo, m_hi), free_margin=free_margin,
                            anchored=tuple(anchored), ok=ok))
    return tuple(out)


def spectral_radius(adj: np.ndarray, iters: int = 2000, tol: float = 1e-15) -> float:
    """Perron root of a nonnegative matrix by power iteration."""
    x = np.ones(adj.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = adj @ x
        new = float(np.linalg.norm(y, np.inf))
        if new == 0:
            return 0.0
        y /= new
        if abs(new - lam) < tol and np.allclose(x, y, rtol=0, atol=tol):
            return new
        x, lam = y, new
    return lam


def transitive_power(adj: np.ndarray) -> int | None:
    n = adj.shape[0]
    m = np.eye(n, dtype=np.int64)
    a = adj.astype(np.int64)
    for k in range(1, n * n - 2 * n + 3):
        m = m @ a
        if np.all(m > 0):
            return k
    return None


def markov_certificate(iv: Intervals, coverings, n_traces: int = 8) -> ChaosCertificate:
    bad = [c for c in coverings if not c.ok]
    if bad:
        raise CertificationError(f"covering failed: {bad[0].name} "
                                 f"(free margin {bad[0].free_margin:.3g})", bad[0].name)
    n = len(iv.intervals)
    adj = np.zeros((n, n), dtype=np.int64)
    for c in coverings:
        for t in c.targets:
            adj[c.source, t] = 1
    rho = spectral_radius(adj.astype(float))
    traces = tuple(int(np.trace(np.linalg.matrix_power(adj, k))) for k in range(1, n_traces + 1))
    return ChaosCertificate(intervals=iv, coverings=tuple(coverings), adjacency=adj,
                            transitive_power=transitive_power(adj), spectral_radius=rho,
                            entropy_lower=math.log(rho) if rho > 0 else -math.inf,
                            orbit_counts=traces)


def closed_words(adj: np.ndarray, n: int) -> list[tuple[int, ...]]:
    k = adj.shape[0]
    return [w for w in itertools.product(range(k), repeat=n)
            if all(adj[w[i], w[(i + 1) % n]] for i in range(n))]


def _words_of(orbit, ivs, tol=1e-9):
    choices = []
    for x in orbit:
        hit = [i for i, (lo, hi) in enumerate(ivs) if lo - tol <= x <= hi + tol]
        if not hit:
            return []
        choices.append(hit)
    return list(itertools.product(*choices))


def divisor_sieve(fixed_counts: dict[int, int]) -> dict[int, int]:
    """Points of least period n from counts of fixed points of R^n."""
    least = {}
    for n in sorted(fixed_counts):
        least[n] = fixed_counts[n] - sum(least[d] for d in least if d < n and n % d == 0)
    return least


def locate_periodic_orbits(problem: NormalizedProblem, cert: ChaosCertificate,
                           max_period: int = 3, n_grid: int = 1500, **kw):
    """Fixed points of R^n on K with their symbol words; returns (located, census)."""
    ivs = cert.intervals.intervals
    located = []
    census = []
    fixed_counts = {}
    for n in range(1, max_period + 1):
        roots = fixed_points(problem, n, n_grid=n_grid, **kw)
        fixed_counts[n] = len(roots)
        realized = {}
        for r in roots:
            words = [w for w in _words_of(r.orbit[:-1], ivs)
                     if all(cert.adjacency[w[i], w[(i + 1) % n]] for i in range(n))]
            located.append({"period": n, "p": r.p, "orbit": list(r.orbit[:-1]),
                            "multiplier": r.multiplier, "residual": r.residual,
                            "words": ["".join(str(s + 1) for s in w) for w in words]})
            for w in words:
                realized.setdefault(w, r.p)
        words = closed_words(cert.adjacency, n)
        census.append({"n": n, "trace": int(np.trace(np.linalg.matrix_power(cert.adjacency, n))),
                       "fixed_points": len(roots),
                       "fixed_points_in_J": sum(1 for r in roots if _words_of(r.orbit[:-1], ivs)),
                       "words_realized": len(realized),
                       "unresolved_words": ["".join(str(s + 1) for s in w)
                                            for w in words if w not in realized]})
    least = divisor_sieve(fixed_counts)
    for c in census:
        c["least_period_points"] = least[c["n"]]
        c["orbits"] = least[c["n"]] // c["n"]
    return tuple(located), tuple(census)


def certify(problem: NormalizedProblem, max_period: int = 3, n_grid: int = GRID,
            census_grid: int = 1500, threshold: float = MARGIN_THRESHOLD, **kw) -> ChaosCertificate:
    iv = build_intervals(problem, n_grid=n_grid, **kw)
    cov = verify_coverings(problem, iv, n_grid=n_grid, threshold=threshold, **kw)
    cert = markov_certificate(iv, cov)
    located, census = locate_periodic_orbits(problem, cert, max_period, census_grid, **kw)
    return ChaosCertificate(intervals=iv, coverings=cert.coverings, adjacency=cert.adjacency,
                            transitive_power=cert.transitive_power,
                            spectral_radius=cert.spectral_radius,
                            entropy_lower=cert.entropy_lower, orbit_counts=cert.orbit_counts,
                            located_orbits=located, census=census)


def orbit_cycles(problem: NormalizedProblem, p: float, period: int, cycles: int = 2,
                 dt=None) -> float:
    """Max deviation between qualified-max values k and k + period along one integration."""
    from .return_map import run_from

    _, traj = run_from(problem, p, dt=dt, periods=4.0 * (period * cycles + 1),
                       max_events=period * cycles)
    vals = [p] + [e.value for e in traj.events]
    return max(abs(vals[k + period] - vals[k]) for k in range(len(vals) - period))
