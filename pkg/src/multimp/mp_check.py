"""Pointwise check of the rank-one maximum principle along a candidate.

At an interior point t with slope zhat = Dx_hat/Dt the principle says that
H(zhat + h) <= H(zhat) (q = f_z(zhat)) for every rank-one h, i.e. that the
excess E(r xi eta^T) is nonnegative. The search minimises E over unit xi,
eta (hyperspherical angles, multistart coordinate descent) on a log-spaced
amplitude ladder in (0, r_max].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import calculus, rank_one
from .errors import ConfigError, DomainViolation, NumericalError
from .rank_one import RankOneDirection

SATISFIED = "SATISFIED"
VIOLATED = "VIOLATED"
INCONCLUSIVE = "INCONCLUSIVE"

DEFAULT_R_MAX = 32.0
DEFAULT_TOL = 1e-7
_TWO_PI = 2 * math.pi


def unit_from_angles(angles, d, sign=1.0):
    """Hyperspherical angles -> unit vector in R^d (d = 1 uses ``sign``)."""
    if d == 1:
        return np.array([sign])
    out = np.empty(d)
    s = 1.0
    for k in range(d - 1):
        out[k] = s * math.cos(angles[k])
        s *= math.sin(angles[k])
    out[d - 1] = s
    return out


def angles_from_unit(v):
    v = np.asarray(v, dtype=float)
    d = v.size
    angles = np.empty(max(d - 1, 0))
    for k in range(d - 1):
        angles[k] = math.atan2(float(np.linalg.norm(v[k + 1:])), v[k])
    if d >= 2:
        angles[d - 2] = math.atan2(v[d - 1], v[d - 2])
    return angles


@dataclass
class PointRecord:
    t: np.ndarray
    slope: np.ndarray
    min_excess: float
    best: RankOneDirection
    witness: RankOneDirection | None
    lh_min: float
    ladder: list
    unbounded_suspected: bool

    def to_dict(self):
        return {
            "t": self.t.tolist(),
            "slope": self.slope.tolist(),
            "min_excess": self.min_excess,
            "best_direction": self.best.to_dict(),
            "witness": None if self.witness is None else self.witness.to_dict(),
            "lh_min": self.lh_min,
            "ladder": [[r, m] for r, m in self.ladder],
            "unbounded_suspected": self.unbounded_suspected,
        }


@dataclass
class MPReport:
    verdict: str
    points: list
    options: dict = field(default_factory=dict)

    @property
    def worst(self):
        return min(self.points, key=lambda p: p.min_excess)

    @property
    def min_excess(self):
        return self.worst.min_excess

    @property
    def witness(self):
        return self.worst.witness

    @property
    def unbounded_suspected(self):
        return any(p.unbounded_suspected for p in self.points)

    def to_dict(self):
        worst = self.worst
        return {
            "verdict": self.verdict,
            "min_excess": worst.min_excess,
            "min_point": worst.t.tolist(),
            "witness": None if worst.witness is None else worst.witness.to_dict(),
            "unbounded_suspected": self.unbounded_suspected,
            "search": dict(self.options),
            "points": [p.to_dict() for p in self.points],
        }


class _Search:
    """Multistart coordinate descent of E(r xi eta^T) over the angles of (xi, eta)."""

    def __init__(self, excess, nu, n, scan=12, sweeps=4):
        self.excess = excess
        self.nu, self.n = nu, n
        self.k_xi = max(nu - 1, 0)
        self.scan = scan
        self.sweeps = sweeps

    def direction(self, state):
        sign, theta = state
        xi = unit_from_angles(theta[:self.k_xi], self.nu, sign)
        eta = unit_from_angles(theta[self.k_xi:], self.n)
        return xi, eta

    def value(self, r, state):
        xi, eta = self.direction(state)
        return self.excess(r * np.outer(xi, eta))

    def descend(self, r, state):
        sign, theta = state[0], np.array(state[1], dtype=float)
        best = self.value(r, (sign, theta))
        if theta.size == 0:
            return best, (sign, theta)
        width = _TWO_PI / self.scan
        for sweep in range(self.sweeps):
            before = best
            for k in range(theta.size):
                def obj(a, k=k):
                    trial = theta.copy()
                    trial[k] = a
                    return self.value(r, (sign, trial))
                if sweep == 0:
                    grid = theta[k] + width * np.arange(1, self.scan)
                    vals = [obj(a) for a in grid]
                    j = int(np.argmin(vals))
                    if vals[j] < best:
                        best, theta[k] = vals[j], grid[j]
                half = width if sweep == 0 else width / 4
                res = minimize_scalar(obj, bounds=(theta[k] - half, theta[k] + half),
                                      method="bounded", options={"xatol": 1e-12})
                if res.fun < best:
                    best, theta[k] = float(res.fun), float(res.x)
            if before - best <= 1e-15 * (1.0 + abs(best)):
                break
        return best, (sign, theta)

    def starts(self, count, seed):
        rng = np.random.default_rng(seed)
        out = []
        for a in range(self.nu):
            for s in (1.0, -1.0):
                for i in range(self.n):
                    xi = s * np.eye(self.nu)[a]
                    eta = np.eye(self.n)[i]
                    out.append(self._state(xi, eta))
        for _ in range(count):
            out.append(self._state(rng.standard_normal(self.nu), rng.standard_normal(self.n)))
        return out

    def _state(self, xi, eta):
        xi = xi / np.linalg.norm(xi)
        eta = eta / np.linalg.norm(eta)
        sign = 1.0 if self.nu > 1 else float(np.sign(xi[0]) or 1.0)
        return sign, np.concatenate([angles_from_unit(xi), angles_from_unit(eta)])


def amplitude_ladder(r_max, r_steps, r_min_ratio=1e-4):
    if not (r_max > 0 and math.isfinite(r_max)):
        raise ConfigError(f"r_max must be positive, got {r_max}")
    if r_steps < 1:
        raise ConfigError(f"r_steps must be >= 1, got {r_steps}")
    if r_steps == 1:
        return np.array([float(r_max)])
    return np.geomspace(r_max * r_min_ratio, r_max, int(r_steps))


def _decreasing_at_top(ladder, tol):
    m = [v for _, v in ladder]
    if len(m) < 3 or m[-1] >= -tol:
        return False
    return m[-1] < m[-2] < m[-3]


def search_point(instance, t, ladder, starts=8, seed=0, tol=DEFAULT_TOL):
    """Minimise the excess at one point; returns a :class:`PointRecord`."""
    L, cand = instance.lagrangian, instance.candidate
    t = np.asarray(t, dtype=float)
    x, zhat = cand.value(t), cand.slope(t)
    try:
        excess = calculus.Excess(L, t, x, zhat)
        lh = rank_one.lh_minimize(rank_one.from_hessian(L, t, x, zhat), seed=seed).min_value
        search = _Search(excess, L.nu, L.n)
        initial = search.starts(starts, seed)
        per_rung = []
        best = (math.inf, None, None)
        for r in ladder:
            rung_best = (math.inf, None)
            for s0 in initial:
                v, s = search.descend(r, s0)
                if v < rung_best[0]:
                    rung_best = (v, s)
            per_rung.append((float(r), float(rung_best[0])))
            if rung_best[0] < best[0]:
                best = (rung_best[0], float(r), rung_best[1])
        best = _polish_r(search, ladder, best)
    except NumericalError as exc:
        raise NumericalError(f"excess search failed at t={t.tolist()}: {exc}") from exc

    value, r, state = best
    xi, eta = search.direction(state)
    direction = RankOneDirection(xi, eta, r)
    recheck = calculus.weierstrass_excess(L, t, x, zhat, direction.matrix())
    if abs(recheck - value) > 1e-10 * max(1.0, abs(value)):
        raise NumericalError(f"witness re-evaluation mismatch at t={t.tolist()}: {value} vs {recheck}")
    return PointRecord(
        t=t, slope=zhat, min_excess=float(recheck), best=direction,
        witness=direction if recheck < -tol else None,
        lh_min=float(lh), ladder=per_rung,
        unbounded_suspected=_decreasing_at_top(per_rung, tol),
    )


def _polish_r(search, ladder, best):
    value, r, state = best
    k = int(np.searchsorted(ladder, r))
    lo = ladder[k - 1] if k > 0 else ladder[0]
    hi = ladder[k + 1] if k + 1 < len(ladder) else ladder[-1]
    if hi <= lo:
        return best
    res = minimize_scalar(lambda s: search.value(s, state), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12 * max(1.0, hi)})
    if res.fun < value:
        v2, s2 = search.descend(float(res.x), state)
        return (v2, float(res.x), s2) if v2 < res.fun else (float(res.fun), float(res.x), state)
    return best


def check_rank_one_mp(instance, points=None, r_max=DEFAULT_R_MAX, r_steps=16, starts=8,
                      tol=DEFAULT_TOL, seed=0, r_min_ratio=1e-4):
    """Verify the rank-one maximum principle at ``points`` (default: 5^n interior grid).

    VIOLATED if some point has min excess < -tol; SATISFIED if every sampled
    minimum is >= -tol and the Legendre-Hadamard screen of f_zz passes;
    INCONCLUSIVE otherwise.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    ladder = amplitude_ladder(r_max, r_steps, r_min_ratio)
    domain = instance.domain
    if points is None:
        points = domain.interior_points(5)
    points = [np.asarray(p, dtype=float) for p in points]
    for p in points:
        if not domain.contains(p):
            raise DomainViolation(f"point {p.tolist()} is outside the {domain.kind} domain")
    records = [search_point(instance, p, ladder, starts, seed, tol) for p in points]
    if any(rec.min_excess < -tol for rec in records):
        verdict = VIOLATED
    elif all(rec.lh_min >= -tol for rec in records):
        verdict = SATISFIED
    else:
        verdict = INCONCLUSIVE
    options = {
        "r_max": float(r_max), "r_min": float(ladder[0]), "r_steps": int(r_steps),
        "starts": int(starts), "seed": int(seed), "tol": float(tol),
        "ladder": [float(r) for r in ladder],
        "amplitude_convention": "h = r * xi eta^T with unit xi, eta; r searched on the ladder",
    }
    return MPReport(verdict, records, options)


@dataclass
class Landscape:
    t: np.ndarray
    rows: list  # (r, xi_angle, eta_angle, E)

    HEADER = ("r", "xi_angle", "eta_angle", "excess")

    def to_dict(self):
        values = [row[3] for row in self.rows]
        return {"t": self.t.tolist(), "rows": len(self.rows),
                "min_excess": min(values), "max_excess": max(values)}


def excess_landscape(instance, t, r_values, resolution):
    """Tabulate E(r xi eta^T) with xi = (cos a, sin a), eta = (cos b, sin b).

    Angles are ``2 pi k / resolution``; rows are ordered r-major, then xi
    angle, then eta angle.
    """
    if (instance.n, instance.nu) != (2, 2):
        raise ConfigError("excess landscape needs n = nu = 2")
    if resolution < 1:
        raise ConfigError(f"resolution must be >= 1, got {resolution}")
    t = np.asarray(t, dtype=float)
    L, cand = instance.lagrangian, instance.candidate
    excess = calculus.Excess(L, t, cand.value(t), cand.slope(t))
    angles = _TWO_PI * np.arange(resolution) / resolution
    rows = []
    for r in r_values:
        for a in angles:
            xi = np.array([math.cos(a), math.sin(a)])
            for b in angles:
                eta = np.array([math.cos(b), math.sin(b)])
                rows.append((float(r), float(a), float(b), excess(float(r) * np.outer(xi, eta))))
    return Landscape(t, rows)
