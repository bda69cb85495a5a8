"""Planar needle variations (n = 2) and the small-scale law of the increment.

Geometry for centre tau, unit directions (xi, eta), scale sigma and
amplitude A, with eta_perp = eta rotated by +90 degrees::

    E = tau
    A_pt, B_pt = E +- sqrt(sigma) eta_perp        |A_pt B_pt| = 2 sqrt(sigma)
    O = E + (sqrt(7)/3) sigma eta                  |OE| = (sqrt(7)/3) sigma
    C_pt = O + sigma**(1/4) eta
    apex value dx(O) = A sigma xi

The variation is piecewise linear on the triangles (A_pt, O, B_pt) (the main
face) and (A_pt, O, C_pt), (B_pt, O, C_pt) (the minor faces), vanishing on
the boundary of the support triangle. The main-face slope is
A (3/sqrt(7)) xi eta^T.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import calculus
from .errors import ArityError, ConfigError, DomainViolation, NumericalError

SQRT7_3 = math.sqrt(7) / 3
MAIN_SLOPE = 3 / math.sqrt(7)
FACE_MEASURE_COEFF = 4 / 3

# Dunavant degree-5 rule on the reference triangle: barycentric points, weights summing to 1
_A1, _B1, _W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_A2, _B2, _W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]), np.full(3, 1 / 3)),
    5: (np.array([[1 / 3, 1 / 3, 1 / 3],
                  [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
                  [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2]]),
        np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])),
}


def _cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def triangle_area(P, Q, R):
    return 0.5 * abs(_cross(Q - P, R - P))


@dataclass(frozen=True, eq=False)
class NeedleGeometry:
    tau: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    sigma: float
    amplitude: float

    @property
    def eta_perp(self):
        return np.array([-self.eta[1], self.eta[0]])

    @property
    def E(self):
        return self.tau.copy()

    @property
    def A_pt(self):
        return self.tau + math.sqrt(self.sigma) * self.eta_perp

    @property
    def B_pt(self):
        return self.tau - math.sqrt(self.sigma) * self.eta_perp

    @property
    def O(self):
        return self.tau + SQRT7_3 * self.sigma * self.eta

    @property
    def C_pt(self):
        return self.O + self.sigma ** 0.25 * self.eta

    @property
    def apex_height(self):
        return self.amplitude * self.sigma

    @property
    def apex_value(self):
        return self.apex_height * self.xi

    @property
    def main_area(self):
        """Planar area of (A_pt, O, B_pt): (sqrt(7)/3) sigma^(3/2)."""
        return triangle_area(self.A_pt, self.O, self.B_pt)

    @property
    def apex_to_edge(self):
        """|O_1 E|: distance in (t, x) space from the apex to the midpoint of A_pt B_pt."""
        return math.hypot(float(np.linalg.norm(self.O - self.E)), self.apex_height * float(np.linalg.norm(self.xi)))

    @property
    def main_face_measure(self):
        """v = |O_1 E| |A_pt E|, the area of the lifted main face; (4/3) sigma^(3/2) at A = 1."""
        return self.apex_to_edge * float(np.linalg.norm(self.A_pt - self.E))

    def triangles(self):
        """(name, P, Q) for each face (P, O, Q); the apex O is shared."""
        return (("main", self.A_pt, self.B_pt),
                ("minor_a", self.A_pt, self.C_pt),
                ("minor_b", self.B_pt, self.C_pt))

    def to_dict(self):
        return {"tau": self.tau.tolist(), "xi": self.xi.tolist(), "eta": self.eta.tolist(),
                "sigma": self.sigma, "amplitude": self.amplitude,
                "A": self.A_pt.tolist(), "B": self.B_pt.tolist(), "C": self.C_pt.tolist(),
                "O": self.O.tolist(), "main_area": self.main_area,
                "main_face_measure": self.main_face_measure,
                "main_slope_constant": MAIN_SLOPE}


@dataclass(frozen=True, eq=False)
class NeedleVariation:
    geometry: NeedleGeometry
    slopes: dict = field(default_factory=dict)  # face name -> (nu, 2) constant slope

    def _bary_O(self, P, Q, t):
        O = self.geometry.O
        return _cross(Q - P, t - P) / _cross(Q - P, O - P)

    def face_of(self, t, tol=1e-12):
        t = np.asarray(t, dtype=float)
        O = self.geometry.O
        for name, P, Q in self.geometry.triangles():
            d = _cross(Q - P, O - P)
            l_o = _cross(Q - P, t - P) / d
            l_q = _cross(O - P, t - P) / -d
            l_p = 1.0 - l_o - l_q
            if min(l_o, l_p, l_q) >= -tol:
                return name, l_o
        return None, 0.0

    def value(self, t):
        name, l_o = self.face_of(t)
        if name is None:
            return np.zeros_like(self.geometry.xi)
        return self.geometry.apex_value * l_o

    def slope(self, t):
        name, _ = self.face_of(t)
        if name is None:
            return np.zeros((self.geometry.xi.size, 2))
        return self.slopes[name].copy()

    def minor_slope_norm(self):
        return max(float(np.linalg.norm(self.slopes[k])) for k in ("minor_a", "minor_b"))


def build_needle(tau, xi, eta, sigma, amplitude=1.0, domain=None):
    """Needle variation centred at ``tau``; checks the support against ``domain``."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (2,):
        raise ArityError("needle variations are built for n = 2 only")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ConfigError(f"sigma must be positive, got {sigma}")
    if not (amplitude >= 0 and math.isfinite(amplitude)):
        raise ConfigError(f"amplitude must be finite and >= 0, got {amplitude}")
    xi = np.asarray(xi, dtype=float).reshape(-1)
    eta = np.asarray(eta, dtype=float).reshape(-1)
    for name, v in (("xi", xi), ("eta", eta)):
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
            raise ConfigError(f"{name} must be a unit vector")
    if eta.shape != (2,):
        raise ArityError("eta must lie in R^2")
    geom = NeedleGeometry(tau, xi, eta, float(sigma), float(amplitude))
    if domain is not None:
        for label, p in (("A", geom.A_pt), ("B", geom.B_pt), ("C", geom.C_pt)):
            if not domain.contains(p):
                raise DomainViolation(f"needle support vertex {label}={p.tolist()} leaves the domain (sigma={sigma})")
    O = geom.O
    slopes = {}
    for name, P, Q in geom.triangles():
        d = _cross(Q - P, O - P)
        grad_l = np.array([-(Q - P)[1], (Q - P)[0]]) / d
        slopes[name] = np.outer(geom.apex_value, grad_l)
    return NeedleVariation(geom, slopes)


@dataclass(frozen=True)
class TriangleQuadrature:
    degree: int = 5
    level: int = 0  # uniform subdivision into 4**level triangles

    def __post_init__(self):
        if self.degree not in _RULES:
            raise ConfigError(f"triangle rule degree must be one of {sorted(_RULES)}")
        if self.level < 0:
            raise ConfigError("subdivision level must be >= 0")


def _subdivide(tri, level):
    tris = [tri]
    for _ in range(level):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            nxt.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
        tris = nxt
    return tris


def _delta(instance, needle, quadrature):
    L, cand = instance.lagrangian, instance.candidate
    if L.n != 2:
        raise ArityError("needle variations need n = 2")
    if needle.geometry.xi.size != L.nu:
        raise ArityError(f"xi has {needle.geometry.xi.size} components, problem has nu={L.nu}")
    geom = needle.geometry
    for p in (geom.A_pt, geom.B_pt, geom.C_pt):
        if not instance.domain.contains(p):
            raise DomainViolation(f"needle support vertex {p.tolist()} leaves the domain")
    quadrature = quadrature or TriangleQuadrature()
    bary, weights = _RULES[quadrature.degree]
    O = geom.O
    total, scale = 0.0, 0.0
    for name, P, Q in geom.triangles():
        g = needle.slopes[name]
        d = _cross(Q - P, O - P)
        for a, b, c in _subdivide((P, O, Q), quadrature.level):
            area = triangle_area(a, b, c)
            for lam, w in zip(bary, weights):
                t = lam[0] * a + lam[1] * b + lam[2] * c
                dx = geom.apex_value * (_cross(Q - P, t - P) / d)
                x, z = cand.value(t), cand.slope(t)
                try:
                    f_var = L(t, x + dx, z + g)
                    f_ref = L(t, x, z)
                except NumericalError as exc:
                    raise NumericalError(f"increment evaluation failed on face {name} at t={t.tolist()}: {exc}") from exc
                total += area * w * (f_var - f_ref)
                scale += area * w * (abs(f_var) + abs(f_ref))
    return total, scale


def delta_functional(instance, needle, quadrature=None):
    """F(x_hat + dx) - F(x_hat) over the needle support, face by face."""
    if needle.geometry.amplitude == 0.0:
        return 0.0
    return _delta(instance, needle, quadrature)[0]


@dataclass
class SweepResult:
    status: str  # "OK" or "INCONCLUSIVE"
    exponent_p: float | None
    coefficient_C: float | None
    coefficient_C_32: float | None  # |dF| / sigma^(3/2) at the smallest sigma
    predicted_C: float
    projected_C: float
    excess: float
    sign_dF: int
    sign_E: int
    rows: list  # (sigma, dF, log-fit residual or None)
    minor_slopes: list = field(default_factory=list)
    note: str = ""

    @property
    def sign_match(self):
        return self.sign_dF == self.sign_E

    def to_dict(self):
        return {"status": self.status, "p": self.exponent_p, "C": self.coefficient_C,
                "C_at_three_halves": self.coefficient_C_32,
                "predicted_C": self.predicted_C, "projected_C": self.projected_C,
                "excess": self.excess, "sign": self.sign_dF, "sign_excess": self.sign_E,
                "sign_match": self.sign_match, "note": self.note,
                "main_slope_constant": MAIN_SLOPE, "offset_constant": SQRT7_3}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "delta_F", "fit_residual"])
        for s, dF, res in self.rows:
            w.writerow([repr(s), repr(dF), "" if res is None else repr(res)])
        return buf.getvalue()


def _sign(v):
    return int(np.sign(v))


def asymptotic_sweep(instance, tau, xi, eta, amplitude, sigmas, quadrature=None, noise_factor=1e3):
    """Tabulate dF(sigma) for a family of needles and fit |dF| ~ C sigma^p.

    ``predicted_C`` is (4/3)|E| with E the excess of the main-face slope at
    tau; ``projected_C`` is (sqrt(7)/3)|E|, the coefficient implied by the
    planar area of the main face. A fit is only attempted when every |dF|
    clears ``noise_factor`` times its rounding-error estimate.
    """
    sigmas = [float(s) for s in sigmas]
    if len(sigmas) < 4:
        raise ConfigError("asymptotic sweep needs at least 4 sigma values")
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise ConfigError("sigma values must be strictly decreasing")
    tau = np.asarray(tau, dtype=float)
    L, cand = instance.lagrangian, instance.candidate
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    h_main = amplitude * MAIN_SLOPE * np.outer(xi, eta)
    E = calculus.weierstrass_excess(L, tau, cand.value(tau), cand.slope(tau), h_main)

    values, minor = [], []
    noisy = False
    for s in sigmas:
        needle = build_needle(tau, xi, eta, s, amplitude, instance.domain)
        if amplitude == 0.0:
            dF, scale = 0.0, 0.0
        else:
            dF, scale = _delta(instance, needle, quadrature)
        if not abs(dF) > noise_factor * np.finfo(float).eps * max(scale, np.finfo(float).tiny):
            noisy = True
        values.append(float(dF))
        minor.append(needle.minor_slope_norm())

    base = dict(predicted_C=FACE_MEASURE_COEFF * abs(E), projected_C=SQRT7_3 * abs(E),
                excess=float(E), sign_dF=_sign(values[-1]), sign_E=_sign(E), minor_slopes=minor)
    if noisy:
        return SweepResult("INCONCLUSIVE", None, None, None, rows=[(s, v, None) for s, v in zip(sigmas, values)],
                           note="increment below the rounding-noise floor; no exponent fitted", **base)
    logs, logv = np.log(sigmas), np.log(np.abs(values))
    p, c0 = np.polyfit(logs, logv, 1)
    resid = logv - (p * logs + c0)
    C = abs(values[-1]) / sigmas[-1] ** p
    C32 = abs(values[-1]) / sigmas[-1] ** 1.5
    return SweepResult("OK", float(p), float(C), float(C32),
                       rows=[(s, v, float(r)) for s, v, r in zip(sigmas, values, resid)], **base)
