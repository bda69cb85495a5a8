"""Problem instances: Lagrangian, candidate extremal and domain.

Conventions used throughout the package:

* ``t`` is a point of the domain, shape ``(n,)``;
* ``x`` is a value of the unknown field, shape ``(nu,)``;
* ``z`` is a slope matrix, shape ``(nu, n)`` with ``z[a, i] = dx^a/dt^i``.

For the 2x2 examples the flat labels are ``z1 = z[0, 0]``, ``z2 = z[0, 1]``,
``z3 = z[1, 0]``, ``z4 = z[1, 1]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import expr as _expr
from .errors import ArityError, DomainViolation, EvaluationError, NumericalError, ProblemError

_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box in R^n or a disc in R^2.

    ``resolution`` is the default per-axis grid size; for a disc it is
    ``(radial, angular)``.
    """

    kind: str
    bounds: tuple = ()
    center: tuple = ()
    radius: float = 0.0
    resolution: tuple = ()

    def __post_init__(self):
        if self.kind == "box":
            if not self.bounds:
                raise ProblemError("box domain needs bounds")
            for lo, hi in self.bounds:
                if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                    raise ProblemError(f"box bounds must satisfy lo < hi, got ({lo}, {hi})")
        elif self.kind == "disc":
            if len(self.center) != 2:
                raise ProblemError("disc domains are two-dimensional")
            if not (math.isfinite(self.radius) and self.radius > 0):
                raise ProblemError(f"disc radius must be positive, got {self.radius}")
        else:
            raise ProblemError(f"unknown domain kind {self.kind!r}")
        if len(self.resolution) != self.n or any(int(r) < 2 for r in self.resolution):
            raise ProblemError(f"resolution must have {self.n} entries, each >= 2; got {self.resolution}")

    @classmethod
    def box(cls, bounds, resolution=16):
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if np.ndim(resolution) == 0:
            resolution = (resolution,) * len(bounds)
        return cls("box", bounds=bounds, resolution=tuple(int(r) for r in resolution))

    @classmethod
    def disc(cls, center=(0.0, 0.0), radius=1.0, resolution=(16, 32)):
        if np.ndim(resolution) == 0:
            resolution = (resolution, 2 * resolution)
        return cls("disc", center=tuple(float(c) for c in center), radius=float(radius),
                   resolution=tuple(int(r) for r in resolution))

    @property
    def n(self):
        return len(self.bounds) if self.kind == "box" else 2

    def bounding_box(self):
        if self.kind == "box":
            return self.bounds
        return tuple((c - self.radius, c + self.radius) for c in self.center)

    def contains(self, t, strict=False):
        t = np.asarray(t, dtype=float)
        if t.shape != (self.n,):
            return False
        if self.kind == "box":
            lo = np.array([b[0] for b in self.bounds])
            hi = np.array([b[1] for b in self.bounds])
            scale = max(1.0, float(np.max(np.abs(hi - lo))))
            tol = -_BOUNDARY_TOL * scale if strict else _BOUNDARY_TOL * scale
            return bool(np.all(t >= lo - tol) and np.all(t <= hi + tol))
        d = float(np.linalg.norm(t - np.asarray(self.center)))
        if strict:
            return d < self.radius * (1 - _BOUNDARY_TOL)
        return d <= self.radius * (1 + _BOUNDARY_TOL)

    def on_boundary(self, t):
        return self.contains(t) and not self.contains(t, strict=True)

    def interior_points(self, per_axis=5):
        """Coarse grid of strictly interior points, ``per_axis**n`` before clipping to the domain."""
        axes = [lo + (hi - lo) * np.arange(1, per_axis + 1) / (per_axis + 1)
                for lo, hi in self.bounding_box()]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        return [p for p in mesh if self.contains(p, strict=True)]

    def center_point(self):
        if self.kind == "disc":
            return np.asarray(self.center, dtype=float)
        return np.array([(lo + hi) / 2 for lo, hi in self.bounds])

    def to_dict(self):
        if self.kind == "box":
            return {"kind": "box", "bounds": [list(b) for b in self.bounds],
                    "resolution": list(self.resolution)}
        return {"kind": "disc", "center": list(self.center), "radius": self.radius,
                "resolution": list(self.resolution)}

    @classmethod
    def from_dict(cls, spec):
        try:
            kind = spec["kind"]
            if kind == "box":
                return cls.box(spec["bounds"], spec.get("resolution", 16))
            if kind == "disc":
                return cls.disc(spec.get("center", (0.0, 0.0)), spec.get("radius", 1.0),
                                spec.get("resolution", (16, 32)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemError(f"malformed domain definition: {exc}") from exc
        raise ProblemError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True)
class Lagrangian:
    """Integrand ``f(t, x, z)`` with optional analytic derivative oracles.

    ``grad_x`` returns shape ``(nu,)``, ``grad_z`` shape ``(nu, n)`` and
    ``hess_zz`` shape ``(nu, n, nu, n)``.
    """

    n: int
    nu: int
    f: Callable
    grad_x: Callable | None = None
    grad_z: Callable | None = None
    hess_zz: Callable | None = None
    name: str = ""
    smooth: bool = True

    def __call__(self, t, x, z):
        value = float(self.f(t, x, z))
        if not math.isfinite(value):
            raise EvaluationError(f"non-finite Lagrangian value {value}", where=_where(t, x, z))
        return value

    def __add__(self, other):
        if (self.n, self.nu) != (other.n, other.nu):
            raise ArityError("cannot add Lagrangians of different arity")

        def both(g, h):
            if g is None or h is None:
                return None
            return lambda t, x, z: np.asarray(g(t, x, z)) + np.asarray(h(t, x, z))

        return Lagrangian(
            self.n, self.nu,
            lambda t, x, z: self.f(t, x, z) + other.f(t, x, z),
            grad_x=both(self.grad_x, other.grad_x),
            grad_z=both(self.grad_z, other.grad_z),
            hess_zz=both(self.hess_zz, other.hess_zz),
            name=f"({self.name})+({other.name})",
        )

    @classmethod
    def from_expr(cls, source, n, nu, constants=None, name=None):
        e = _expr.parse(source, (n, nu), constants)
        return cls(n, nu, e, name=name or source)


def _where(t, x, z):
    return f"t={np.asarray(t).tolist()}, x={np.asarray(x).tolist()}, z={np.asarray(z).tolist()}"


@dataclass(frozen=True)
class CandidateField:
    """Candidate extremal ``t -> x_hat(t)`` with its slope ``t -> Dx_hat/Dt``."""

    x_hat: Callable
    domain: Domain
    nu: int
    grad_x_hat: Callable | None = None
    fd_step: float = 1e-6

    @property
    def n(self):
        return self.domain.n

    def value(self, t):
        v = np.asarray(self.x_hat(np.asarray(t, dtype=float)), dtype=float).reshape(self.nu)
        if not np.all(np.isfinite(v)):
            raise EvaluationError("non-finite candidate value", where=f"t={np.asarray(t).tolist()}")
        return v

    def slope(self, t):
        t = np.asarray(t, dtype=float)
        if self.grad_x_hat is not None:
            return np.asarray(self.grad_x_hat(t), dtype=float).reshape(self.nu, self.n)
        return self.fd_slope(t)

    def fd_slope(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty((self.nu, self.n))
        for i in range(self.n):
            h = self.fd_step * max(1.0, abs(t[i]))
            e = np.zeros(self.n)
            e[i] = h
            out[:, i] = (self.value(t + e) - self.value(t - e)) / (2 * h)
        return out

    def check_gradient(self, probes=20, seed=0, rtol=1e-6):
        """Max relative gap between the analytic slope and central differences."""
        rng = np.random.default_rng(seed)
        lo, hi = np.array(self.domain.bounding_box()).T
        worst = 0.0
        for _ in range(probes):
            t = lo + (hi - lo) * rng.random(self.n)
            a, b = self.slope(t), self.fd_slope(t)
            worst = max(worst, float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b))))))
        if worst > rtol:
            raise EvaluationError(f"candidate gradient disagrees with finite differences (rel. {worst:.3g})")
        return worst

    @classmethod
    def linear(cls, M, domain, offset=None):
        M = np.array(M, dtype=float)
        b = np.zeros(M.shape[0]) if offset is None else np.asarray(offset, dtype=float)
        return cls(lambda t: M @ t + b, domain, M.shape[0], grad_x_hat=lambda t: M.copy())


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    lagrangian: Lagrangian
    candidate: CandidateField
    params: Mapping = field(default_factory=dict)
    # qualitative statements documented for the worked example, compared in reports
    claims: Mapping = field(default_factory=dict)

    def __post_init__(self):
        L, c = self.lagrangian, self.candidate
        if (L.n, L.nu) != (c.n, c.nu):
            raise ArityError(f"Lagrangian arity (n={L.n}, nu={L.nu}) does not match candidate (n={c.n}, nu={c.nu})")

    @property
    def domain(self):
        return self.candidate.domain

    @property
    def n(self):
        return self.lagrangian.n

    @property
    def nu(self):
        return self.lagrangian.nu

    def boundary_data(self, t):
        """Boundary value y(t), stored as the trace of the candidate."""
        if not self.domain.on_boundary(t):
            raise DomainViolation(f"t={np.asarray(t).tolist()} is not on the domain boundary")
        return self.candidate.value(t)

    def with_lagrangian(self, lagrangian):
        return replace(self, lagrangian=lagrangian)

    def with_candidate(self, candidate):
        return replace(self, candidate=candidate)

    def describe(self):
        return {"name": self.name, "n": self.n, "nu": self.nu,
                "params": {k: self.params[k] for k in sorted(self.params)},
                "domain": self.domain.to_dict()}


# ----------------------------------------------------------------------------
# catalog


def _dirichlet_f(t, x, z):
    return 0.5 * float(np.sum(z * z))


def _zero_grad_x(nu):
    return lambda t, x, z: np.zeros(nu)


def dirichlet_lagrangian():
    return Lagrangian(
        2, 2, _dirichlet_f,
        grad_x=_zero_grad_x(2),
        grad_z=lambda t, x, z: np.array(z, dtype=float),
        hess_zz=lambda t, x, z: np.einsum("ac,ij->aicj", np.eye(2), np.eye(2)),
        name="dirichlet",
    )


def elasticity_lagrangian(a, b, c):
    """a(z1^2 + z4^2) + b(z2^2 + z3^2) + 2c det z."""

    def f(t, x, z):
        z1, z2, z3, z4 = z[0, 0], z[0, 1], z[1, 0], z[1, 1]
        return a * (z1 * z1 + z4 * z4) + b * (z2 * z2 + z3 * z3) + 2 * c * (z1 * z4 - z2 * z3)

    def grad_z(t, x, z):
        z1, z2, z3, z4 = z[0, 0], z[0, 1], z[1, 0], z[1, 1]
        return np.array([[2 * a * z1 + 2 * c * z4, 2 * b * z2 - 2 * c * z3],
                         [2 * b * z3 - 2 * c * z2, 2 * a * z4 + 2 * c * z1]])

    flat = 2 * np.array([[a, 0, 0, c],
                         [0, b, -c, 0],
                         [0, -c, b, 0],
                         [c, 0, 0, a]], dtype=float)
    hess = flat.reshape(2, 2, 2, 2)

    return Lagrangian(2, 2, f, grad_x=_zero_grad_x(2), grad_z=grad_z,
                      hess_zz=lambda t, x, z: hess.copy(), name="elasticity")


def cubic_lagrangian():
    """z1^3 + z4^3 with z1 = dx^1/dt^1 and z4 = dx^2/dt^2."""

    def f(t, x, z):
        return z[0, 0] ** 3 + z[1, 1] ** 3

    def grad_z(t, x, z):
        g = np.zeros((2, 2))
        g[0, 0] = 3 * z[0, 0] ** 2
        g[1, 1] = 3 * z[1, 1] ** 2
        return g

    def hess_zz(t, x, z):
        h = np.zeros((2, 2, 2, 2))
        h[0, 0, 0, 0] = 6 * z[0, 0]
        h[1, 1, 1, 1] = 6 * z[1, 1]
        return h

    return Lagrangian(2, 2, f, grad_x=_zero_grad_x(2), grad_z=grad_z, hess_zz=hess_zz, name="cubic")


_RESOLUTION_KEY = "resolution"
_M_KEYS = ("m11", "m12", "m21", "m22")


def _read_params(name, params, required=(), optional=()):
    allowed = set(required) | set(optional) | {_RESOLUTION_KEY}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ProblemError(f"unknown parameter(s) for {name!r}: {', '.join(unknown)}")
    missing = [k for k in required if k not in params]
    if missing:
        raise ProblemError(f"problem {name!r} requires parameter(s): {', '.join(missing)}")
    out = {}
    for k, v in params.items():
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise ProblemError(f"parameter {k!r} must be a number, got {v!r}") from None
        if not math.isfinite(v):
            raise ProblemError(f"parameter {k!r} must be finite")
        out[k] = v
    if _RESOLUTION_KEY in out:
        r = out[_RESOLUTION_KEY]
        if r < 2 or not r.is_integer():
            raise ProblemError(f"resolution must be an integer >= 2, got {r}")
    return out


def _linear_matrix(p):
    M = np.eye(2)
    for k in _M_KEYS:
        if k in p:
            M[int(k[1]) - 1, int(k[2]) - 1] = p[k]
    return M


def _build_dirichlet(params):
    p = _read_params("dirichlet", params, optional=_M_KEYS)
    res = int(p.get(_RESOLUTION_KEY, 16))
    domain = Domain.box([(0.0, 1.0), (0.0, 1.0)], res)
    return ProblemInstance("dirichlet", dirichlet_lagrangian(),
                           CandidateField.linear(_linear_matrix(p), domain), p,
                           claims={"lh_strictly_positive": True, "mp_satisfied": True})


def _build_elasticity(params):
    p = _read_params("elasticity", params, required=("a", "b", "c"), optional=_M_KEYS)
    res = int(p.get(_RESOLUTION_KEY, 16))
    domain = Domain.box([(0.0, 1.0), (0.0, 1.0)], res)
    a, b, c = p["a"], p["b"], p["c"]
    claims = {"lh_strictly_positive": bool(min(a, b) > 0)}
    if max(a, b) > c > min(a, b):
        claims["full_form_indefinite"] = True
    return ProblemInstance("elasticity", elasticity_lagrangian(a, b, c),
                           CandidateField.linear(_linear_matrix(p), domain), p, claims=claims)


def _build_cubic(params):
    p = _read_params("cubic", params)
    res = int(p.get(_RESOLUTION_KEY, 16))
    domain = Domain.disc((0.0, 0.0), 1.0, (res, 2 * res))
    return ProblemInstance("cubic", cubic_lagrangian(),
                           CandidateField.linear(np.eye(2), domain), p,
                           claims={"lh_strictly_positive": True, "mp_satisfied": False})


_CATALOG = {
    "dirichlet": (_build_dirichlet, "f = (1/2)|z|^2 on the unit square, linear candidate x = M t (default identity)"),
    "elasticity": (_build_elasticity, "f = a(z1^2+z4^2) + b(z2^2+z3^2) + 2c det z on the unit square; params a, b, c; candidate x = M t"),
    "cubic": (_build_cubic, "f = z1^3 + z4^3 on the unit disc, candidate x = (t1, t2) with boundary data (cos phi, sin phi)"),
}


def catalog_names():
    return tuple(_CATALOG)


def catalog_description(name):
    return _CATALOG[name][1]


def catalog_get(name: str, params: Mapping | None = None) -> ProblemInstance:
    if name not in _CATALOG:
        raise ProblemError(f"unknown problem {name!r}; choose from {', '.join(_CATALOG)}")
    return _CATALOG[name][0](dict(params or {}))


# ----------------------------------------------------------------------------
# problem definition files


def load_problem(source) -> ProblemInstance:
    """Build an instance from a JSON definition (path, JSON text or dict).

    Schema: ``{"n", "nu", "f", "candidate": [...], "domain": {...}, "params": {...}}``.
    Parameter names may be used as constants in every expression.
    """
    if isinstance(source, Mapping):
        spec = dict(source)
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            try:
                text = Path(source).read_text()
            except OSError as exc:
                raise ProblemError(f"cannot read problem file {source}: {exc}") from exc
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"problem file is not valid JSON: {exc}") from exc
    try:
        n, nu = int(spec["n"]), int(spec["nu"])
        f_src = spec["f"]
        cand_src = list(spec["candidate"])
        domain = Domain.from_dict(spec["domain"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemError(f"problem file is missing or has malformed field: {exc}") from exc
    params = _read_params("problem file", spec.get("params", {}), optional=tuple(spec.get("params", {})))
    constants = {k: v for k, v in params.items() if k != _RESOLUTION_KEY}
    if domain.n != n:
        raise ArityError(f"domain dimension {domain.n} does not match n={n}")
    if len(cand_src) != nu:
        raise ArityError(f"candidate has {len(cand_src)} components, expected nu={nu}")
    lagrangian = Lagrangian.from_expr(f_src, n, nu, constants)
    parts = [_expr.parse(s, (n, nu), constants) for s in cand_src]
    for s, e in zip(cand_src, parts):
        if not e.depends_only_on_t():
            raise ProblemError(f"candidate component {s!r} may only depend on t")
    zero_x, zero_z = [0.0] * nu, [[0.0] * n for _ in range(nu)]
    candidate = CandidateField(lambda t: np.array([e(t, zero_x, zero_z) for e in parts]), domain, nu)
    return ProblemInstance(spec.get("name", "custom"), lagrangian, candidate, params)


# ----------------------------------------------------------------------------
# quadrature and the functional


@dataclass(frozen=True)
class QuadratureSpec:
    rule: str = "gauss"  # "gauss" | "midpoint"
    resolution: tuple | int | None = None  # None: use the domain default

    def __post_init__(self):
        if self.rule not in ("gauss", "midpoint"):
            raise ProblemError(f"unknown quadrature rule {self.rule!r}")


def _rule_1d(rule, m, lo, hi):
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(m)
        return lo + (hi - lo) * (x + 1) / 2, w * (hi - lo) / 2
    h = (hi - lo) / m
    return lo + h * (np.arange(m) + 0.5), np.full(m, h)


def quadrature_nodes(domain: Domain, spec: QuadratureSpec | None = None):
    """Nodes ``(N, n)`` and weights ``(N,)`` for integrating over ``domain``.

    Discs use a polar tensor rule (radial rule times periodic trapezoid in angle).
    """
    spec = spec or QuadratureSpec()
    res = domain.resolution if spec.resolution is None else spec.resolution
    if np.ndim(res) == 0:
        res = (int(res),) * domain.n if domain.kind == "box" else (int(res), 2 * int(res))
    res = tuple(int(r) for r in res)
    if len(res) != domain.n or min(res) < 1:
        raise ProblemError(f"quadrature resolution {res} invalid for {domain.kind} domain")
    if domain.kind == "box":
        rules = [_rule_1d(spec.rule, m, lo, hi) for m, (lo, hi) in zip(res, domain.bounds)]
        pts = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), -1).reshape(-1, domain.n)
        wts = np.ones(1)
        for _, w in rules:
            wts = np.multiply.outer(wts, w)
        return pts, wts.reshape(-1)
    r, wr = _rule_1d(spec.rule, res[0], 0.0, domain.radius)
    theta = 2 * np.pi * np.arange(res[1]) / res[1]
    wt = np.full(res[1], 2 * np.pi / res[1])
    R, TH = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack([domain.center[0] + R * np.cos(TH), domain.center[1] + R * np.sin(TH)], -1).reshape(-1, 2)
    wts = np.multiply.outer(wr * r, wt).reshape(-1)
    return pts, wts


def evaluate_functional(instance: ProblemInstance, field: CandidateField | None = None,
                        quadrature: QuadratureSpec | None = None) -> float:
    """Approximate the integral of ``f(t, x(t), Dx/Dt(t))`` over the domain."""
    field = instance.candidate if field is None else field
    L = instance.lagrangian
    if (field.n, field.nu) != (L.n, L.nu):
        raise ArityError(f"field arity (n={field.n}, nu={field.nu}) does not match Lagrangian (n={L.n}, nu={L.nu})")
    pts, wts = quadrature_nodes(instance.domain, quadrature)
    total = 0.0
    for t, w in zip(pts, wts):
        x, z = field.value(t), field.slope(t)
        try:
            v = L(t, x, z)
        except NumericalError as exc:
            raise EvaluationError(f"integrand evaluation failed ({exc})", where=f"quadrature node t={t.tolist()}") from exc
        total += w * v
    return float(total)
