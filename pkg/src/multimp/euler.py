"""Euler-Lagrange residuals and the conjugate-system identity on tensor grids.

The conjugate identity is checked in its product-rule form: with grid
derivatives of q and dx taken separately,

    sum_i d_i q^i_a dx^a + q^i_a d_i dx^a - f_x . dx  =  r_q . dx + q : r_v

where r_v is the residual of the variational equation
``d_i dx^a = (d phi^a_i / d x^b) dx^b`` and r_q the residual of the adjoint
``d_i q^i_a = f_x^a - q^j_b d phi^b_j / d x^a``. For exact solutions both
residuals, and hence the identity defect, vanish up to discretisation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import calculus
from .errors import ArityError, ConfigError, EvaluationError, NumericalError


@dataclass(frozen=True, eq=False)
class GridField:
    """Values on a uniform tensor grid.

    ``values`` has shape ``(*grid_shape, *value_shape)``; ``mask`` marks
    nodes that belong to the domain (all True for boxes).
    """

    axes: tuple
    values: np.ndarray
    mask: np.ndarray | None = None

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def spacing(self):
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def value_shape(self):
        return self.values.shape[len(self.axes):]

    def nodes(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), -1)

    @classmethod
    def sample(cls, bounds, resolution, fn):
        """Evaluate ``fn(t)`` on ``resolution`` nodes per axis of ``bounds``."""
        axes = tuple(np.linspace(lo, hi, resolution) for lo, hi in bounds)
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
        first = np.asarray(fn(grid.reshape(-1, len(axes))[0]), dtype=float)
        values = np.empty(grid.shape[:-1] + first.shape)
        for idx in np.ndindex(*grid.shape[:-1]):
            values[idx] = fn(grid[idx])
        return cls(axes, values)

    def same_grid(self, other):
        return self.shape == other.shape and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))

    def to_csv(self, name="value"):
        """CSV text: node coordinates then flattened values; NaN outside the domain."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = len(self.axes)
        comps = [f"{name}_{'_'.join(str(k + 1) for k in c)}" for c in np.ndindex(*self.value_shape)] or [name]
        w.writerow([f"t{k + 1}" for k in range(n)] + comps)
        nodes = self.nodes()
        for idx in np.ndindex(*self.shape):
            if self.mask is not None and not self.mask[idx]:
                continue
            vals = np.asarray(self.values[idx]).reshape(-1)
            w.writerow([repr(float(v)) for v in nodes[idx]] + [repr(float(v)) for v in vals])
        return buf.getvalue()


@dataclass(frozen=True)
class SlopeField:
    """phi^a_i(t, x), shape ``(nu, n)``, with optional ``dphi_dx`` of shape ``(nu, n, nu)``."""

    phi: Callable
    nu: int
    n: int
    dphi_dx: Callable | None = None
    fd_step: float = 1e-6

    def __call__(self, t, x):
        return np.asarray(self.phi(t, x), dtype=float).reshape(self.nu, self.n)

    def derivative(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.dphi_dx is not None:
            return np.asarray(self.dphi_dx(t, x), dtype=float).reshape(self.nu, self.n, self.nu)
        out = np.empty((self.nu, self.n, self.nu))
        for b in range(self.nu):
            h = self.fd_step * max(1.0, abs(x[b]))
            e = np.zeros(self.nu)
            e[b] = h
            out[:, :, b] = (self(t, x + e) - self(t, x - e)) / (2 * h)
        return out


@dataclass
class EulerResult:
    max_abs: float
    max_abs_all: float
    residual_field: GridField
    interior: np.ndarray

    def to_dict(self):
        return {"max_abs": self.max_abs, "max_abs_all": self.max_abs_all,
                "nodes": int(np.count_nonzero(self.residual_field.mask)),
                "interior_nodes": int(np.count_nonzero(self.interior))}


def _flux(instance, t):
    L, cand = instance.lagrangian, instance.candidate
    x, z = cand.value(t), cand.slope(t)
    return calculus.grad_z(L, t, x, z)


def euler_residual(instance, resolution=64, include_boundary=False):
    """R_a = sum_i d/dt^i [f_z^{a,i}] - f_x^a along the candidate.

    Nodes are ``resolution`` per axis of the domain's bounding box, kept if
    in the domain. The flux f_z is differenced at +-h with central stencils
    where both neighbours lie in the domain and second-order one-sided
    stencils otherwise. ``max_abs`` covers interior (all-central) nodes.
    """
    if resolution < 8:
        raise ConfigError(f"resolution must be >= 8, got {resolution}")
    domain, L = instance.domain, instance.lagrangian
    n, nu = L.n, L.nu
    axes = tuple(np.linspace(lo, hi, resolution) for lo, hi in domain.bounding_box())
    h = np.array([a[1] - a[0] for a in axes])
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    shape = nodes.shape[:-1]
    values = np.full(shape + (nu,), np.nan)
    mask = np.zeros(shape, dtype=bool)
    interior = np.zeros(shape, dtype=bool)
    for idx in np.ndindex(*shape):
        t = nodes[idx]
        if not domain.contains(t):
            continue
        mask[idx] = True
        try:
            div = np.zeros(nu)
            central = True
            for i in range(n):
                e = np.zeros(n)
                e[i] = h[i]
                if domain.contains(t + e) and domain.contains(t - e):
                    div += (_flux(instance, t + e)[:, i] - _flux(instance, t - e)[:, i]) / (2 * h[i])
                    continue
                central = False
                s = 1.0 if domain.contains(t + 2 * e) else -1.0
                if not domain.contains(t + 2 * s * e):
                    raise ConfigError(f"grid too coarse near t={t.tolist()} for one-sided differences")
                f0 = _flux(instance, t)[:, i]
                f1 = _flux(instance, t + s * e)[:, i]
                f2 = _flux(instance, t + 2 * s * e)[:, i]
                div += s * (-3 * f0 + 4 * f1 - f2) / (2 * h[i])
            x, z = instance.candidate.value(t), instance.candidate.slope(t)
            values[idx] = div - calculus.grad_x(L, t, x, z)
        except NumericalError as exc:
            raise EvaluationError(f"Euler residual evaluation failed ({exc})", where=f"node t={t.tolist()}") from exc
        interior[idx] = central
    field = GridField(axes, values, mask)
    sel = mask if include_boundary else interior
    abs_vals = np.abs(values)
    max_int = float(np.max(abs_vals[sel])) if np.any(sel) else 0.0
    max_all = float(np.max(abs_vals[mask])) if np.any(mask) else 0.0
    return EulerResult(max_int, max_all, field, interior)


@dataclass
class ConjugateResult:
    identity_max: float
    corrected_max: float
    divergence_max: float
    r_q_max: float
    r_v_max: float
    q_max: float
    dx_max: float
    identity: np.ndarray
    r_q: np.ndarray
    r_v: np.ndarray

    @property
    def feed_residuals(self):
        return self.r_q_max, self.r_v_max

    @property
    def bound(self):
        """Residual-only bound on ``identity_max`` (pointwise Cauchy-Schwarz)."""
        return self.r_q_max * self.dx_max + self.q_max * self.r_v_max

    def to_dict(self):
        return {"identity_max": self.identity_max, "corrected_max": self.corrected_max,
                "divergence_max": self.divergence_max, "r_q_max": self.r_q_max,
                "r_v_max": self.r_v_max, "bound": self.bound}


def _grad(values, axes, axis):
    return np.gradient(values, axes[axis], axis=axis, edge_order=2)


def conjugate_identity_residual(L, phi, q_field, dx_field, x_field=None):
    """Residuals of the variational equation, the adjoint and their pairing.

    ``q_field`` values have shape ``(*grid, nu, n)`` (entry ``[a, i]`` is
    q^i_a), ``dx_field`` and the optional base solution ``x_field`` carry
    ``(*grid, nu)``; phi and L are evaluated at ``x_field`` (zero if absent).
    """
    if not q_field.same_grid(dx_field) or (x_field is not None and not q_field.same_grid(x_field)):
        raise ConfigError("q, dx and x fields must share one grid")
    n, nu = L.n, L.nu
    if q_field.value_shape != (nu, n) or dx_field.value_shape != (nu,):
        raise ArityError(f"expected q values of shape ({nu}, {n}) and dx values of shape ({nu},)")
    if len(q_field.axes) != n:
        raise ArityError(f"grid has {len(q_field.axes)} axes, Lagrangian has n={n}")
    axes, shape = q_field.axes, q_field.shape
    q, dx = q_field.values, dx_field.values
    xs = np.zeros(shape + (nu,)) if x_field is None else x_field.values
    nodes = q_field.nodes()

    dphi = np.empty(shape + (nu, n, nu))
    fx = np.empty(shape + (nu,))
    for idx in np.ndindex(*shape):
        t, x = nodes[idx], xs[idx]
        dphi[idx] = phi.derivative(t, x)
        fx[idx] = calculus.grad_x(L, t, x, phi(t, x))

    d_dx = np.stack([_grad(dx, axes, i) for i in range(n)], axis=-1)  # (*g, nu, n)
    div_q = sum(_grad(q[..., i], axes, i) for i in range(n))  # (*g, nu)

    r_v = d_dx - np.einsum("...aib,...b->...ai", dphi, dx)
    r_q = div_q + np.einsum("...bj,...bja->...a", q, dphi) - fx
    pairing = np.einsum("...a,...a->...", div_q, dx) + np.einsum("...ai,...ai->...", q, d_dx)
    identity = pairing - np.einsum("...a,...a->...", fx, dx)
    corrected = identity - np.einsum("...a,...a->...", r_q, dx) - np.einsum("...ai,...ai->...", q, r_v)
    product = np.einsum("...ai,...a->...i", q, dx)
    divergence = sum(_grad(product[..., i], axes, i) for i in range(n)) - np.einsum("...a,...a->...", fx, dx)

    def mx(a):
        a = np.abs(a)
        return float(np.max(a)) if a.size else 0.0

    return ConjugateResult(
        identity_max=mx(identity),
        corrected_max=mx(corrected),
        divergence_max=mx(divergence),
        r_q_max=float(np.max(np.linalg.norm(r_q.reshape(shape + (-1,)), axis=-1))),
        r_v_max=float(np.max(np.linalg.norm(r_v.reshape(shape + (-1,)), axis=-1))),
        q_max=float(np.max(np.linalg.norm(q.reshape(shape + (-1,)), axis=-1))),
        dx_max=float(np.max(np.linalg.norm(dx.reshape(shape + (-1,)), axis=-1))),
        identity=identity, r_q=r_q, r_v=r_v,
    )
