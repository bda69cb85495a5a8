"""Slope derivatives, Weyl momenta, the Pontryagin function and the excess.

All derivatives are taken with respect to the slope matrix ``z`` (and, for
the Euler residual, the field value ``x``). Analytic oracles on the
:class:`~multimp.problems.Lagrangian` are used when present; otherwise
central differences.
"""

from __future__ import annotations

import numpy as np

from .errors import EvaluationError, NumericalError

REL_STEP = 1e-5
HESS_REL_STEP = 1e-4


def default_step(z, rel=REL_STEP):
    return rel * max(1.0, float(np.max(np.abs(z))) if np.size(z) else 1.0)


def _as(t, x, z):
    return np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(z, dtype=float)


def _central_z(L, t, x, z, step):
    out = np.empty(z.shape)
    for idx in np.ndindex(*z.shape):
        zp, zm = z.copy(), z.copy()
        zp[idx] += step
        zm[idx] -= step
        out[idx] = (L(t, x, zp) - L(t, x, zm)) / (2 * step)
    return out


def grad_z(L, t, x, z, step=None, richardson=False, use_oracle=True):
    """df/dz at ``(t, x, z)``, shape ``(nu, n)``.

    With ``richardson=True`` the central difference at ``step`` and ``step/2``
    is extrapolated to fourth order.
    """
    t, x, z = _as(t, x, z)
    if use_oracle and L.grad_z is not None:
        g = np.asarray(L.grad_z(t, x, z), dtype=float).reshape(L.nu, L.n)
        if not np.all(np.isfinite(g)):
            raise EvaluationError("non-finite analytic gradient", where=f"z={z.tolist()}")
        return g
    step = default_step(z) if step is None else float(step)
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    g = _central_z(L, t, x, z, step)
    if richardson:
        g = (4 * _central_z(L, t, x, z, step / 2) - g) / 3
    return g


def grad_x(L, t, x, z, step=None, use_oracle=True):
    """df/dx at ``(t, x, z)``, shape ``(nu,)``."""
    t, x, z = _as(t, x, z)
    if use_oracle and L.grad_x is not None:
        return np.asarray(L.grad_x(t, x, z), dtype=float).reshape(L.nu)
    step = default_step(x) if step is None else float(step)
    out = np.empty(L.nu)
    for a in range(L.nu):
        xp, xm = x.copy(), x.copy()
        xp[a] += step
        xm[a] -= step
        out[a] = (L(t, xp, z) - L(t, xm, z)) / (2 * step)
    return out


def hess_zz(L, t, x, z, step=None, use_oracle=True):
    """Pair-symmetrised d2f/dz dz, shape ``(nu, n, nu, n)``.

    Without an analytic Hessian: central differences of :func:`grad_z`
    (which itself falls back to differences, at the same step).
    """
    t, x, z = _as(t, x, z)
    nu, n = L.nu, L.n
    if use_oracle and L.hess_zz is not None:
        H = np.asarray(L.hess_zz(t, x, z), dtype=float).reshape(nu, n, nu, n)
    else:
        s = default_step(z, HESS_REL_STEP) if step is None else float(step)
        inner = None if (use_oracle and L.grad_z is not None) else s
        H = np.empty((nu, n, nu, n))
        for b, j in np.ndindex(nu, n):
            zp, zm = z.copy(), z.copy()
            zp[b, j] += s
            zm[b, j] -= s
            H[:, :, b, j] = (grad_z(L, t, x, zp, inner, use_oracle=use_oracle)
                             - grad_z(L, t, x, zm, inner, use_oracle=use_oracle)) / (2 * s)
    if not np.all(np.isfinite(H)):
        raise EvaluationError("non-finite Hessian", where=f"z={z.tolist()}")
    return 0.5 * (H + H.transpose(2, 3, 0, 1))


def weyl_momenta(L, t, x, z):
    """Canonical momenta q = df/dz; ``q[a, i]`` holds q^i_a."""
    return grad_z(L, t, x, z)


def pontryagin_H(L, q, t, x, z):
    """H = -f(t, x, z) + sum_{a,i} q^i_a z^a_i."""
    t, x, z = _as(t, x, z)
    return -L(t, x, z) + float(np.sum(np.asarray(q, dtype=float) * z))


class Excess:
    """h -> f(zhat + h) - f(zhat) - <f_z(zhat), h> with f(zhat) and f_z cached."""

    def __init__(self, L, t, x, zhat, grad=None):
        self.L = L
        self.t, self.x, self.zhat = _as(t, x, zhat)
        self.f0 = L(self.t, self.x, self.zhat)
        self.grad = weyl_momenta(L, self.t, self.x, self.zhat) if grad is None else np.asarray(grad)

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        try:
            fh = self.L(self.t, self.x, self.zhat + h)
        except NumericalError as exc:
            raise EvaluationError(f"excess evaluation failed ({exc})", where=f"h={h.tolist()}") from exc
        return fh - self.f0 - float(np.sum(self.grad * h))


def weierstrass_excess(L, t, x, zhat, h):
    """Weierstrass-type excess E(h) at the slope ``zhat``.

    The rank-one maximum principle holds at ``(t, x, zhat)`` iff
    ``E(r xi eta^T) >= 0`` for all unit xi, eta and r >= 0. With
    q = f_z(zhat), ``H(zhat + h) - H(zhat) = -E(h)``.
    """
    return Excess(L, t, x, zhat)(h)


def printed_bracket(L, t, x, zhat, h):
    """Both sides of the maximum condition with the momenta term left unsubtracted.

    Returns ``(lhs, rhs)`` with ``lhs = -f(zhat + h) + <f_z(zhat), h>`` and
    ``rhs = -f(zhat) + <f_z(zhat), zhat>``. These differ by
    ``<f_z, zhat>`` already at h = 0; the checks use :func:`weierstrass_excess`.
    """
    t, x, zhat = _as(t, x, zhat)
    g = grad_z(L, t, x, zhat)
    lhs = -L(t, x, zhat + np.asarray(h, dtype=float)) + float(np.sum(g * h))
    rhs = -L(t, x, zhat) + float(np.sum(g * zhat))
    return lhs, rhs


def check_oracles(L, probes=20, seed=0, scale=1.0, rtol=1e-5):
    """Compare analytic oracles against central differences on random probes.

    Returns the worst relative gap per oracle; raises :class:`NumericalError`
    when any gap exceeds ``rtol``.
    """
    rng = np.random.default_rng(seed)
    worst = {}
    for _ in range(probes):
        t = scale * rng.standard_normal(L.n)
        x = scale * rng.standard_normal(L.nu)
        z = scale * rng.standard_normal((L.nu, L.n))
        pairs = []
        if L.grad_z is not None:
            pairs.append(("grad_z", grad_z(L, t, x, z), grad_z(L, t, x, z, use_oracle=False)))
        if L.grad_x is not None:
            pairs.append(("grad_x", grad_x(L, t, x, z), grad_x(L, t, x, z, use_oracle=False)))
        if L.hess_zz is not None:
            pairs.append(("hess_zz", hess_zz(L, t, x, z), hess_zz(L, t, x, z, use_oracle=False)))
        for name, exact, approx in pairs:
            gap = float(np.max(np.abs(exact - approx))) / max(1.0, float(np.max(np.abs(exact))))
            worst[name] = max(worst.get(name, 0.0), gap)
    bad = {k: v for k, v in worst.items() if v > rtol}
    if bad:
        raise NumericalError(f"analytic oracle(s) disagree with finite differences: {bad}")
    return worst
