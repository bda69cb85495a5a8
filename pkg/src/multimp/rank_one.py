"""Rank-one directions, biquadratic forms and the Legendre-Hadamard tests.

A biquadratic form is stored as a dense tensor ``a[alpha, i, beta, j]``
(``a^{ij}_{alpha beta}``), symmetric under the pair exchange
``(alpha, i) <-> (beta, j)``. Its value on a rank-one pair is
``sum a^{ij}_{ab} xi^a xi^b eta_i eta_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import calculus
from .errors import ArityError, ConfigError, NumericalError

NONNEGATIVE_TOL = 1e-8
STRICT_TOL = 1e-8
GRID_MAX_POINTS = 50_000_000


def _canonical_sign(v):
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def _unit(v, what):
    v = np.asarray(v, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(v))
    if not (norm > 0 and math.isfinite(norm)):
        raise ValueError(f"{what} must be a nonzero finite vector")
    return v / norm


@dataclass(frozen=True, eq=False)
class RankOneDirection:
    """Unit pair (xi, eta) with amplitude r; induces the slope r * xi eta^T."""

    xi: np.ndarray
    eta: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        for name in ("xi", "eta"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a unit vector (norm {np.linalg.norm(v)!r})")
            object.__setattr__(self, name, v)
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise ValueError(f"amplitude must be finite and >= 0, got {self.r}")
        object.__setattr__(self, "r", float(self.r))

    @classmethod
    def from_vectors(cls, xi, eta, r=1.0):
        """Normalise arbitrary nonzero ``xi`` and ``eta``."""
        return cls(_unit(xi, "xi"), _unit(eta, "eta"), r)

    def matrix(self):
        return self.r * np.outer(self.xi, self.eta)

    @property
    def scaled_eta(self):
        """eta * sqrt(7)/3, the direction scaling used by the needle construction."""
        return self.eta * math.sqrt(7) / 3

    def to_dict(self):
        return {"xi": self.xi.tolist(), "eta": self.eta.tolist(), "r": self.r}


class BiquadraticForm:
    def __init__(self, tensor):
        a = np.array(tensor, dtype=float)
        if a.ndim != 4 or a.shape[:2] != a.shape[2:]:
            raise ArityError(f"biquadratic tensor must have shape (nu, n, nu, n), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NumericalError("biquadratic tensor has non-finite entries")
        self.tensor = 0.5 * (a + a.transpose(2, 3, 0, 1))
        self.tensor.setflags(write=False)

    @property
    def nu(self):
        return self.tensor.shape[0]

    @property
    def n(self):
        return self.tensor.shape[1]

    @classmethod
    def from_flat(cls, M, nu, n):
        return cls(np.asarray(M, dtype=float).reshape(nu, n, nu, n))

    def flat(self):
        """Matrix acting on the row-major flattening of the slope (z1, z2, ...)."""
        k = self.nu * self.n
        return self.tensor.reshape(k, k).copy()

    def eigenvalues(self):
        """Eigenvalues of the form on all matrices, ascending."""
        return np.linalg.eigvalsh(self.flat())

    def scaled(self, c):
        return BiquadraticForm(c * self.tensor)

    def A(self, eta):
        """nu x nu matrix a^{ij}_{ab} eta_i eta_j."""
        m = np.einsum("aibj,i,j->ab", self.tensor, eta, eta)
        return 0.5 * (m + m.T)

    def B(self, xi):
        """n x n matrix a^{ij}_{ab} xi^a xi^b."""
        m = np.einsum("aibj,a,b->ij", self.tensor, xi, xi)
        return 0.5 * (m + m.T)

    def __add__(self, other):
        return BiquadraticForm(self.tensor + other.tensor)

    def __repr__(self):
        return f"BiquadraticForm(nu={self.nu}, n={self.n})"


def from_hessian(L, t, x, z):
    """The form a = d2f/dz dz at (t, x, z), pair-symmetrised."""
    return BiquadraticForm(calculus.hess_zz(L, t, x, z))


def quadratic_part(L, t, x, z):
    """Second-order Taylor coefficient of f in z: (1/2) d2f/dz dz.

    For a quadratic integrand this is the matrix of the quadratic form
    itself, so ``E(h) = quadratic_part : h h`` exactly.
    """
    return from_hessian(L, t, x, z).scaled(0.5)


def contract(form, xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.shape != (form.nu,) or eta.shape != (form.n,):
        raise ArityError(f"expected xi in R^{form.nu}, eta in R^{form.n}")
    return float(np.einsum("aibj,a,i,b,j->", form.tensor, xi, eta, xi, eta))


def classify(value, nonneg_tol=NONNEGATIVE_TOL, strict_tol=STRICT_TOL):
    if value >= strict_tol:
        return "strictly_positive"
    if value >= -nonneg_tol:
        return "nonnegative"
    return "indefinite"


@dataclass
class LHResult:
    min_value: float
    xi: np.ndarray
    eta: np.ndarray
    iterations: int
    history: list = field(default_factory=list)
    starts_used: int = 0

    def to_dict(self):
        return {"min_value": self.min_value, "argmin": {"xi": self.xi.tolist(), "eta": self.eta.tolist()},
                "iterations": self.iterations, "starts": self.starts_used}


def _lowest(M):
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-solver failure: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError("eigen-solver returned non-finite eigenvalues")
    return float(w[0]), V[:, 0]


def alternate(form, xi, eta, max_iters=100, tol=1e-12):
    """Alternating lowest-eigenvector iteration from ``(xi, eta)``.

    Returns ``(value, xi, eta, iterations, history)``; ``history`` lists the
    value after every half step and is nonincreasing up to rounding.
    """
    xi, eta = _unit(xi, "xi"), _unit(eta, "eta")
    value = contract(form, xi, eta)
    history = [value]
    it = 0
    for it in range(1, max_iters + 1):
        v_xi, xi = _lowest(form.A(eta))
        v_eta, eta = _lowest(form.B(xi))
        history.extend([v_xi, v_eta])
        done = abs(value - v_eta) < tol
        value = v_eta
        if done:
            break
    return value, xi, eta, it, history


def _starts(form, starts, seed, extra):
    rng = np.random.default_rng(seed)
    out = [(rng.standard_normal(form.nu), rng.standard_normal(form.n)) for _ in range(starts)]
    for a in range(form.nu):
        for i in range(form.n):
            out.append((np.eye(form.nu)[a], np.eye(form.n)[i]))
    out.extend((np.asarray(x, dtype=float), np.asarray(e, dtype=float)) for x, e in extra)
    return out


def lh_minimize(form, starts=8, max_iters=100, tol=1e-12, seed=0, extra_starts=()):
    """Minimise the form over unit rank-one pairs by multistart alternation.

    Starts are ``starts`` seeded random pairs, every axis pair and any
    ``extra_starts``. The result is an upper bound on the true minimum.
    """
    best = None
    candidates = _starts(form, int(starts), seed, extra_starts)
    for xi0, eta0 in candidates:
        value, xi, eta, it, hist = alternate(form, xi0, eta0, max_iters, tol)
        # the final pair is re-contracted so the value and argmin agree exactly
        xi, eta = _canonical_sign(xi), _canonical_sign(eta)
        value = contract(form, xi, eta)
        key = (value, tuple(xi), tuple(eta))
        if best is None or key < best[0]:
            best = (key, LHResult(value, xi, eta, it, hist))
    result = best[1]
    result.starts_used = len(candidates)
    return result


def sphere_grid(d, resolution):
    """Unit vectors on S^{d-1} from a hyperspherical angle grid.

    Antipodal points are identified (forms are even): the last angle runs
    over [0, pi) and the others over [0, pi] inclusive.
    """
    if d == 1:
        return np.ones((1, 1))
    inner = [np.linspace(0.0, np.pi, resolution)] * (d - 2)
    last = np.pi * np.arange(resolution) / resolution
    angles = np.stack(np.meshgrid(*inner, last, indexing="ij"), -1).reshape(-1, d - 1)
    pts = np.empty((angles.shape[0], d))
    sin_prod = np.ones(angles.shape[0])
    for k in range(d - 1):
        pts[:, k] = sin_prod * np.cos(angles[:, k])
        sin_prod = sin_prod * np.sin(angles[:, k])
    pts[:, d - 1] = sin_prod
    return pts


def grid_oracle(form, resolution, return_argmin=False):
    """Brute-force minimum of the form over an angular grid of S^{nu-1} x S^{n-1}."""
    if form.nu > 4 or form.n > 4:
        raise ConfigError(f"grid oracle limited to nu, n <= 4 (got nu={form.nu}, n={form.n})")
    if resolution < 8:
        raise ConfigError(f"grid oracle resolution must be >= 8, got {resolution}")
    X = sphere_grid(form.nu, resolution)
    Y = sphere_grid(form.n, resolution)
    if X.shape[0] * Y.shape[0] > GRID_MAX_POINTS:
        raise ConfigError(f"grid oracle would need {X.shape[0] * Y.shape[0]} evaluations; lower the resolution")
    Y2 = np.einsum("qi,qj->qij", Y, Y).reshape(Y.shape[0], -1)
    best_val, best_arg = math.inf, None
    chunk = max(1, 2_000_000 // max(1, Y.shape[0]))
    for s in range(0, X.shape[0], chunk):
        Xc = X[s:s + chunk]
        T = np.einsum("pa,pb,aibj->pij", Xc, Xc, form.tensor).reshape(Xc.shape[0], -1)
        M = T @ Y2.T
        k = int(np.argmin(M))
        p, q = divmod(k, M.shape[1])
        if M[p, q] < best_val:
            best_val, best_arg = float(M[p, q]), (Xc[p].copy(), Y[q].copy())
    if return_argmin:
        return best_val, best_arg
    return best_val


def van_hove_margin(form, **opts):
    """epsilon with form(xi, eta) >= epsilon |xi|^2 |eta|^2; strict condition iff > 0."""
    return lh_minimize(form, **opts).min_value
