"""Equality-constrained convex problems and their moving saddle points.

A :class:`SaddleProblem` carries an objective ``g``, a constraint
``E x = q(t)`` and an optional additive primal forcing ``a(t)``. Its
Lagrangian is ``g(x) - a(t).x + nu.(E x - q(t))``; the forcing is how
exogenous torques (see :mod:`pdcontract.agc`) enter without touching ``q``.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConvexityError, DimensionError, GraphError, OptimizerError, RankError
from .matrixcore import as_matrix, singular_values, sym_eig_extremes
from .signals import Constant, Signal, zero

RANK_TOL = 1e-10
KKT_TOL = 1e-10
NEWTON_MAX_ITER = 100
NEWTON_MIN_DAMPING = 2.0**-20


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """``g(x) = 0.5 x'Px + r'x``."""

    P: np.ndarray
    r: np.ndarray

    def value(self, x):
        return 0.5 * x @ self.P @ x + self.r @ x

    def gradient(self, x):
        return self.P @ x + self.r

    def hessian(self, x):
        return self.P


@dataclass(frozen=True, eq=False)
class CallableObjective:
    """Objective given by user callables.

    ``gradient`` and ``hessian`` must be pure (they may be called from
    several threads). ``value`` is only needed for :func:`lagrangian_value`.
    """

    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    value: Optional[Callable[[np.ndarray], float]] = None


@dataclass(frozen=True)
class PDState:
    """Primal-dual state ``z = (x, nu)``."""

    x: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=np.float64))
        nu = np.atleast_1d(np.asarray(self.nu, dtype=np.float64))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(nu))):
            raise DimensionError("state has non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "nu", nu)

    def as_vector(self):
        return np.concatenate([self.x, self.nu])

    @classmethod
    def from_vector(cls, z, n):
        z = np.asarray(z, dtype=np.float64)
        return cls(z[:n], z[n:])


@dataclass(frozen=True, eq=False)
class SaddleProblem:
    objective: object
    E: np.ndarray
    q: Signal
    hessian_bounds: tuple
    forcing: Optional[Signal] = None
    _kkt_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        E = as_matrix(self.E, "E")
        object.__setattr__(self, "E", E)
        m, n = E.shape
        if m == 0 or n == 0:
            raise DimensionError("E must be nonempty")
        if self.q.dim != m:
            raise DimensionError(f"q has dimension {self.q.dim}, E has {m} rows")
        if self.forcing is not None and self.forcing.dim != n:
            raise DimensionError(f"forcing has dimension {self.forcing.dim}, expected {n}")
        if m > n:
            raise RankError(f"E has more rows ({m}) than columns ({n}); full row rank impossible", 0.0)
        smin = singular_values(E)[m - 1]
        if smin <= RANK_TOL:
            raise RankError(f"E is not full row rank (smallest singular value {smin:.3e})", smin)
        h_min, h_max = (float(b) for b in self.hessian_bounds)
        if not h_min > 0:
            raise ConvexityError(f"objective is not strictly convex (h_min={h_min})")
        if h_min > h_max:
            raise ConvexityError(f"hessian bounds out of order ({h_min} > {h_max})")
        object.__setattr__(self, "hessian_bounds", (h_min, h_max))

    @property
    def n(self):
        return self.E.shape[1]

    @property
    def m(self):
        return self.E.shape[0]

    @property
    def is_quadratic(self):
        return isinstance(self.objective, QuadraticObjective)

    def hessian(self, x=None):
        if x is None:
            x = np.zeros(self.n)
        return as_matrix(self.objective.hessian(np.asarray(x, dtype=np.float64)), "hessian")

    def forcing_at(self, t):
        if self.forcing is None:
            return np.zeros(self.n)
        return self.forcing(t)

    def forcing_samples(self, times):
        if self.forcing is None:
            return np.zeros((np.size(times), self.n))
        return self.forcing.sample(times)


def make_quadratic_problem(P, r, E, q, forcing=None):
    """Quadratic saddle problem; Hessian bounds are the extreme eigenvalues of ``P``.

    ``q`` may be a :class:`Signal` or a constant vector.
    """
    P = as_matrix(P, "P")
    E = as_matrix(E, "E")
    n = E.shape[1]
    if P.shape != (n, n):
        raise DimensionError(f"P has shape {P.shape}, expected {(n, n)}")
    if np.max(np.abs(P - P.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(P))):
        raise ConvexityError("P is not symmetric")
    P = 0.5 * (P + P.T)
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if r.shape != (n,):
        raise DimensionError(f"r has shape {r.shape}, expected {(n,)}")
    lo, hi = sym_eig_extremes(P)
    if lo <= 0:
        raise ConvexityError(f"P is not positive definite (lambda_min={lo:.3e})")
    if not isinstance(q, Signal):
        q = Constant(q)
    return SaddleProblem(QuadraticObjective(P, r), E, q, (lo, hi), forcing)


def make_problem(gradient, hessian, E, q, hessian_bounds, value=None, forcing=None,
                 audit_points=None, seed=0):
    """Saddle problem with a general strictly convex objective.

    The declared ``hessian_bounds`` are spot-checked at ``audit_points``
    (default: the origin plus a few points drawn from ``[-1, 1]^n``).
    """
    E = as_matrix(E, "E")
    n = E.shape[1]
    if not isinstance(q, Signal):
        q = Constant(q)
    prob = SaddleProblem(CallableObjective(gradient, hessian, value), E, q, hessian_bounds, forcing)
    if audit_points is None:
        rng = np.random.default_rng(seed)
        audit_points = np.vstack([np.zeros(n), rng.uniform(-1.0, 1.0, size=(8, n))])
    h_min, h_max = prob.hessian_bounds
    for x in np.atleast_2d(audit_points):
        H = prob.hessian(x)
        if H.shape != (n, n):
            raise DimensionError(f"hessian returned shape {H.shape}, expected {(n, n)}")
        lo, hi = sym_eig_extremes(H)
        slack = 1e-9 * max(1.0, abs(h_max))
        if lo < h_min - slack or hi > h_max + slack:
            raise ConvexityError(
                f"hessian eigenvalues [{lo:.6g}, {hi:.6g}] at x={x} leave declared bounds "
                f"[{h_min:.6g}, {h_max:.6g}]"
            )
    return prob


def incidence_from_edges(edges, n_nodes):
    """Edge-node incidence matrix: row ``e`` of edge ``(u, v)`` is ``+1`` at ``u``, ``-1`` at ``v``."""
    edges = list(edges)
    E = np.zeros((len(edges), n_nodes))
    for row, (u, v) in enumerate(edges):
        if not (0 <= u < n_nodes and 0 <= v < n_nodes):
            raise GraphError(f"edge {row} = ({u}, {v}) references a node outside [0, {n_nodes})")
        if u == v:
            raise GraphError(f"edge {row} is a self-loop at node {u}")
        E[row, u] = 1.0
        E[row, v] = -1.0
    return E


def _split(prob, z):
    if isinstance(z, PDState):
        x, nu = z.x, z.nu
    else:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (prob.n + prob.m,):
            raise DimensionError(f"state has shape {z.shape}, expected {(prob.n + prob.m,)}")
        x, nu = z[: prob.n], z[prob.n:]
    if x.shape != (prob.n,) or nu.shape != (prob.m,):
        raise DimensionError(
            f"state dimensions ({x.size}, {nu.size}) do not match problem ({prob.n}, {prob.m})"
        )
    return x, nu


def lagrangian_value(prob, z, t):
    """``g(x) - a(t).x + nu.(E x - q(t))``."""
    x, nu = _split(prob, z)
    if prob.objective.value is None:
        raise ValueError("objective has no value evaluator")
    g = prob.objective.value(x)
    return float(g - prob.forcing_at(t) @ x + nu @ (prob.E @ x - prob.q(t)))


def kkt_residual(prob, z, t):
    """Stationarity and feasibility residual stacked into one vector."""
    x, nu = _split(prob, z)
    stat = prob.objective.gradient(x) + prob.E.T @ nu - prob.forcing_at(t)
    feas = prob.E @ x - prob.q(t)
    return np.concatenate([stat, feas])


def _quadratic_factors(prob):
    cache = prob._kkt_cache
    if "chol_P" not in cache:
        P, E = prob.objective.P, prob.E
        L = np.linalg.cholesky(P)
        Pinv_Et = np.linalg.solve(L.T, np.linalg.solve(L, E.T))
        S = E @ Pinv_Et  # Schur complement E P^-1 E'
        cache["chol_P"] = L
        cache["Pinv_Et"] = Pinv_Et
        cache["chol_S"] = np.linalg.cholesky(0.5 * (S + S.T))
    return cache["chol_P"], cache["Pinv_Et"], cache["chol_S"]


def _quadratic_optimum(prob, q_rows, a_rows):
    """Range-space solve of the KKT system for many right-hand sides at once."""
    L, Pinv_Et, Ls = _quadratic_factors(prob)
    rhs = (a_rows - prob.objective.r).T  # (n, k)
    Pinv_rhs = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    nu = np.linalg.solve(Ls.T, np.linalg.solve(Ls, prob.E @ Pinv_rhs - q_rows.T))
    x = Pinv_rhs - Pinv_Et @ nu
    return np.vstack([x, nu]).T


def _newton_optimum(prob, t, z0=None):
    n, m = prob.n, prob.m
    z = np.zeros(n + m) if z0 is None else np.array(z0, dtype=np.float64)
    res = kkt_residual(prob, z, t)
    rnorm = np.max(np.abs(res))
    for _ in range(NEWTON_MAX_ITER):
        if rnorm <= KKT_TOL:
            return z
        H = prob.hessian(z[:n])
        K = np.block([[H, prob.E.T], [prob.E, np.zeros((m, m))]])
        step = np.linalg.solve(K, -res)
        lam = 1.0
        while True:
            trial = z + lam * step
            trial_res = kkt_residual(prob, trial, t)
            trial_norm = np.max(np.abs(trial_res))
            if trial_norm < rnorm or lam <= NEWTON_MIN_DAMPING:
                break
            lam *= 0.5
        z, res, rnorm = trial, trial_res, trial_norm
    if rnorm <= KKT_TOL:
        return z
    raise OptimizerError(
        f"Newton KKT solve did not converge in {NEWTON_MAX_ITER} iterations "
        f"(residual {rnorm:.3e})", rnorm
    )


def instantaneous_optimum(prob, t):
    """KKT point ``z*(t)`` of the problem frozen at time ``t``."""
    if prob.is_quadratic:
        z = _quadratic_optimum(prob, prob.q(t)[None, :], prob.forcing_at(t)[None, :])[0]
    else:
        z = _newton_optimum(prob, t)
    return PDState.from_vector(z, prob.n)


def optimum_path(prob, times):
    """Stacked ``z*(t)`` for every time in ``times``, shape ``(len(times), n + m)``."""
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if prob.is_quadratic:
        return _quadratic_optimum(prob, prob.q.sample(times), prob.forcing_samples(times))
    out = np.empty((times.size, prob.n + prob.m))
    z = None
    for i, t in enumerate(times):
        z = _newton_optimum(prob, t, z)
        out[i] = z
    return out


def optimum_rate(prob, t, h=1e-4, theta=None):
    """Central-difference speed ``||z*'(t)||`` in the metric ``||theta .||_2``."""
    if not h > 0:
        raise ValueError("difference step must be positive")
    path = optimum_path(prob, [t - h, t + h])
    dz = (path[1] - path[0]) / (2.0 * h)
    if theta is not None:
        dz = np.asarray(theta) @ dz
    return float(np.linalg.norm(dz))


def sup_optimum_rate(prob, t0, t1, theta=None, points=10_000, h=1e-4):
    """Maximum of :func:`optimum_rate` over a uniform grid on ``[t0, t1]``."""
    times = np.linspace(t0, t1, points)
    dz = (optimum_path(prob, times + h) - optimum_path(prob, times - h)) / (2.0 * h)
    if theta is not None:
        dz = dz @ np.asarray(theta).T
    return float(np.max(np.linalg.norm(dz, axis=1)))
