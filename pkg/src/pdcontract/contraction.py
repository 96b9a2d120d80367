"""Skew contraction metric for primal-dual flows.

With ``Theta = [[I, a E'], [0, (I - a^2 E E')^(1/2)]]`` the squared distance
``||Theta dz||^2`` decays as ``-2 dz' Q dz`` along the displacement dynamics,
where ``Q = [[H - a E'E, (a/2) H E'], [(a/2) E H, a E E']]``. The certified
rate is ``beta = lambda_min(Theta^-T Q Theta^-1)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationError, DegeneratePairError, DimensionError, MetricError, WindowError
from .matrixcore import as_matrix, spectral_norm, sym_eig_extremes, sym_inv_sqrt, sym_sqrt

GOLDEN_ITERATIONS = 40
ALPHA_MARGIN = 0.999


@dataclass(frozen=True, eq=False)
class ContractionCertificate:
    alpha: float
    theta: np.ndarray
    q_form: np.ndarray
    beta: float
    alpha_max: float
    hessian_bounds_used: tuple
    constraint_matrix: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.theta.shape[0] - self.m

    @property
    def m(self):
        return self.constraint_matrix.shape[0]

    def to_dict(self):
        out = {
            "alpha": self.alpha,
            "alpha_max": self.alpha_max,
            "beta": self.beta,
            "theta": self.theta.tolist(),
            "q_form": self.q_form.tolist(),
            "hessian_bounds_used": list(self.hessian_bounds_used),
        }
        if self.constraint_matrix is not None:
            out["constraint_matrix"] = self.constraint_matrix.tolist()
        return out


def _norm_terms(prob):
    """``(||E||, ||E H^-1/2||^2, ||H||)``, worst case over the Hessian bounds if not quadratic."""
    E = prob.E
    e_norm = spectral_norm(E)
    if prob.is_quadratic:
        H = prob.objective.P
        return e_norm, spectral_norm(E @ sym_inv_sqrt(H)) ** 2, spectral_norm(H)
    h_min, h_max = prob.hessian_bounds
    return e_norm, e_norm**2 / h_min, h_max


def alpha_max(prob):
    """Upper end of the admissible interval for ``alpha``."""
    e_norm, eh_sq, h_norm = _norm_terms(prob)
    return 1.0 / max(e_norm, eh_sq + h_norm / 4.0)


def _dual_block(E, alpha):
    m = E.shape[0]
    return np.eye(m) - alpha**2 * (E @ E.T)


def build_theta(E, alpha):
    E = as_matrix(E, "E")
    m, n = E.shape
    if not 0 < alpha < 1.0 / spectral_norm(E):
        raise MetricError(f"alpha={alpha} outside (0, 1/||E||_2)")
    theta = np.zeros((n + m, n + m))
    theta[:n, :n] = np.eye(n)
    theta[:n, n:] = alpha * E.T
    theta[n:, n:] = sym_sqrt(_dual_block(E, alpha))
    return theta


def theta_inverse(E, alpha):
    """Block back-substitution: ``[[I, -a E' R^-1], [0, R^-1]]``."""
    E = as_matrix(E, "E")
    m, n = E.shape
    R_inv = sym_inv_sqrt(_dual_block(E, alpha))
    inv = np.zeros((n + m, n + m))
    inv[:n, :n] = np.eye(n)
    inv[:n, n:] = -alpha * E.T @ R_inv
    inv[n:, n:] = R_inv
    return inv


def build_q(H, E, alpha):
    H = as_matrix(H, "H")
    E = as_matrix(E, "E")
    m, n = E.shape
    if H.shape != (n, n):
        raise DimensionError(f"H has shape {H.shape}, expected {(n, n)}")
    Q = np.empty((n + m, n + m))
    Q[:n, :n] = H - alpha * E.T @ E
    Q[:n, n:] = 0.5 * alpha * H @ E.T
    Q[n:, :n] = 0.5 * alpha * E @ H
    Q[n:, n:] = alpha * E @ E.T
    return 0.5 * (Q + Q.T)


def certified_rate(H, E, alpha):
    """``lambda_min(Theta^-T Q Theta^-1)`` for one Hessian."""
    Ti = theta_inverse(E, alpha)
    M = Ti.T @ build_q(H, E, alpha) @ Ti
    return sym_eig_extremes(M)[0]


def _candidate_hessians(prob, hessian_samples):
    if prob.is_quadratic:
        return [prob.objective.P]
    h_min, h_max = prob.hessian_bounds
    n = prob.n
    return [h_min * np.eye(n), h_max * np.eye(n)] + [as_matrix(H) for H in hessian_samples]


def _golden_max(fun, lo, hi, iterations=GOLDEN_ITERATIONS):
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = fun(c), fun(d)
    best = max((fc, c), (fd, d))
    for _ in range(iterations):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = fun(c)
            best = max(best, (fc, c))
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = fun(d)
            best = max(best, (fd, d))
    return best[1]


def certify(prob, alpha=None, hessian_samples=()):
    """Contraction certificate for the primal-dual flow of ``prob``.

    When ``alpha`` is omitted it is chosen by golden-section search for the
    largest certified rate on ``(0, 0.999 * alpha_max)``. For non-quadratic
    objectives the rate is the minimum over ``h_min I``, ``h_max I`` and any
    ``hessian_samples`` supplied.
    """
    a_max = alpha_max(prob)
    Hs = _candidate_hessians(prob, hessian_samples)
    E = prob.E

    def rate(a):
        return min(certified_rate(H, E, a) for H in Hs)

    if alpha is None:
        alpha = _golden_max(rate, 0.0, ALPHA_MARGIN * a_max)
    elif not 0 < alpha < a_max:
        raise MetricError(f"alpha={alpha} outside (0, alpha_max={a_max:.6g})")
    alpha = float(alpha)

    rates = [certified_rate(H, E, alpha) for H in Hs]
    worst = int(np.argmin(rates))
    Q = build_q(Hs[worst], E, alpha)
    q_min = sym_eig_extremes(Q)[0]
    if q_min <= 0:
        raise CertificationError(f"Q is not positive definite at alpha={alpha} (lambda_min={q_min:.3e})")
    beta = rates[worst]
    if beta <= 0:
        raise CertificationError(f"certified rate is not positive at alpha={alpha} (beta={beta:.3e})")
    return ContractionCertificate(
        alpha, build_theta(E, alpha), Q, float(beta), float(a_max), prob.hessian_bounds, E.copy()
    )


def weighted_distance(theta, z1, z2):
    """``||Theta (z1 - z2)||_2``."""
    theta = as_matrix(theta, "theta")
    d = np.asarray(z1, dtype=np.float64) - np.asarray(z2, dtype=np.float64)
    if d.shape != (theta.shape[1],):
        raise DimensionError(f"state difference has shape {d.shape}, metric is {theta.shape}")
    return float(np.linalg.norm(theta @ d))


def weighted_norms(theta, diffs):
    """Row-wise ``||Theta d||_2`` for a stack of differences; ``theta=None`` is Euclidean."""
    diffs = np.atleast_2d(np.asarray(diffs, dtype=np.float64))
    if theta is None:
        return np.linalg.norm(diffs, axis=1)
    return np.linalg.norm(diffs @ np.asarray(theta).T, axis=1)


def empirical_rate(traj1, traj2, theta, window):
    """Least-squares slope of ``-log ||Theta (z1 - z2)||`` over ``window``."""
    if traj1.times.shape != traj2.times.shape or not np.allclose(traj1.times, traj2.times, rtol=0, atol=1e-12):
        raise WindowError("trajectories do not share a time grid")
    t_a, t_b = window
    if not (t_a < t_b and traj1.times[0] <= t_a and t_b <= traj1.times[-1]):
        raise WindowError(f"window {window} not inside [{traj1.times[0]}, {traj1.times[-1]}]")
    mask = (traj1.times >= t_a) & (traj1.times <= t_b)
    if mask.sum() < 2:
        raise WindowError(f"window {window} holds fewer than two grid points")
    dist = weighted_norms(theta, traj1.states[mask] - traj2.states[mask])
    if np.any(dist <= 0):
        raise DegeneratePairError("trajectories coincide inside the window")
    slope = np.polyfit(traj1.times[mask], -np.log(dist), 1)[0]
    return float(slope)
