"""Steady-state error bounds for perturbed and observer-driven PD flows.

All distances are measured in the certificate metric ``||Theta .||_2``.
Constants follow one naming scheme throughout:

``beta``
    certified contraction rate of the true flow
``beta_hat``
    partial contraction rate of the observer
``xi``
    gain from estimate error to field error, ``||f(z_hat) - f(z)|| <= xi ||z_hat - z||``
``eta``
    growth of the field away from the optimum, ``||f(z)|| <= eta ||z - z*||``
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .contraction import certify, weighted_norms
from .dynamics import (
    Trajectory,
    augment_initial,
    integrate,
    observer_augmented_field,
    pd_vector_field,
    splice_estimate,
)
from .errors import ConditionError, DomainError, WindowError
from .matrixcore import spectral_norm, sym_inv_sqrt
from .problem import optimum_path, sup_optimum_rate

SATISFIED_SLACK = 1e-6
CUTOFF_TIME_CONSTANTS = 8.0
SAMPLED_INFLATION = 1.1

BOUND_IDS = (
    "cor1_tracking",
    "cor2_approx_to_pd",
    "lem4_observer",
    "thm1_tracking_observer",
    "cor3_perturbed_to_pd",
    "thm2_layer",
)


@dataclass(frozen=True)
class LipschitzEstimates:
    xi: float
    eta: float
    method: str
    samples: int = 0
    xi_argmax: Optional[tuple] = None
    eta_argmax: Optional[tuple] = None
    xi_scope: str = "unobserved subspace"

    def to_dict(self):
        return {
            "xi": self.xi,
            "eta": self.eta,
            "method": self.method,
            "samples": self.samples,
            "xi_scope": self.xi_scope,
        }


@dataclass(frozen=True)
class BoundReport:
    bound_id: str
    constants: dict
    predicted: float
    observed_sup: float
    transient_cutoff: float
    satisfied: bool
    condition_violated: bool = False
    metric: str = "theta"
    observed_sup_euclidean: Optional[float] = None
    notes: str = ""

    CSV_FIELDS = (
        "bound_id", "predicted", "observed_sup", "observed_sup_euclidean",
        "transient_cutoff", "satisfied", "condition_violated", "constants",
    )

    def to_dict(self):
        return {
            "bound_id": self.bound_id,
            "constants": dict(self.constants),
            "predicted": self.predicted,
            "observed_sup": self.observed_sup,
            "observed_sup_euclidean": self.observed_sup_euclidean,
            "transient_cutoff": self.transient_cutoff,
            "satisfied": self.satisfied,
            "condition_violated": self.condition_violated,
            "metric": self.metric,
            "notes": self.notes,
        }

    @classmethod
    def csv_header(cls):
        return ",".join(cls.CSV_FIELDS)

    def to_csv_row(self):
        consts = ";".join(f"{k}={v:.17g}" for k, v in sorted(self.constants.items()))
        eu = "" if self.observed_sup_euclidean is None else f"{self.observed_sup_euclidean:.17g}"
        return ",".join([
            self.bound_id, f"{self.predicted:.17g}", f"{self.observed_sup:.17g}", eu,
            f"{self.transient_cutoff:.17g}", str(self.satisfied).lower(),
            str(self.condition_violated).lower(), consts,
        ])


def make_report(bound_id, predicted, observed_sup, transient_cutoff, constants=None, **extra):
    """Assemble a report; a non-finite ``predicted`` marks the condition as violated."""
    if bound_id not in BOUND_IDS:
        raise ValueError(f"unknown bound id {bound_id!r}")
    predicted = float(predicted)
    violated = not np.isfinite(predicted)
    satisfied = (not violated) and observed_sup <= predicted * (1 + SATISFIED_SLACK)
    return BoundReport(
        bound_id, dict(constants or {}), predicted, float(observed_sup), float(transient_cutoff),
        bool(satisfied), violated, **extra,
    )


def _require_beta(beta):
    if not beta > 0:
        raise ConditionError(f"contraction rate must be positive (beta={beta})", "beta > 0")


def _require_observer(beta, beta_hat, xi, eta):
    _require_beta(beta)
    if not beta_hat > xi:
        raise ConditionError(
            f"observer rate does not dominate the substitution gain "
            f"(beta_hat={beta_hat:.6g}, xi={xi:.6g}); need beta_hat > xi", "beta_hat > xi"
        )
    margin = beta * (beta_hat - xi) - eta * xi
    if not margin > 0:
        raise ConditionError(
            f"beta*(beta_hat - xi) - eta*xi = {margin:.6g} is not positive",
            "beta*(beta_hat - xi) - eta*xi > 0",
        )
    return margin


def bound_tracking(beta, sup_rate):
    """Radius of the ball around the moving optimum that the true flow settles in."""
    _require_beta(beta)
    return sup_rate / beta


def bound_approx_to_pd(beta, xi, sup_estimate_error):
    """Distance between the estimate-driven and the true flow."""
    _require_beta(beta)
    return xi * sup_estimate_error / beta


def bound_observer_error(eta, beta_hat, xi, sup_tracking):
    """Steady-state observer error ``eta / (beta_hat - xi) * sup ||z - z*||``."""
    if not beta_hat > xi:
        raise ConditionError(
            f"beta_hat={beta_hat:.6g} does not exceed xi={xi:.6g}; need beta_hat > xi", "beta_hat > xi"
        )
    return eta * sup_tracking / (beta_hat - xi)


def bound_tracking_with_observer(beta, beta_hat, xi, eta, sup_rate):
    """Tracking error of the observer-driven flow."""
    margin = _require_observer(beta, beta_hat, xi, eta)
    return (beta_hat - xi) / margin * sup_rate


def bound_perturbed_to_pd(beta, beta_hat, xi, eta, sup_rate):
    """Distance between the observer-driven flow and the true flow."""
    margin = _require_observer(beta, beta_hat, xi, eta)
    return eta * xi / (beta * margin) * sup_rate


def restricted_gain(A, theta, basis):
    """``sup ||Theta A w|| / ||Theta w||`` over ``w`` in the column span of ``basis``."""
    basis = np.asarray(basis, dtype=np.float64)
    if basis.size == 0 or basis.shape[1] == 0:
        return 0.0
    C = theta @ A @ basis
    G = theta @ basis
    return spectral_norm(C @ sym_inv_sqrt(G.T @ G))


def unobserved_projector(basis):
    """Euclidean orthogonal projector onto the column span of ``basis``."""
    basis = np.asarray(basis, dtype=np.float64)
    if basis.size == 0 or basis.shape[1] == 0:
        return np.zeros((basis.shape[0], basis.shape[0]))
    W = basis @ sym_inv_sqrt(basis.T @ basis)
    return W @ W.T


def analytic_lipschitz(A, theta, unobserved_basis):
    """Lipschitz constants of the affine field ``z -> A z + b(t)`` in the metric ``theta``.

    ``eta`` bounds the field's growth away from the optimum and ``xi`` the
    field error caused by errors in the unobserved subspace. The observer is
    driven by the unobserved part ``P f`` of the field, and in a non-orthogonal
    metric that part can be larger than the whole field, so both constants
    cover ``A`` and ``P A``.
    """
    theta_inv = np.linalg.inv(theta)
    P = unobserved_projector(unobserved_basis)
    eta = max(spectral_norm(theta @ A @ theta_inv), spectral_norm(theta @ P @ A @ theta_inv))
    xi = max(restricted_gain(A, theta, unobserved_basis), restricted_gain(P @ A, theta, unobserved_basis))
    return LipschitzEstimates(xi=xi, eta=eta, method="analytic_linear")


def estimate_lipschitz(prob, cert, obs, domain=None, samples=1000, seed=0, method=None,
                       t_range=(0.0, 0.0)):
    """Constants ``xi`` and ``eta`` for the PD flow of ``prob``.

    Quadratic problems get exact values from the constant system matrix
    unless ``method="sampled"``. Otherwise the ratios are maximized over
    ``samples`` random points of the box ``domain = (lower, upper)`` and
    times in ``t_range``, then inflated by 10%.
    """
    N = prob.n + prob.m
    obs.check_partition(N)
    U = list(obs.unobserved_indices)
    theta = cert.theta
    field_ = pd_vector_field(prob)
    P = unobserved_projector(np.eye(N)[:, U])
    if method is None:
        method = "analytic_linear" if field_.affine is not None else "sampled"
    if method == "analytic_linear":
        if field_.affine is None:
            raise ValueError("analytic Lipschitz constants need a quadratic objective")
        return analytic_lipschitz(field_.affine.A, theta, np.eye(N)[:, U])
    if method != "sampled":
        raise ValueError(f"unknown method {method!r}")

    if domain is None:
        raise DomainError("sampled estimation needs a state box")
    lower, upper = (np.broadcast_to(np.asarray(b, dtype=np.float64), (N,)) for b in domain)
    if np.any(upper <= lower):
        raise DomainError("state box is empty or degenerate")
    if samples < 1:
        raise DomainError("need at least one sample")
    rng = np.random.default_rng(seed)
    xi = eta = 0.0
    xi_arg = eta_arg = None
    for _ in range(samples):
        z = rng.uniform(lower, upper)
        t = rng.uniform(*t_range) if t_range[1] > t_range[0] else float(t_range[0])
        fz = field_(z, t)
        if U:
            z_hat = z.copy()
            z_hat[U] = rng.uniform(lower[U], upper[U])
            den = np.linalg.norm(theta @ (z_hat - z))
            if den > 0:
                df = field_(z_hat, t) - fz
                ratio = max(np.linalg.norm(theta @ df), np.linalg.norm(theta @ P @ df)) / den
                if ratio > xi:
                    xi, xi_arg = ratio, (tuple(z), tuple(z_hat), t)
        z_star = optimum_path(prob, [t])[0]
        den = np.linalg.norm(theta @ (z - z_star))
        if den > 0:
            ratio = max(np.linalg.norm(theta @ fz), np.linalg.norm(theta @ P @ fz)) / den
            if ratio > eta:
                eta, eta_arg = ratio, (tuple(z), t)
    return LipschitzEstimates(
        SAMPLED_INFLATION * xi, SAMPLED_INFLATION * eta, "sampled", samples, xi_arg, eta_arg
    )


def default_cutoff(beta, t0=0.0):
    return t0 + CUTOFF_TIME_CONSTANTS / beta


def _as_states(reference, times):
    if isinstance(reference, Trajectory):
        if reference.times.shape != times.shape or not np.allclose(reference.times, times, rtol=0, atol=1e-12):
            raise WindowError("trajectory and reference do not share a time grid")
        return reference.states
    ref = np.asarray(reference, dtype=np.float64)
    if ref.shape[0] != times.size:
        raise WindowError("reference has one row per grid time")
    return ref


def post_transient_sup(times, distances, cutoff):
    if cutoff > times[-1]:
        raise WindowError(f"transient cutoff {cutoff:.6g} lies beyond the grid end {times[-1]:.6g}")
    mask = times >= cutoff
    return float(np.max(distances[mask]))


def validate_bound(bound_id, trajectory, reference, theta, predicted, transient_cutoff,
                   constants=None, notes=""):
    """Compare a predicted bound with the largest post-transient distance.

    Parameters
    ----------
    trajectory : Trajectory
    reference : Trajectory or (len(times), d) array
        What the trajectory is measured against: ``z*(t)``, ``z_pd(t)`` or ``z(t)``.
    theta : (d, d) array
        Metric used for pass/fail. The Euclidean supremum is reported too.
    """
    times = trajectory.times
    diffs = trajectory.states - _as_states(reference, times)
    observed = post_transient_sup(times, weighted_norms(theta, diffs), transient_cutoff)
    observed_eu = post_transient_sup(times, weighted_norms(None, diffs), transient_cutoff)
    return make_report(
        bound_id, predicted, observed, transient_cutoff, constants,
        observed_sup_euclidean=observed_eu, notes=notes,
    )


@dataclass
class ObserverRun:
    certificate: object
    lipschitz: LipschitzEstimates
    beta_hat: float
    sup_rate: float
    true_trajectory: Trajectory
    observer_trajectory: Trajectory
    optimum: np.ndarray
    transient_cutoff: float
    reports: dict = field(default_factory=dict)

    @property
    def satisfied(self):
        return all(r.satisfied for r in self.reports.values())


def run_observer_experiment(prob, obs, z0, t0, t1, step, cert=None, lipschitz=None,
                            transient_cutoff=None, beta_hat=None):
    """Simulate the true and the observer-driven flow side by side and check every bound.

    Raises
    ------
    ConditionError
        If the observer bounds are inapplicable for the constants in use.
    """
    cert = cert or certify(prob)
    lip = lipschitz or estimate_lipschitz(prob, cert, obs)
    beta, xi, eta = cert.beta, lip.xi, lip.eta
    bh = obs.beta_hat if beta_hat is None else float(beta_hat)
    theta = cert.theta
    consts = {"beta": beta, "beta_hat": bh, "xi": xi, "eta": eta}
    _require_observer(beta, bh, xi, eta)

    sup_rate = sup_optimum_rate(prob, t0, t1, theta)
    consts["sup_rate"] = sup_rate
    cutoff = default_cutoff(beta, t0) if transient_cutoff is None else float(transient_cutoff)
    if cutoff >= t1:
        raise WindowError(f"transient cutoff {cutoff:.6g} is not before the end time {t1:.6g}")

    N = prob.n + prob.m
    true = integrate(pd_vector_field(prob), z0, t0, t1, step)
    aug = integrate(observer_augmented_field(prob, obs), augment_initial(z0, obs), t0, t1, step)
    times = true.times
    z_star = optimum_path(prob, times)
    z = aug.states[:, :N]
    z_hat = splice_estimate(z, aug.states[:, N:], obs)
    z_traj = Trajectory(times, z, aug.field_label)
    note = f"xi measured on {lip.xi_scope}"

    reports = {}
    reports["cor1_tracking"] = validate_bound(
        "cor1_tracking", true, z_star, theta, bound_tracking(beta, sup_rate), cutoff,
        {"beta": beta, "sup_rate": sup_rate},
    )
    reports["thm1_tracking_observer"] = validate_bound(
        "thm1_tracking_observer", z_traj, z_star, theta,
        bound_tracking_with_observer(beta, bh, xi, eta, sup_rate), cutoff, consts, note,
    )
    # sup_t inputs span the whole window, like sup_rate; observed sides are post-cutoff
    sup_tracking = float(np.max(weighted_norms(theta, z - z_star)))
    reports["lem4_observer"] = validate_bound(
        "lem4_observer", Trajectory(times, z_hat), z, theta,
        bound_observer_error(eta, bh, xi, sup_tracking), cutoff,
        {**consts, "sup_tracking": sup_tracking}, note,
    )
    sup_estimate = float(np.max(weighted_norms(theta, z_hat - z)))
    reports["cor2_approx_to_pd"] = validate_bound(
        "cor2_approx_to_pd", z_traj, true, theta, bound_approx_to_pd(beta, xi, sup_estimate), cutoff,
        {"beta": beta, "xi": xi, "sup_estimate_error": sup_estimate}, note,
    )
    reports["cor3_perturbed_to_pd"] = validate_bound(
        "cor3_perturbed_to_pd", z_traj, true, theta,
        bound_perturbed_to_pd(beta, bh, xi, eta, sup_rate), cutoff, consts, note,
    )
    return ObserverRun(cert, lip, bh, sup_rate, true, aug, z_star, cutoff, reports)
