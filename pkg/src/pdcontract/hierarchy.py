"""Layered contracting systems on separated time scales.

Layers are ordered slowest first. Layer ``k`` sees the slower layer
``z_{k-1}`` as an exogenous input and is designed as if the faster layer
``z_{k+1}`` sat at its equilibrium map. The recursion below turns per-layer
constants into tracking gains ``tau_k`` with
``||z_k - z_k*|| <= tau_k sup ||dz_k*/dt||``.

Constant roles follow the proof of the recursion: ``eta_k`` is the
Lipschitz constant of ``f_k`` in the faster neighbour ``z_{k+1}``, ``xi_k``
bounds the layer's own speed away from equilibrium, and ``rho_k`` is the
Lipschitz constant of ``z_k*`` in ``z_{k-1}``.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import Trajectory, VectorField, integrate
from .errors import ConditionError, DimensionError, StabilityConditionError
from .robustness import CUTOFF_TIME_CONSTANTS, bound_tracking_with_observer, make_report, post_transient_sup


@dataclass(frozen=True, eq=False)
class LayerSpec:
    """One layer of a stack.

    ``field(z_prev, z, z_next, t)`` is the layer's dynamics; for the
    fastest layer ``z_next`` is an empty array. ``equilibrium(z_prev, t)``
    returns the layer's instantaneous equilibrium. ``observer`` optionally
    holds ``(beta_hat, xi, eta)`` for a fastest layer driven by an observer.
    """

    dimension: int
    field: Callable
    equilibrium: Callable
    beta: float
    eta: float = 0.0
    xi: float = 0.0
    rho: float = 0.0
    observer: Optional[tuple] = None
    metric: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"layer contraction rate must be positive, got {self.beta}")
        for attr in ("eta", "xi", "rho"):
            if getattr(self, attr) < 0:
                raise ValueError(f"{attr} must be nonnegative")


def tau_chain(layers):
    """``(gamma_k, tau_k)`` for every layer, slowest first.

    The fastest layer gets ``tau = 1 / beta`` (or the observer-driven
    tracking gain); slower layers use ``gamma_k = 1 - eta_k tau_{k+1} rho_{k+1}``
    and ``tau_k = gamma_k / (gamma_k beta_k - xi_k)``.

    Raises
    ------
    StabilityConditionError
        Naming the (1-based) layer where ``gamma_k > 0`` or
        ``gamma_k beta_k > xi_k`` fails.
    """
    layers = list(layers)
    if not layers:
        raise ValueError("empty stack")
    K = len(layers)
    out = [None] * K
    last = layers[-1]
    if last.observer is not None:
        beta_hat, xi_o, eta_o = last.observer
        try:
            tau = bound_tracking_with_observer(last.beta, beta_hat, xi_o, eta_o, 1.0)
        except ConditionError as exc:
            raise StabilityConditionError(f"layer {K}: {exc}", exc.condition, K) from None
    else:
        tau = 1.0 / last.beta
    out[-1] = (1.0, tau)
    for k in range(K - 2, -1, -1):
        layer, fast = layers[k], layers[k + 1]
        gamma = 1.0 - layer.eta * out[k + 1][1] * fast.rho
        if not gamma > 0:
            raise StabilityConditionError(
                f"layer {k + 1}: gamma = 1 - eta*tau_next*rho_next = {gamma:.6g} is not positive",
                "gamma_k > 0", k + 1,
            )
        if not gamma * layer.beta > layer.xi:
            raise StabilityConditionError(
                f"layer {k + 1}: gamma*beta = {gamma * layer.beta:.6g} does not exceed xi = {layer.xi:.6g}",
                "gamma_k * beta_k > xi_k", k + 1,
            )
        out[k] = (gamma, gamma / (gamma * layer.beta - layer.xi))
    return out


def dk_disturbance(layer, fast_layer, z_prev, z, z_next, t):
    """Field error from assuming the faster layer has equilibrated.

    ``f_k(z_prev, z, z_next*(z, t), t) - f_k(z_prev, z, z_next, t)``; zero for
    the fastest layer (``fast_layer=None``).
    """
    z = np.asarray(z, dtype=np.float64)
    if fast_layer is None:
        return np.zeros_like(z)
    z_next = np.asarray(z_next, dtype=np.float64)
    if z_next.shape != (fast_layer.dimension,):
        raise DimensionError(f"z_next has shape {z_next.shape}, expected {(fast_layer.dimension,)}")
    z_star_next = np.asarray(fast_layer.equilibrium(z, t), dtype=np.float64)
    return np.asarray(layer.field(z_prev, z, z_star_next, t)) - np.asarray(layer.field(z_prev, z, z_next, t))


@dataclass
class StackRun:
    trajectories: list
    reports: list
    taus: list
    transient_cutoff: float
    equilibria: list = field(default_factory=list)

    @property
    def satisfied(self):
        return all(r.satisfied for r in self.reports)


def _stack_field(layers, exogenous):
    dims = [layer.dimension for layer in layers]
    offsets = np.concatenate([[0], np.cumsum(dims)])
    empty = np.zeros(0)

    def f(w, t):
        out = np.empty_like(w)
        for k, layer in enumerate(layers):
            z = w[offsets[k]:offsets[k + 1]]
            z_prev = np.atleast_1d(exogenous(t)) if k == 0 else w[offsets[k - 1]:offsets[k]]
            z_next = w[offsets[k + 1]:offsets[k + 2]] if k + 1 < len(layers) else empty
            out[offsets[k]:offsets[k + 1]] = layer.field(z_prev, z, z_next, t)
        return out

    return VectorField(int(offsets[-1]), f, "stack"), offsets


def simulate_stack(layers, initial_states, exogenous, t0, t1, step, transient_cutoff=None):
    """Integrate the coupled stack and check each layer's tracking bound.

    ``exogenous(t)`` drives the slowest layer. Equilibrium speeds
    ``dz_k*/dt`` are finite differences of the equilibrium maps along the
    run; their supremum spans the whole window, while observed errors are
    taken after ``transient_cutoff`` (default ``8 / min beta_k``).
    """
    layers = list(layers)
    taus = tau_chain(layers)
    fld, offsets = _stack_field(layers, exogenous)
    w0 = np.concatenate([np.atleast_1d(np.asarray(z, dtype=np.float64)) for z in initial_states])
    if w0.size != fld.dimension:
        raise DimensionError(f"initial states have total size {w0.size}, stack needs {fld.dimension}")
    traj = integrate(fld, w0, t0, t1, step)
    times = traj.times
    cutoff = t0 + CUTOFF_TIME_CONSTANTS / min(l.beta for l in layers) if transient_cutoff is None else transient_cutoff

    trajectories, reports, equilibria = [], [], []
    for k, layer in enumerate(layers):
        zk = traj.states[:, offsets[k]:offsets[k + 1]]
        if k == 0:
            prev = [np.atleast_1d(exogenous(t)) for t in times]
        else:
            prev = traj.states[:, offsets[k - 1]:offsets[k]]
        z_star = np.array([np.atleast_1d(layer.equilibrium(p, t)) for p, t in zip(prev, times)])
        z_star_rate = np.gradient(z_star, times, axis=0)
        M = np.eye(layer.dimension) if layer.metric is None else np.asarray(layer.metric)
        err = np.linalg.norm((zk - z_star) @ M.T, axis=1)
        sup_rate = float(np.max(np.linalg.norm(z_star_rate @ M.T, axis=1)))
        gamma, tau = taus[k]
        observed = post_transient_sup(times, err, cutoff)
        observed_eu = post_transient_sup(times, np.linalg.norm(zk - z_star, axis=1), cutoff)
        constants = {
            "layer": k + 1, "beta": layer.beta, "eta": layer.eta, "xi": layer.xi,
            "rho": layer.rho, "gamma": gamma, "tau": tau, "sup_rate": sup_rate,
        }
        reports.append(make_report(
            "thm2_layer", tau * sup_rate, observed, cutoff, constants,
            metric="layer", observed_sup_euclidean=observed_eu,
        ))
        label = layer.name or f"layer{k + 1}"
        trajectories.append(Trajectory(times, zk, label, tuple(f"{label}_{i}" for i in range(layer.dimension))))
        equilibria.append(z_star)
    return StackRun(trajectories, reports, taus, float(cutoff), equilibria)


def linear_cascade(beta_fast=10.0, beta_slow=1.0, xi_slow=0.1, eta_slow=0.2, rho_fast=0.5):
    """Two scalar layers tracking an exogenous reference.

    Fast layer: ``z2' = -beta_fast (z2 - rho_fast z1)``, equilibrium ``rho_fast z1``.
    Slow layer: ``z1' = -beta_slow (z1 - z0) + eta_slow (z2 - rho_fast z1)``,
    whose reduced dynamics (fast layer equilibrated) track ``z1* = z0``.
    ``xi_slow`` is carried as a declared constant.
    """
    def fast_field(z_prev, z, z_next, t):
        return -beta_fast * (z - rho_fast * z_prev)

    def fast_eq(z_prev, t):
        return rho_fast * np.atleast_1d(z_prev)

    def slow_field(z_prev, z, z_next, t):
        return -beta_slow * (z - z_prev) + eta_slow * (z_next - rho_fast * z)

    def slow_eq(z_prev, t):
        return np.atleast_1d(np.asarray(z_prev, dtype=np.float64)).copy()

    slow = LayerSpec(1, slow_field, slow_eq, beta_slow, eta=eta_slow, xi=xi_slow, rho=1.0, name="slow")
    fast = LayerSpec(1, fast_field, fast_eq, beta_fast, rho=rho_fast, name="fast")
    return [slow, fast]
