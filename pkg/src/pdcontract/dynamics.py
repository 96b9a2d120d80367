"""Primal-dual vector fields, their perturbations, and fixed-step RK4.

Fields built from quadratic problems also carry an affine description
``z' = A z + b(t)``; :func:`integrate` hands those to the compiled stepping
kernel instead of calling back into Python at every stage.
"""
import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._backend import rk4_affine
from .errors import ConfigurationError, DimensionError, DivergenceError

DIVERGENCE_LIMIT = 1e9
DEFAULT_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class AffinePart:
    """``z' = A z + b(t)``; ``forcing(times)`` returns one row of ``b`` per time."""

    A: np.ndarray
    forcing: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def sample(self, times):
        if self.forcing is None:
            return np.zeros((np.size(times), self.A.shape[0]))
        return np.asarray(self.forcing(np.asarray(times, dtype=np.float64)), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class VectorField:
    dimension: int
    evaluator: Callable[[np.ndarray, float], np.ndarray]
    label: str = "field"
    affine: Optional[AffinePart] = None

    def __call__(self, z, t):
        return self.evaluator(np.asarray(z, dtype=np.float64), float(t))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    field_label: str = ""
    names: Optional[tuple] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if times.ndim != 1 or times.size < 2 or states.shape[0] != times.size:
            raise DimensionError("trajectory needs >= 2 times and one state per time")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory states must be finite")
        names = self.names
        if names is None:
            names = tuple(f"z{i}" for i in range(states.shape[1]))
        elif len(names) != states.shape[1]:
            raise DimensionError(f"{len(names)} names for {states.shape[1]} state columns")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "names", tuple(names))

    @property
    def final(self):
        return self.states[-1]

    def columns(self, index, label=None, names=None):
        """Sub-trajectory made of the state columns selected by ``index``."""
        idx = np.asarray(index)
        if names is None:
            names = tuple(np.asarray(self.names, dtype=object)[idx])
        return Trajectory(self.times, self.states[:, idx], label or self.field_label, names)

    def to_csv(self, path):
        """Write ``t,<names...>`` rows with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", *self.names])
            for t, row in zip(self.times, self.states):
                writer.writerow([f"{t:.17g}", *(f"{v:.17g}" for v in row)])

    @classmethod
    def from_csv(cls, path, field_label=""):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if not header or header[0] != "t":
            raise ValueError(f"{path}: first column must be 't'")
        data = np.array([[float(v) for v in row] for row in body])
        return cls(data[:, 0], data[:, 1:], field_label, tuple(header[1:]))


@dataclass(frozen=True, eq=False)
class ObserverConfig:
    """Observer for the unobserved coordinates ``z_u``.

    ``observer_field(z_hat_u, z_u)`` returns the estimate's derivative;
    ``beta_hat`` is the declared partial contraction rate of that field in
    ``z_hat_u``. ``lag_time`` is set for the first-order lag observer and
    lets augmented fields stay affine.
    """

    observed_indices: tuple
    unobserved_indices: tuple
    observer_field: Callable[[np.ndarray, np.ndarray], np.ndarray]
    beta_hat: float
    lag_time: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "observed_indices", tuple(int(i) for i in self.observed_indices))
        object.__setattr__(self, "unobserved_indices", tuple(int(i) for i in self.unobserved_indices))
        if not self.beta_hat > 0:
            raise ConfigurationError(f"beta_hat must be positive, got {self.beta_hat}")

    @classmethod
    def first_order_lag(cls, unobserved, dimension, T):
        """Lag observer ``z_hat_u' = (z_u - z_hat_u) / T`` with ``beta_hat = 1 / T``."""
        if not T > 0:
            raise ConfigurationError(f"lag time constant must be positive, got {T}")
        unobserved = tuple(int(i) for i in unobserved)
        observed = tuple(i for i in range(dimension) if i not in set(unobserved))
        return cls(observed, unobserved, lambda zh, zu: (zu - zh) / T, 1.0 / T, float(T))

    def check_partition(self, dimension):
        o, u = set(self.observed_indices), set(self.unobserved_indices)
        if (o & u or o | u != set(range(dimension))
                or len(o) != len(self.observed_indices) or len(u) != len(self.unobserved_indices)):
            raise ConfigurationError(
                f"observed {sorted(o)} and unobserved {sorted(u)} do not partition "
                f"the {dimension} state indices"
            )


def pd_vector_field(prob):
    """``x' = -grad g(x) - E'nu + a(t)``, ``nu' = E x - q(t)``."""
    n, m = prob.n, prob.m
    E = prob.E

    def f(z, t):
        x, nu = z[:n], z[n:]
        xdot = -prob.objective.gradient(x) - E.T @ nu + prob.forcing_at(t)
        return np.concatenate([xdot, E @ x - prob.q(t)])

    affine = None
    if prob.is_quadratic:
        A = np.block([[-prob.objective.P, -E.T], [E, np.zeros((m, m))]])
        r = prob.objective.r

        def forcing(times):
            return np.hstack([prob.forcing_samples(times) - r, -prob.q.sample(times)])

        affine = AffinePart(A, forcing)
    return VectorField(n + m, f, "pd", affine)


def displacement_jacobian(prob, x, t):
    """``[[-H(x), -E'], [E, 0]]``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (prob.n,):
        raise DimensionError(f"x has shape {x.shape}, expected {(prob.n,)}")
    H = prob.hessian(x)
    return np.block([[-H, -prob.E.T], [prob.E, np.zeros((prob.m, prob.m))]])


def time_grid(t0, t1, step):
    """Uniform grid from ``t0`` with the last step shortened to land on ``t1``."""
    if not t1 > t0:
        raise ValueError(f"t1 ({t1}) must exceed t0 ({t0})")
    if not 0 < step <= (t1 - t0) * (1 + 1e-12):
        raise ValueError(f"step {step} must lie in (0, t1 - t0]")
    span = t1 - t0
    n_full = int(np.floor(span / step + 1e-9))
    times = t0 + step * np.arange(n_full + 1)
    if t1 - times[-1] > 1e-9 * step:
        times = np.append(times, t1)
    else:
        times[-1] = t1
    return times


def integrate(field, z0, t0, t1, step=DEFAULT_STEP):
    """Classical fixed-step RK4 from ``t0`` to ``t1``.

    Raises
    ------
    DivergenceError
        When a state component becomes non-finite or exceeds ``1e9``.
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.float64))
    if z0.shape != (field.dimension,):
        raise DimensionError(f"initial state has shape {z0.shape}, field dimension {field.dimension}")
    times = time_grid(t0, t1, step)
    steps = np.diff(times)
    if field.affine is not None:
        mids = times[:-1] + 0.5 * steps
        states, failed = rk4_affine(
            np.ascontiguousarray(field.affine.A, dtype=np.float64),
            np.ascontiguousarray(field.affine.sample(times)),
            np.ascontiguousarray(field.affine.sample(mids)),
            z0, steps, DIVERGENCE_LIMIT,
        )
        if failed >= 0:
            raise DivergenceError(
                f"{field.label}: state diverged after t={times[failed]:.6g}", float(times[failed])
            )
        return Trajectory(times, states, field.label)

    states = np.empty((times.size, z0.size))
    states[0] = z = z0
    f = field.evaluator
    for i, h in enumerate(steps):
        t = times[i]
        k1 = f(z, t)
        k2 = f(z + 0.5 * h * k1, t + 0.5 * h)
        k3 = f(z + 0.5 * h * k2, t + 0.5 * h)
        k4 = f(z + h * k3, t + h)
        z = z + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"{field.label}: state diverged after t={t:.6g}", float(t))
        states[i + 1] = z
    return Trajectory(times, states, field.label)


def perturbed_field(base, disturbance):
    """``f(z, t) + d(z, t)``.

    ``disturbance`` is a callable ``(z, t) -> vector`` or a :class:`VectorField`;
    two affine fields combine into an affine field.
    """
    d = disturbance
    affine = None
    if isinstance(d, VectorField):
        if d.dimension != base.dimension:
            raise DimensionError(f"disturbance dimension {d.dimension} != field dimension {base.dimension}")
        if base.affine is not None and d.affine is not None:
            fa, fb = base.affine, d.affine
            affine = AffinePart(fa.A + fb.A, lambda times: fa.sample(times) + fb.sample(times))
        d = d.evaluator

    def f(z, t):
        return base.evaluator(z, t) + d(z, t)

    return VectorField(base.dimension, f, base.label + "+perturbed", affine)


def splice_estimate(z, z_hat_u, obs):
    """Full estimate ``z_hat = (z_o, z_hat_u)``."""
    z_hat = np.array(z, dtype=np.float64)
    z_hat[..., list(obs.unobserved_indices)] = z_hat_u
    return z_hat


def augment_initial(z0, obs):
    """Augmented initial state with the estimate starting at the true value."""
    z0 = np.asarray(z0, dtype=np.float64)
    return np.concatenate([z0, z0[list(obs.unobserved_indices)]])


def observer_augmented_field(prob, obs):
    """Field on ``(z, z_hat_u)``: ``z' = f(z_hat, t)``, ``z_hat_u' = observer(z_hat_u, z_u)``."""
    base = pd_vector_field(prob)
    N = base.dimension
    obs.check_partition(N)
    U = list(obs.unobserved_indices)
    k = len(U)

    def f(w, t):
        z, zh_u = w[:N], w[N:]
        z_hat = z.copy()
        z_hat[U] = zh_u
        return np.concatenate([base.evaluator(z_hat, t), obs.observer_field(zh_u, z[U])])

    affine = None
    if base.affine is not None and obs.lag_time is not None:
        A = base.affine.A
        T = obs.lag_time
        A_aug = np.zeros((N + k, N + k))
        A_aug[:N, :N] = A
        A_aug[:N, U] = 0.0
        A_aug[:N, N:] = A[:, U]
        A_aug[N + np.arange(k), U] = 1.0 / T
        A_aug[N:, N:] = -np.eye(k) / T
        fb = base.affine

        def forcing(times):
            return np.hstack([fb.sample(times), np.zeros((np.size(times), k))])

        affine = AffinePart(A_aug, forcing)
    return VectorField(N + k, f, "pd+observer", affine)


def observer_disturbance(prob, obs):
    """``d(w, t) = f(z_hat, t) - f(z, t)`` evaluated on augmented states."""
    base = pd_vector_field(prob)
    N = base.dimension
    U = list(obs.unobserved_indices)

    def d(w, t):
        z = w[:N]
        z_hat = z.copy()
        z_hat[U] = w[N:]
        return base.evaluator(z_hat, t) - base.evaluator(z, t)

    return d


def state_names(prob, obs=None):
    names = [f"x{i}" for i in range(prob.n)] + [f"nu{j}" for j in range(prob.m)]
    if obs is not None:
        names += [f"{names[i]}_hat" for i in obs.unobserved_indices]
    return tuple(names)


__all__ = [
    "AffinePart", "VectorField", "Trajectory", "ObserverConfig", "pd_vector_field",
    "displacement_jacobian", "integrate", "perturbed_field", "observer_augmented_field",
    "observer_disturbance", "augment_initial", "splice_estimate", "time_grid", "state_names",
]
