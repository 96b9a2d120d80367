"""Time signals for the source term ``q(t)`` and additive forcings.

Each signal evaluates at a scalar time (returning a vector) and at an array
of times (returning one row per time), so integrators can sample forcing on
a whole grid at once.
"""
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError


def _vec(v):
    return np.atleast_1d(np.asarray(v, dtype=np.float64))


class Signal:
    dim: int

    def sample(self, times):
        """Evaluate on an array of times, shape ``(len(times), dim)``."""
        raise NotImplementedError

    def __call__(self, t):
        return self.sample(np.array([float(t)]))[0]

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Constant(Signal):
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", _vec(self.value))

    @property
    def dim(self):
        return self.value.size

    def sample(self, times):
        times = np.asarray(times, dtype=np.float64)
        return np.broadcast_to(self.value, (times.size, self.dim)).copy()

    def to_dict(self):
        return {"kind": "constant", "value": self.value.tolist()}


@dataclass(frozen=True, eq=False)
class Ramp(Signal):
    """``offset + slope * t``."""

    offset: np.ndarray
    slope: np.ndarray

    def __post_init__(self):
        offset, slope = np.broadcast_arrays(_vec(self.offset), _vec(self.slope))
        object.__setattr__(self, "offset", offset.copy())
        object.__setattr__(self, "slope", slope.copy())

    @property
    def dim(self):
        return self.offset.size

    def sample(self, times):
        times = np.asarray(times, dtype=np.float64)
        return self.offset + np.outer(times, self.slope)

    def to_dict(self):
        return {"kind": "ramp", "offset": self.offset.tolist(), "slope": self.slope.tolist()}


@dataclass(frozen=True, eq=False)
class Sinusoid(Signal):
    """``offset + amplitude * sin(omega * t + phase)``."""

    amplitude: np.ndarray
    omega: float
    phase: float = 0.0
    offset: np.ndarray = 0.0

    def __post_init__(self):
        amplitude, offset = np.broadcast_arrays(_vec(self.amplitude), _vec(self.offset))
        object.__setattr__(self, "amplitude", amplitude.copy())
        object.__setattr__(self, "offset", offset.copy())
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "phase", float(self.phase))

    @property
    def dim(self):
        return self.amplitude.size

    def sample(self, times):
        times = np.asarray(times, dtype=np.float64)
        return self.offset + np.outer(np.sin(self.omega * times + self.phase), self.amplitude)

    def to_dict(self):
        return {
            "kind": "sinusoid",
            "amplitude": self.amplitude.tolist(),
            "omega": self.omega,
            "phase": self.phase,
            "offset": self.offset.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Tabulated(Signal):
    """Piecewise-linear interpolation of tabulated values, held flat outside."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or t.size < 2 or v.shape[0] != t.size:
            raise ValueError("tabulated signal needs >= 2 times and one row of values per time")
        if np.any(np.diff(t) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dim(self):
        return self.values.shape[1]

    def sample(self, times):
        times = np.asarray(times, dtype=np.float64)
        cols = [np.interp(times, self.times, self.values[:, j]) for j in range(self.dim)]
        return np.stack(cols, axis=1)

    def to_dict(self):
        return {"kind": "tabulated", "times": self.times.tolist(), "values": self.values.tolist()}


def zero(dim):
    return Constant(np.zeros(dim))


def signal_from_dict(desc, path="signal"):
    """Build a signal from its tagged description (inverse of ``to_dict``)."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise SchemaError(f"{path}: expected an object with a 'kind' field", path)
    kind = desc["kind"]
    try:
        if kind == "constant":
            return Constant(desc["value"])
        if kind == "ramp":
            return Ramp(desc.get("offset", 0.0), desc["slope"])
        if kind == "sinusoid":
            return Sinusoid(
                desc["amplitude"], desc["omega"], desc.get("phase", 0.0), desc.get("offset", 0.0)
            )
        if kind == "tabulated":
            return Tabulated(desc["times"], desc["values"])
    except KeyError as exc:
        raise SchemaError(f"{path}: missing field {exc.args[0]!r}", f"{path}.{exc.args[0]}") from None
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}", path) from None
    raise SchemaError(f"{path}.kind: unknown signal kind {kind!r}", f"{path}.kind")
