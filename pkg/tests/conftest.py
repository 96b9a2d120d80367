import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from pdcontract import _kernels_py  # noqa: E402
from pdcontract.problem import make_quadratic_problem  # noqa: E402

try:
    from pdcontract import _kernels
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="compiled"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route matrixcore and the integrator through one kernel implementation."""
    monkeypatch.setattr("pdcontract.matrixcore.jacobi_eigh", request.param.jacobi_eigh)
    monkeypatch.setattr("pdcontract.dynamics.rk4_affine", request.param.rk4_affine)
    return request.param


@pytest.fixture
def scalar_problem():
    return make_quadratic_problem([[1.0]], [0.0], [[1.0]], [1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
