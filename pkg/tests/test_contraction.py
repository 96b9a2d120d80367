import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pdcontract.contraction import (
    alpha_max,
    build_q,
    build_theta,
    certified_rate,
    certify,
    empirical_rate,
    theta_inverse,
    weighted_distance,
    weighted_norms,
)
from pdcontract.dynamics import Trajectory, VectorField, integrate, pd_vector_field
from pdcontract.errors import (
    DegeneratePairError,
    DimensionError,
    MetricError,
    WindowError,
)
from pdcontract.problem import make_problem, make_quadratic_problem


def two_node():
    return make_quadratic_problem(np.eye(2), [0.0, 0.0], [[1.0, -1.0]], [0.0])


def test_alpha_max_examples(scalar_problem):
    assert alpha_max(scalar_problem) == pytest.approx(0.8, abs=1e-12)
    assert alpha_max(two_node()) == pytest.approx(1.0 / 2.25, abs=1e-12)


def test_alpha_max_shrinks_with_larger_constraints():
    base = alpha_max(two_node())
    for c in (1.5, 2.0, 5.0):
        prob = make_quadratic_problem(np.eye(2), [0.0, 0.0], [[c, -c]], [0.0])
        assert alpha_max(prob) < base


def test_build_theta_examples():
    theta = build_theta([[1.0]], 0.4)
    assert np.allclose(theta, [[1.0, 0.4], [0.0, math.sqrt(0.84)]], atol=1e-14)
    theta = build_theta([[1.0, -1.0]], 0.4)
    assert theta.shape == (3, 3)
    assert theta[2, 2] == pytest.approx(math.sqrt(0.68), abs=1e-12)
    assert np.allclose(theta[:2, 2], [0.4, -0.4])
    assert np.allclose(build_theta([[1.0, -1.0]], 1e-12), np.eye(3), atol=1e-11)


def test_build_theta_rejects_large_alpha():
    with pytest.raises(MetricError):
        build_theta([[1.0]], 1.0)
    with pytest.raises(MetricError):
        build_theta([[1.0]], 0.0)


def test_theta_inverse_is_an_inverse(rng):
    for _ in range(10):
        E = oracles.random_full_row_rank(rng, 2, 4)
        alpha = 0.9 / oracles.spectral_norm(E)
        assert np.allclose(theta_inverse(E, alpha) @ build_theta(E, alpha), np.eye(6), atol=1e-10)


def test_build_q_examples():
    assert np.allclose(build_q([[1.0]], [[1.0]], 0.4), [[0.6, 0.2], [0.2, 0.4]], atol=1e-15)
    assert np.allclose(build_q([[1.0]], [[1.0]], 0.0), [[1.0, 0.0], [0.0, 0.0]])
    Q = build_q(np.eye(2), [[1.0, -1.0]], 0.2)
    assert np.allclose(Q[:2, :2], np.eye(2) - 0.2 * np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert min(oracles.eig_sym(Q)) > 0


def test_build_q_orientation_for_rectangular_constraints(rng):
    H = oracles.random_spd(rng, 3)
    E = oracles.random_full_row_rank(rng, 1, 3)
    Q = build_q(H, E, 0.1)
    assert np.allclose(Q[:3, 3:], 0.05 * H @ E.T)
    assert np.allclose(Q, Q.T)
    with pytest.raises(DimensionError):
        build_q(np.eye(2), E, 0.1)


def test_scalar_certificate_at_fixed_alpha(scalar_problem):
    cert = certify(scalar_problem, alpha=0.4)
    assert np.allclose(cert.q_form, [[0.6, 0.2], [0.2, 0.4]])
    assert np.allclose(cert.theta, [[1.0, 0.4], [0.0, math.sqrt(0.84)]])
    Ti = np.linalg.inv(cert.theta)
    ref = oracles.eig_sym(Ti.T @ cert.q_form @ Ti)[0]
    assert cert.beta == pytest.approx(ref, abs=1e-9)
    assert cert.beta > 0


def test_certify_rejects_alpha_outside_interval(scalar_problem):
    with pytest.raises(MetricError):
        certify(scalar_problem, alpha=0.85)


def test_golden_section_beats_grid_scan(scalar_problem):
    a_max = alpha_max(scalar_problem)
    cert = certify(scalar_problem)
    grid = np.linspace(1e-4, 0.999 * a_max, 1000)
    best = max(certified_rate(np.eye(1), np.eye(1), a) for a in grid)
    assert cert.beta >= best - 1e-6
    for frac in (0.5, 0.99):
        assert cert.beta >= certify(scalar_problem, alpha=frac * a_max).beta - 1e-9


def test_certificate_consistency_with_quadratic_form(rng):
    for _ in range(10):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, min(n, 4) + 1))
        prob = make_quadratic_problem(oracles.random_spd(rng, n), np.zeros(n),
                                      oracles.random_full_row_rank(rng, m, n), np.zeros(m))
        cert = certify(prob)
        dz = rng.standard_normal((1000, n + m))
        lhs = -np.einsum("ij,jk,ik->i", dz, cert.q_form, dz)
        rhs = -cert.beta * np.sum((dz @ cert.theta.T) ** 2, axis=1)
        assert np.all(lhs <= rhs + 1e-9 * np.maximum(1.0, np.abs(rhs)))


def test_weighted_norm_identity(rng):
    E = oracles.random_full_row_rank(rng, 2, 4)
    alpha = 0.5 / oracles.spectral_norm(E)
    theta = build_theta(E, alpha)
    for _ in range(50):
        dx, dnu = rng.standard_normal(4), rng.standard_normal(2)
        lhs = np.sum((theta @ np.concatenate([dx, dnu])) ** 2)
        rhs = np.sum((dx + alpha * E.T @ dnu) ** 2) + dnu @ (np.eye(2) - alpha**2 * E @ E.T) @ dnu
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_weighted_distance_examples():
    theta = build_theta([[1.0]], 0.4)
    assert weighted_distance(theta, [0.0, 1.0], [0.0, 0.0]) == pytest.approx(1.0, abs=1e-9)
    assert weighted_distance(theta, [3.0, -2.0], [3.0, -2.0]) == 0.0
    assert weighted_distance(np.eye(2), [3.0, 4.0], [0.0, 0.0]) == 5.0
    with pytest.raises(DimensionError):
        weighted_distance(theta, [1.0], [0.0])
    assert np.allclose(weighted_norms(None, [[3.0, 4.0]]), [5.0])


def test_empirical_rate_of_exponential_decay():
    f = VectorField(1, lambda z, t: -2.0 * z)
    a = integrate(f, [1.0], 0.0, 3.0, 1e-3)
    b = integrate(f, [-1.0], 0.0, 3.0, 1e-3)
    assert empirical_rate(a, b, None, (0.0, 3.0)) == pytest.approx(2.0, abs=1e-6)
    assert empirical_rate(a, b, np.eye(1), (1.0, 2.0)) == pytest.approx(2.0, abs=1e-6)


def test_empirical_rate_meets_certificate(scalar_problem):
    cert = certify(scalar_problem, alpha=0.4)
    f = pd_vector_field(scalar_problem)
    a = integrate(f, [0.0, 0.0], 0.0, 20.0, 1e-2)
    b = integrate(f, [1.0, 1.0], 0.0, 20.0, 1e-2)
    assert empirical_rate(a, b, cert.theta, (0.0, 20.0)) >= 0.95 * cert.beta


def test_empirical_rate_errors():
    times = np.linspace(0.0, 1.0, 11)
    eq = Trajectory(times, np.ones((11, 2)))
    with pytest.raises(DegeneratePairError):
        empirical_rate(eq, eq, None, (0.0, 1.0))
    other = Trajectory(times, np.zeros((11, 2)))
    with pytest.raises(WindowError):
        empirical_rate(eq, other, None, (0.5, 2.0))
    with pytest.raises(WindowError):
        empirical_rate(eq, other, None, (0.51, 0.55))
    with pytest.raises(WindowError):
        empirical_rate(eq, Trajectory(times * 2, np.zeros((11, 2))), None, (0.0, 1.0))


def test_callable_problem_certifies_with_worst_case_hessian():
    prob = make_problem(np.sinh, lambda x: np.diag(np.cosh(x)), [[1.0, 1.0]], [0.5], (1.0, math.cosh(3.0)))
    cert = certify(prob)
    # the worst case over the Hessian range is at least as slow as either endpoint alone
    for h in (1.0, math.cosh(3.0)):
        assert cert.beta <= certified_rate(h * np.eye(2), prob.E, cert.alpha) + 1e-12
    assert cert.beta > 0


def test_certificate_serializes(scalar_problem):
    d = certify(scalar_problem, alpha=0.4).to_dict()
    assert d["alpha"] == 0.4
    assert np.allclose(d["q_form"], [[0.6, 0.2], [0.2, 0.4]])
    assert d["beta"] > 0 and d["constraint_matrix"] == [[1.0]]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_certificates_are_positive_definite(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 11))
    m = int(rng.integers(1, min(n, 5) + 1))
    prob = make_quadratic_problem(oracles.random_spd(rng, n), rng.standard_normal(n),
                                  oracles.random_full_row_rank(rng, m, n), rng.standard_normal(m))
    cert = certify(prob)
    assert 0 < cert.alpha < cert.alpha_max
    assert np.min(np.linalg.eigvalsh(cert.q_form)) > 0
    assert np.min(np.linalg.eigvalsh(cert.theta.T @ cert.theta)) > 0
    assert np.min(np.linalg.svd(cert.theta, compute_uv=False)) > 1e-10
    Ti = np.linalg.inv(cert.theta)
    assert cert.beta == pytest.approx(np.min(np.linalg.eigvalsh(Ti.T @ cert.q_form @ Ti)), abs=1e-9)
