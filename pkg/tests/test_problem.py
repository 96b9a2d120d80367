import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pdcontract.errors import (
    ConvexityError,
    DimensionError,
    GraphError,
    OptimizerError,
    RankError,
    SchemaError,
)
from pdcontract.problem import (
    PDState,
    incidence_from_edges,
    instantaneous_optimum,
    kkt_residual,
    lagrangian_value,
    make_problem,
    make_quadratic_problem,
    optimum_path,
    optimum_rate,
    sup_optimum_rate,
)
from pdcontract.signals import Constant, Ramp, Sinusoid, Tabulated, signal_from_dict


def test_scalar_problem_shape_and_bounds(scalar_problem):
    assert (scalar_problem.n, scalar_problem.m) == (1, 1)
    assert scalar_problem.hessian_bounds == (1.0, 1.0)


def test_two_node_problem_accepted():
    prob = make_quadratic_problem(np.eye(2), [0, 0], [[1, -1]], [0.0])
    assert prob.hessian_bounds == pytest.approx((1.0, 1.0))


def test_duplicated_row_is_rank_deficient():
    with pytest.raises(RankError) as info:
        make_quadratic_problem(np.eye(2), [0, 0], [[1, -1], [-1, 1]], [0.0, 0.0])
    assert info.value.singular_value < 1e-10


def test_more_duals_than_primals_rejected():
    with pytest.raises(RankError):
        make_quadratic_problem([[1.0]], [0.0], [[1.0], [2.0]], [0.0, 0.0])


def test_indefinite_objective_rejected():
    with pytest.raises(ConvexityError):
        make_quadratic_problem(np.diag([1.0, -1.0]), [0, 0], [[1, 1]], [0.0])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        make_quadratic_problem(np.eye(3), [0, 0, 0], [[1, -1]], [0.0])
    with pytest.raises(DimensionError):
        make_quadratic_problem(np.eye(2), [0, 0], [[1, -1]], [0.0, 1.0])


def test_incidence_examples():
    assert incidence_from_edges([(0, 1)], 2).tolist() == [[1, -1]]
    assert incidence_from_edges([(0, 1), (1, 2)], 3).tolist() == [[1, -1, 0], [0, 1, -1]]
    with pytest.raises(GraphError):
        incidence_from_edges([(0, 0)], 1)
    with pytest.raises(GraphError):
        incidence_from_edges([(0, 3)], 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)).filter(lambda e: e[0] != e[1]),
                min_size=1, max_size=12))
def test_incidence_rows_sum_to_zero(edges):
    E = incidence_from_edges(edges, 8)
    assert np.all(E.sum(axis=1) == 0)
    assert np.all((E == 1).sum(axis=1) == 1) and np.all((E == -1).sum(axis=1) == 1)


def test_lagrangian_examples(scalar_problem):
    assert lagrangian_value(scalar_problem, PDState(np.array([1.0]), np.array([-1.0])), 0.0) == 0.5
    assert lagrangian_value(scalar_problem, np.array([0.0, 2.0]), 0.0) == -2.0
    prob = make_quadratic_problem(np.diag([2.0, 3.0]), [1.0, -1.0], [[1, -1]], [0.0])
    assert lagrangian_value(prob, np.zeros(3), 0.0) == 0.0


def test_scalar_optimum(scalar_problem):
    z = instantaneous_optimum(scalar_problem, 0.0)
    assert z.x.tolist() == pytest.approx([1.0]) and z.nu.tolist() == pytest.approx([-1.0])


def test_zero_source_optimum_is_origin():
    prob = make_quadratic_problem(oracles.random_spd(np.random.default_rng(1), 4), np.zeros(4),
                                  [[1, 0, -1, 0], [0, 1, 0, -1]], [0.0, 0.0])
    assert np.allclose(instantaneous_optimum(prob, 3.0).as_vector(), 0.0, atol=1e-14)


def test_two_node_optimum_by_hand():
    prob = make_quadratic_problem(np.eye(2), [1.0, 1.0], [[1, -1]], [0.0])
    z = instantaneous_optimum(prob, 0.0)
    assert np.allclose(z.x, [-1.0, -1.0], atol=1e-14)
    assert np.allclose(z.nu, [0.0], atol=1e-14)


def test_optimum_matches_dense_kkt_solve(rng):
    for _ in range(30):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, n + 1))
        P = oracles.random_spd(rng, n)
        E = oracles.random_full_row_rank(rng, m, n)
        r, q = rng.standard_normal(n), rng.standard_normal(m)
        prob = make_quadratic_problem(P, r, E, q)
        K = np.block([[P, E.T], [E, np.zeros((m, m))]])
        ref = np.linalg.solve(K, np.concatenate([-r, q]))
        z = instantaneous_optimum(prob, 0.0).as_vector()
        assert np.allclose(z, ref, atol=1e-9)
        assert np.max(np.abs(kkt_residual(prob, z, 0.0))) <= 1e-9


def test_optimum_is_a_saddle(rng):
    P = oracles.random_spd(rng, 4)
    E = oracles.random_full_row_rank(rng, 2, 4)
    prob = make_quadratic_problem(P, rng.standard_normal(4), E, rng.standard_normal(2))
    z = instantaneous_optimum(prob, 0.0)
    val = lagrangian_value(prob, z, 0.0)
    for _ in range(200):
        dx, dnu = rng.standard_normal(4), rng.standard_normal(2)
        assert lagrangian_value(prob, PDState(z.x, z.nu + dnu), 0.0) <= val + 1e-9
        assert lagrangian_value(prob, PDState(z.x + dx, z.nu), 0.0) >= val - 1e-9


def test_forcing_shifts_stationarity():
    prob = make_quadratic_problem(np.eye(2), [0, 0], [[1, -1]], [0.0], forcing=Constant([1.0, 0.0]))
    z = instantaneous_optimum(prob, 0.0)
    assert np.max(np.abs(kkt_residual(prob, z, 0.0))) < 1e-14
    assert np.allclose(z.x, [0.5, 0.5])


def test_callable_problem_newton_matches_closed_form():
    # g(x) = sum cosh(x_i): Hessian diag(cosh x) in [1, cosh 3] on the audited box
    prob = make_problem(np.sinh, lambda x: np.diag(np.cosh(x)), [[1.0, 1.0]], [0.5], (1.0, math.cosh(3.0)),
                        value=lambda x: float(np.sum(np.cosh(x))))
    z = instantaneous_optimum(prob, 0.0)
    assert np.allclose(z.x, [0.25, 0.25], atol=1e-10)
    assert z.nu[0] == pytest.approx(-math.sinh(0.25), abs=1e-10)
    assert np.max(np.abs(kkt_residual(prob, z, 0.0))) <= 1e-10


def test_callable_hessian_audit_rejects_bad_bounds():
    with pytest.raises(ConvexityError):
        make_problem(np.sinh, lambda x: np.diag(np.cosh(x)), [[1.0, 1.0]], [0.5], (1.0, 1.2))


def test_newton_failure_raises_optimizer_error():
    # the second stationarity component stays >= 0.5, so no KKT point exists
    def grad(x):
        return np.array([x[0], 1.0 + 0.5 * np.sin(x[1])])

    prob = make_problem(grad, lambda x: np.eye(2), [[1.0, 0.0]], [0.0], (1.0, 1.0), audit_points=[[0.0, 0.0]])
    with pytest.raises(OptimizerError) as info:
        instantaneous_optimum(prob, 0.0)
    assert info.value.residual >= 0.5


def test_optimum_rate_static_source(scalar_problem):
    assert optimum_rate(scalar_problem, 2.0) <= 1e-9


def test_optimum_rate_ramp():
    prob = make_quadratic_problem([[1.0]], [0.0], [[1.0]], Ramp(0.0, 1.0))
    assert optimum_rate(prob, 3.0) == pytest.approx(math.sqrt(2.0), abs=1e-9)
    assert np.allclose(optimum_path(prob, [2.0])[0], [2.0, -2.0])


def test_optimum_rate_sinusoid():
    prob = make_quadratic_problem([[1.0]], [0.0], [[1.0]], Sinusoid(1.0, 1.0))
    assert optimum_rate(prob, 0.0, h=1e-4) == pytest.approx(math.sqrt(2.0), abs=1e-6)


def test_sup_rate_in_metric():
    prob = make_quadratic_problem([[1.0]], [0.0], [[1.0]], Sinusoid(0.2, 0.5))
    # z*' = 0.1 cos(0.5 t) (1, -1); Theta (1, -1) = (1 - a, -sqrt(1 - a^2))
    a = 0.4
    theta = np.array([[1.0, a], [0.0, math.sqrt(1 - a * a)]])
    expected = 0.1 * math.hypot(1 - a, math.sqrt(1 - a * a))
    assert sup_optimum_rate(prob, 0.0, 20.0, theta) == pytest.approx(expected, rel=1e-7)


def test_pdstate_roundtrip():
    z = PDState(np.array([1.0, 2.0]), np.array([3.0]))
    assert PDState.from_vector(z.as_vector(), 2).as_vector().tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        PDState(np.array([np.inf]), np.array([0.0]))


def test_signals_sample_shapes():
    times = np.linspace(0.0, 1.0, 5)
    for sig in (Constant([1.0, 2.0]), Ramp([0.0, 1.0], [1.0, -1.0]), Sinusoid([1.0, 0.5], 2.0),
                Tabulated([0.0, 1.0], [[0.0, 0.0], [1.0, 2.0]])):
        assert sig.sample(times).shape == (5, 2)
        assert np.allclose(sig(0.5), sig.sample([0.5])[0])
        assert np.allclose(signal_from_dict(sig.to_dict()).sample(times), sig.sample(times))


def test_tabulated_interpolates_linearly():
    sig = Tabulated([0.0, 2.0], [[0.0], [4.0]])
    assert sig(0.5)[0] == pytest.approx(1.0)


def test_signal_schema_errors_name_the_path():
    with pytest.raises(SchemaError) as info:
        signal_from_dict({"kind": "sinusoid", "omega": 1.0}, "problem.q")
    assert info.value.path == "problem.q.amplitude"
    with pytest.raises(SchemaError) as info:
        signal_from_dict({"kind": "square"}, "problem.q")
    assert info.value.path == "problem.q.kind"
