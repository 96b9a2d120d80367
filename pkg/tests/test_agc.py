import json
import math

import numpy as np
import pytest

from pdcontract.agc import (
    AgcConfig,
    agc_delayed_field,
    agc_model,
    agc_true_field,
    build_agc_problem,
    initial_state,
    run_agc_demo,
    stacked_constraints,
)
from pdcontract.contraction import certify
from pdcontract.dynamics import Trajectory, VectorField, integrate, pd_vector_field
from pdcontract.errors import ConditionError, ConfigurationError, RankError
from pdcontract.problem import optimum_path

RING = AgcConfig(n_gen=2, D=((1.0, 0.0), (0.0, 2.0)), B=((2.0,),), E=((1.0, -1.0),), k=(1.0, 0.5))


def hand_rhs(cfg, omega, p, u, t, u_seen=None):
    """Frequency, line and AGC equations written out term by term."""
    n, L = cfg.n_gen, cfg.lines
    D, B, E, k = cfg.D_matrix, cfg.B_matrix, cfg.E_matrix, cfg.k_vector
    u_seen = u if u_seen is None else u_seen
    d_omega = np.zeros(n)
    for i in range(n):
        flow = sum(math.sqrt(B[l, l]) * E[l, i] * p[l] for l in range(L))
        d_omega[i] = -D[i, i] * omega[i] - flow + k[i] * u_seen + cfg.amplitude * math.sin(cfg.omega * t)
    d_p = np.array([math.sqrt(B[l, l]) * sum(E[l, i] * omega[i] for i in range(n)) for l in range(L)])
    d_u = -sum(k[i] * omega[i] for i in range(n))
    return d_omega, d_p, d_u


@pytest.mark.parametrize("cfg", [AgcConfig(), RING], ids=["smib", "ring"])
def test_true_field_matches_hand_coded_equations(cfg, rng):
    f = agc_true_field(cfg)
    n, L = cfg.n_gen, cfg.lines
    for _ in range(1000):
        z, t = rng.standard_normal(n + L + 1), rng.uniform(0, 50)
        d_omega, d_p, d_u = hand_rhs(cfg, z[:n], z[n:n + L], z[-1], t)
        expected = np.concatenate([d_omega, d_p, [d_u]])
        assert np.allclose(f(z, t), expected, rtol=0, atol=1e-12)


def test_delayed_field_matches_hand_coded_equations(rng):
    cfg = AgcConfig()
    f = agc_delayed_field(cfg)
    for _ in range(200):
        w, t = rng.standard_normal(4), rng.uniform(0, 50)
        d_omega, d_p, d_u = hand_rhs(cfg, w[:1], w[1:2], w[2], t, u_seen=w[3])
        expected = np.concatenate([d_omega, d_p, [d_u, (w[2] - w[3]) / cfg.T]])
        assert np.allclose(f(w, t), expected, rtol=0, atol=1e-12)


def test_ring_field_is_the_pd_flow_of_its_problem(rng):
    prob = build_agc_problem(RING)
    f, g = agc_true_field(RING), pd_vector_field(prob)
    for _ in range(1000):
        z, t = rng.standard_normal(4), rng.uniform(0, 50)
        assert np.allclose(f(z, t), g(z, t), rtol=0, atol=1e-12)


def test_smib_stacking_is_rank_deficient():
    assert stacked_constraints(AgcConfig()).tolist() == [[1.0], [-1.0]]
    with pytest.raises(RankError):
        build_agc_problem(AgcConfig())


def test_smib_reduction_preserves_the_flow(rng):
    model = agc_model(AgcConfig())
    assert model.reduced
    assert np.allclose(model.problem.E, [[math.sqrt(2.0)]])
    f_full, f_red = agc_true_field(model.config), pd_vector_field(model.problem)
    for _ in range(200):
        z, t = rng.standard_normal(3), rng.uniform(0, 50)
        lhs = model.project(f_full(z, t))[0]
        rhs = f_red(model.project(z)[0], t)
        assert np.allclose(lhs, rhs, atol=1e-12)
    # the orthogonal dual combination p + u never moves
    traj = integrate(f_full, initial_state(model.config), 0.0, 10.0, 1e-2)
    assert np.allclose(traj.states[:, 1] + traj.states[:, 2], 0.0, atol=1e-12)


def test_zero_gains_are_rejected():
    with pytest.raises(RankError):
        build_agc_problem(AgcConfig(k=(0.0,)))
    with pytest.raises(RankError):
        agc_model(AgcConfig(k=(0.0,)))


def test_ring_with_distinct_gains_certifies():
    model = agc_model(RING)
    assert not model.reduced
    cert = certify(model.problem)
    assert cert.beta > 0
    Ti = np.linalg.inv(cert.theta)
    assert cert.beta == pytest.approx(np.min(np.linalg.eigvalsh(Ti.T @ cert.q_form @ Ti)), abs=1e-9)


@pytest.mark.parametrize("changes", [
    {"D": ((1.0, 0.5), (0.5, 1.0)), "n_gen": 2, "E": ((1.0, -1.0),), "k": (1.0, 1.0)},
    {"D": ((-1.0,),)},
    {"B": ((1.0, 0.0), (0.0, 1.0))},
    {"k": (1.0, 2.0)},
    {"T": 0.0},
    {"E": ((1.0,), (1.0,))},
])
def test_config_validation(changes):
    with pytest.raises(ConfigurationError):
        AgcConfig().replace(**changes)


def test_config_dict_roundtrip():
    assert AgcConfig.from_dict(RING.to_dict()) == RING
    assert json.loads(json.dumps(AgcConfig().to_dict()))["D"] == [[1.0]]


def test_delay_gap_shrinks_with_the_time_constant():
    base = AgcConfig()
    gaps = []
    for T in (0.1, 0.01, 0.001):
        cfg = base.replace(T=T)
        step = min(1e-3, T / 10)
        a = integrate(agc_delayed_field(cfg), initial_state(cfg, True), 0.0, 10.0, step)
        b = integrate(agc_true_field(cfg), initial_state(cfg), 0.0, 10.0, step)
        gaps.append(np.max(np.abs(a.states[:, :3] - b.states)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-3


def test_frequency_settles_without_disturbance():
    cfg = AgcConfig(amplitude=0.0)
    beta = certify(agc_model(cfg).problem).beta
    t_settle = 20.0 / beta
    for fld, z0 in ((agc_true_field(cfg), initial_state(cfg)), (agc_delayed_field(cfg), initial_state(cfg, True))):
        traj = integrate(fld, z0, 0.0, t_settle + 5.0, 1e-3)
        assert np.max(np.abs(traj.states[traj.times >= t_settle, 0])) <= 1e-6


def test_undisturbed_distance_to_optimum_never_grows():
    cfg = AgcConfig(amplitude=0.0)
    model = agc_model(cfg)
    traj = integrate(agc_true_field(cfg), [0.3, -0.2, 0.5], 0.0, 30.0, 1e-2)
    z_star = optimum_path(model.problem, traj.times)
    reduced = np.linalg.norm(model.project(traj.states) - z_star, axis=1)
    assert np.all(np.diff(reduced) <= 1e-8)
    # the full coordinates are contracting in the same sense; their optimum is the origin
    assert np.all(np.diff(np.linalg.norm(traj.states, axis=1)) <= 1e-8)


def test_large_time_constant_freezes_the_agc():
    cfg = AgcConfig(T=1e6)
    frozen = AgcConfig(k=(1.0,))
    z0 = np.array([0.1, 0.05, 0.2])
    delayed = integrate(agc_delayed_field(cfg), np.append(z0, z0[2]), 0.0, 5.0, 1e-3)

    def frozen_field(z, t):
        d_omega, d_p, d_u = hand_rhs(frozen, z[:1], z[1:2], z[2], t, u_seen=z0[2])
        return np.concatenate([d_omega, d_p, [d_u]])

    ref = integrate(VectorField(3, frozen_field), z0, 0.0, 5.0, 1e-3)
    assert np.max(np.abs(delayed.states[:, :3] - ref.states)) < 1e-5


def test_disturbance_frequency_scales_the_bound_linearly():
    a = run_agc_demo(AgcConfig(), t1=20.0, step=1e-2)
    b = run_agc_demo(AgcConfig(omega=1.0), t1=20.0, step=1e-2)
    # optimum speeds come from central differences, exact up to O(h^2 Omega^3)
    assert b.sup_rate == pytest.approx(2.0 * a.sup_rate, rel=1e-7)
    assert b.bound == pytest.approx(2.0 * a.bound, rel=1e-7)


def test_slow_turbine_violates_the_condition():
    with pytest.raises(ConditionError) as info:
        run_agc_demo(AgcConfig(T=2.0), t1=20.0, step=1e-2)
    assert "smaller turbine time constant" in str(info.value)


def test_undisturbed_demo_error_decays():
    demo = run_agc_demo(AgcConfig(amplitude=0.0), t1=60.0)
    assert demo.bound == 0.0
    assert demo.report.observed_sup <= 1e-3 * demo.error_theta[0]
    assert demo.error_theta[-1] <= 1e-8


@pytest.fixture(scope="module")
def default_demo(tmp_path_factory):
    out = tmp_path_factory.mktemp("agc")
    return run_agc_demo(out_dir=out), out


def test_default_demo_is_satisfied(default_demo):
    demo, _ = default_demo
    assert demo.report.satisfied
    assert demo.report.bound_id == "thm1_tracking_observer"
    assert demo.beta_hat == pytest.approx(10.0)
    assert demo.lipschitz.xi == pytest.approx(math.sqrt(2.0), rel=1e-9)
    assert demo.report.observed_sup_euclidean is not None


def test_default_demo_artifacts(default_demo):
    demo, out = default_demo
    lines = (out / "agc_error.csv").read_text().splitlines()
    assert lines[0] == "t,error,bound"
    assert len(lines) == demo.delayed.times.size + 1
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.array_equal(rows[:, 0], demo.delayed.times)
    assert np.array_equal(rows[:, 1], demo.error_theta)
    report = json.loads((out / "agc_report.json").read_text())
    assert report["report"]["satisfied"] is True
    assert report["reduced"] is True
    assert report["stacked_constraints"] == [[1.0], [-1.0]]
    assert np.allclose(report["certificate"]["constraint_matrix"], [[math.sqrt(2.0)]])


def test_trajectories_carry_state_names(default_demo):
    demo, _ = default_demo
    assert demo.delayed.names == ("omega0", "p0", "u_agc", "u_agc_hat")
    assert isinstance(demo.true, Trajectory) and demo.true.names == ("omega0", "p0", "u_agc")
