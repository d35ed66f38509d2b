from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import solve_continuous_lyapunov

from oracles import KEYFRAMES, transform
from scaleform.errors import ArgumentError, DivergenceError, SingularityError
from scaleform.formation import ManeuverParams, NominalScene, apply_maneuver
from scaleform.graph import Dep, DepDecomposition, SensingGraph, build_dep_induced
from scaleform.laplacian import assemble_laplacian
from scaleform.schedule import ManeuverKeyframe, ManeuverSchedule, build_schedule
from scaleform.simulator import (
    SimConfig,
    Trajectory,
    compute_errors,
    control_moving,
    control_stationary,
    control_pipeline,
    fit_decay_rate,
    follower_velocity,
    leader_reference,
    moving_law,
    rk4_step,
    run_simulation,
    stationary_law,
)
from scaleform.stabilizer import synthesize_stabilizer


@pytest.fixture(scope="module")
def schedule():
    return build_schedule([ManeuverKeyframe.from_row(r) for r in KEYFRAMES])


@pytest.fixture(scope="module")
def stab(pipeline):
    dec, control, lap = pipeline
    return synthesize_stabilizer(control, dec, lap)


def target_at(scene, schedule, t):
    z, _ = schedule.z(t)
    return transform(scene.g_tilde, z[:3], z[3:], scene.theta)


def test_config_validation():
    with pytest.raises(ArgumentError):
        SimConfig(dt=0.0)
    with pytest.raises(ArgumentError):
        SimConfig(mode="hover")
    with pytest.raises(ArgumentError):
        SimConfig(k_f=-1.0)
    SimConfig(mode="stationary", k_f=-1.0)


def test_leader_reference_constant_schedule(scene):
    p = ManeuverParams((2, 1, 0.5), (1, 2, 3))
    g, v = leader_reference(scene, ManeuverSchedule.constant(p), 3.0)
    assert np.allclose(g, apply_maneuver(scene.leader_states(), p, scene.theta))
    assert not v.any()


def test_leader_reference_identity(scene):
    g, _ = leader_reference(scene, ManeuverSchedule.constant(ManeuverParams()), 0.0)
    assert np.allclose(g, scene.leader_states())


def test_leader_velocity_central_difference(scene, schedule):
    h = 1e-5
    for t in (1.0, 7.3, 22.2, 38.9):
        gp, _ = leader_reference(scene, schedule, t + h)
        gm, _ = leader_reference(scene, schedule, t - h)
        _, v = leader_reference(scene, schedule, t)
        assert np.allclose((gp - gm) / (2 * h), v, atol=1e-5)


def test_stationary_equilibrium(pipeline, stab, rng):
    dec, control, lap = pipeline
    for _ in range(5):
        p = ManeuverParams(rng.uniform(-3, 3, 3), rng.uniform(-10, 10, 3))
        g = apply_maneuver(control.g_tilde, p, control.theta)
        assert np.abs(control_stationary(g, control, lap, stab.D)).max() < 1e-10


def test_stationary_per_agent_matches_compiled(pipeline, stab, rng):
    dec, control, lap = pipeline
    law = stationary_law(control, lap, stab.D)
    for _ in range(5):
        g = rng.normal(size=(9, 3)) * 3
        ref = control_stationary(g, control, lap, stab.D)
        assert np.allclose(law(g.ravel(), np.zeros(6), np.zeros(6)), ref.ravel(), atol=1e-10)


def test_stationary_translation_equivariance(pipeline, stab, rng):
    _, control, lap = pipeline
    g = rng.normal(size=(9, 3)) * 3
    shift = rng.normal(size=3) * 5
    a = control_stationary(g, control, lap, stab.D)
    b = control_stationary(g + shift, control, lap, stab.D)
    assert np.allclose(a, b, atol=1e-10)


def test_stationary_lyapunov_decrease(pipeline, stab, rng):
    dec, control, lap = pipeline
    law = stationary_law(control, lap, stab.D)
    A = law.K[6:, 6:]
    # P solves A^T P + P A = -I, so V = e^T P e strictly decreases for every error e
    P = solve_continuous_lyapunov(A.T, -np.eye(21))
    assert np.all(np.linalg.eigvalsh((P + P.T) / 2) > 0)
    target = control.g_tilde.ravel()
    for _ in range(100):
        y = target.copy()
        y[6:] += rng.normal(size=21)
        e = y[6:] - target[6:]
        v_dot = 2 * e @ P @ (law.K @ y)[6:]
        assert np.isclose(v_dot, -e @ e, rtol=1e-6)
        y1 = rk4_step(lambda _t, v: law.K @ v, 0.0, y, 1e-3)
        e1 = y1[6:] - target[6:]
        assert e1 @ P @ e1 < e @ P @ e


def test_isolated_follower_gets_zero(scene):
    lap = assemble_laplacian(scene.with_graph(SensingGraph(9, [(1, 4), (2, 4)])))
    g = np.arange(27.0).reshape(9, 3)
    out = control_stationary(g, scene, lap, np.ones(21))
    # only agent 4 owns a triple; agent 3 and the rest get an empty sum
    assert not np.delete(out, 3, axis=0).any()
    assert out[3].any()


def test_moving_equilibrium_when_reference_static(pipeline):
    dec, control, _ = pipeline
    p = ManeuverParams((2, 0.5, 1.5), (1, -2, 0.3))
    sch = ManeuverSchedule.constant(p)
    g = apply_maneuver(control.g_tilde, p, control.theta)
    assert np.abs(control_moving(g, control, dec, 4.0, sch, 2.0, 2.0)).max() < 1e-10


def test_moving_follower_error_rate(pipeline, schedule, rng):
    dec, control, _ = pipeline
    k_f = 2.0
    h = 1e-6
    for t in (3.0, 17.0, 31.0):
        ref = target_at(control, schedule, t)
        v_ref = (target_at(control, schedule, t + h) - target_at(control, schedule, t - h)) / (2 * h)
        g = ref.copy()
        g[2:] += rng.normal(size=(7, 3))
        vel = control_moving(g, control, dec, t, schedule, 2.0, k_f)
        # leaders on reference: follower error obeys delta_dot = -k_f delta
        assert np.allclose(vel[2:] - v_ref[2:], -k_f * (g[2:] - ref[2:]), atol=1e-5)


def test_moving_satisfies_each_agents_law(pipeline, schedule, rng):
    from scaleform.laplacian import follower_triples

    dec, control, _ = pipeline
    g = rng.normal(size=(9, 3)) * 2
    vel = control_moving(g, control, dec, 8.0, schedule, 1.5, 2.5)
    for k, triple in follower_triples(dec).items():
        assert np.allclose(vel[k - 1], follower_velocity(control, triple, g, vel, 2.5), atol=1e-9)


def test_moving_per_agent_matches_compiled(pipeline, schedule, rng):
    dec, control, lap = pipeline
    law = moving_law(control, lap, 1.5, 2.5)
    for t in (0.0, 12.3, 44.0):
        g = rng.normal(size=(9, 3)) * 3
        z, dz = schedule.z(t)
        ref = control_moving(g, control, dec, t, schedule, 1.5, 2.5)
        assert np.allclose(law(g.ravel(), z, dz), ref.ravel(), atol=1e-9)


def test_moving_rejects_singular_w_kk():
    g = np.array([[0, 0, 1], [2, 1, 1], [1, 3, 0]], dtype=float)  # neighbours 1 and 2 share a yaw
    dep = Dep(1, 2, (3,))
    scene = NominalScene(build_dep_induced((1, 2), [dep]).symmetrized(), g)
    dec = DepDecomposition(3, (1, 2), (dep,))
    with pytest.raises(SingularityError):
        control_moving(g, scene, dec, 0.0, ManeuverSchedule.constant(ManeuverParams()), 1.0, 1.0)
    with pytest.raises(SingularityError):
        run_simulation(scene, SimConfig(t_end=0.1), ManeuverSchedule.constant(ManeuverParams()), dec)


def test_rk4_exact_for_cubic():
    f = lambda t, y: np.array([3 * t**2])  # noqa: E731
    y = rk4_step(f, 1.0, np.array([1.0]), 0.5)
    assert np.isclose(y[0], 1.0 + 1.5**3 - 1.0)


def test_zero_length_run_is_constant(scene, schedule):
    traj = run_simulation(scene, SimConfig(t_end=0.0), schedule)
    assert len(traj) == 1


def test_run_from_reference_stays_on_reference(scene):
    p = ManeuverParams((1.5, 0.5, 2.0), (3, -1, 0.2))
    g0 = apply_maneuver(scene.g_tilde, p, scene.theta)
    traj = run_simulation(scene, SimConfig(t_end=2.0, dt=0.01, initial=g0), ManeuverSchedule.constant(p))
    assert np.abs(traj.g - g0).max() < 1e-10
    rep = compute_errors(traj)
    assert rep.final_f < 1e-10
    assert rep.rate_f is None


def test_runs_are_deterministic(scene, schedule):
    cfg = SimConfig(t_end=1.0, dt=0.01, seed=5)
    a = run_simulation(scene, cfg, schedule)
    b = run_simulation(scene, cfg, schedule)
    assert np.array_equal(a.g, b.g)
    c = run_simulation(scene, SimConfig(t_end=1.0, dt=0.01, seed=6), schedule)
    assert not np.array_equal(a.g, c.g)


def test_stationary_leaders_pinned(scene, schedule):
    traj = run_simulation(scene, SimConfig(mode="stationary", t_end=1.0, dt=0.01), schedule)
    assert np.allclose(traj.g[:, :2], traj.g_ref[0, :2])
    assert not traj.delta_l_norm.any()


def test_divergence_reported(scene, schedule, stab):
    from scaleform.stabilizer import Stabilizer

    bad = Stabilizer(stab.blocks, stab.methods, -1e3 * stab.D, -1.0)
    with pytest.raises(DivergenceError) as info:
        run_simulation(scene, SimConfig(mode="stationary", t_end=200.0, dt=0.01), schedule, stabilizer=bad)
    assert info.value.time > 0
    assert np.all(np.isfinite(info.value.trajectory.g))


def test_two_leaders_required(scene, schedule):
    sc = NominalScene(scene.graph, scene.g_tilde, leaders=(1, 2, 3))
    with pytest.raises(ArgumentError):
        run_simulation(sc, SimConfig(t_end=0.1), schedule)


def test_fit_decay_rate_on_exponential():
    t = np.linspace(0, 10, 1001)
    assert np.isclose(fit_decay_rate(t, 3 * np.exp(-1.7 * t)), 1.7)
    assert fit_decay_rate(t, np.zeros_like(t)) is None


def test_fit_ignores_noise_floor():
    t = np.linspace(0, 40, 4001)
    e = np.maximum(np.exp(-2 * t), 1e-17)
    assert np.isclose(fit_decay_rate(t, e), 2.0, rtol=1e-6)


def test_trajectory_error_views():
    t = np.arange(3.0)
    g = np.zeros((3, 4, 3))
    ref = np.zeros((3, 4, 3))
    g[:, 0, 0] = 3.0
    g[:, 3, 1] = 4.0
    traj = Trajectory(t, g, ref, 2)
    assert np.allclose(traj.delta_l_norm, 3.0)
    assert np.allclose(traj.delta_f_norm, 4.0)
    assert traj.delta_f.shape == (3, 2, 3)


def test_control_pipeline_uses_dep_subgraph(scene):
    dec, control, lap = control_pipeline(scene)
    assert control.graph == dec.induced_graph()
    assert len(lap.triples) == scene.n - scene.m
