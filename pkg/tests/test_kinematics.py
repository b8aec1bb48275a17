import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tactrack.geom import Twist
from tactrack.kinematics import (
    ContactObservation,
    EmptyObservation,
    estimate_kinematics,
    kinematic_energy,
    solve_center_fixed_twist,
    solve_twist_fixed_center,
)

UNIT_AXES = np.eye(3)


def rigid_obs(points, v, w, center):
    points = np.asarray(points, dtype=float)
    vel = np.asarray(v, dtype=float) + np.cross(w, points - np.asarray(center, dtype=float))
    return ContactObservation(points, vel)


def lstsq_twist(obs, center):
    """Independent normal-equation oracle for the fixed-center fit."""
    rows, rhs = [], []
    for p, vp in zip(obs.points, obs.velocities):
        r = p - center
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = 1.0
            # component `axis` of v + w x r, linear in (v, w)
            rows.append(np.concatenate([e, np.cross(r, e)]))
            rhs.append(vp[axis])
    a, b = np.array(rows), np.array(rhs)
    return np.linalg.lstsq(a, b, rcond=None)[0], a


def test_energy_examples():
    obs = ContactObservation(np.random.default_rng(0).normal(size=(5, 3)), np.zeros((5, 3)))
    assert kinematic_energy(obs, Twist(), (1, 2, 3)) == 0.0
    pts = np.random.default_rng(1).normal(size=(4, 3))
    obs = ContactObservation(pts, np.tile([0.1, 0, 0], (4, 1)))
    assert kinematic_energy(obs, Twist((0.1, 0, 0), (0, 0, 0)), (5, -1, 2)) == 0.0
    obs = ContactObservation([[1, 0, 0]], [[0, 0, 0]])
    assert kinematic_energy(obs, Twist((0, 1, 0), (0, 0, 0)), (3, 3, 3)) == 1.0


def test_static_observation_gives_zero_twist():
    obs = ContactObservation(UNIT_AXES, np.zeros((3, 3)))
    twist, rank = solve_twist_fixed_center(obs, np.zeros(3))
    assert np.array_equal(twist.as_vector(), np.zeros(6))
    assert rank == 6


def test_three_point_rotation_about_z():
    obs = ContactObservation(UNIT_AXES, [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    twist, rank = solve_twist_fixed_center(obs, np.zeros(3))
    assert rank == 6
    assert np.allclose(twist.as_vector(), [0, 0, 0, 0, 0, 1], atol=1e-9)


def test_two_points_rank_five_min_norm():
    obs = rigid_obs([[0.1, 0, 0], [-0.1, 0.02, 0.03]], (0.01, -0.02, 0.0), (0.3, -0.2, 0.5), (0, 0, 0))
    twist, rank = solve_twist_fixed_center(obs, np.zeros(3))
    _, a = lstsq_twist(obs, np.zeros(3))
    assert rank == 5 == np.linalg.matrix_rank(a, tol=1e-10 * np.linalg.norm(a, 2))
    assert kinematic_energy(obs, twist, np.zeros(3)) < 1e-18
    oracle, _ = lstsq_twist(obs, np.zeros(3))
    assert np.allclose(twist.as_vector(), oracle, atol=1e-12)


def test_center_unchanged_without_rotation():
    obs = ContactObservation(UNIT_AXES, np.ones((3, 3)))
    c = np.array([0.3, -0.2, 0.1])
    assert np.array_equal(solve_center_fixed_twist(obs, Twist((1, 1, 1), (0, 0, 0)), c), c)


def test_center_recovered_orthogonal_to_omega():
    true_c = np.array([0.05, 0.02, 0.3])
    obs = rigid_obs(UNIT_AXES, (0, 0, 0), (0, 0, 1), true_c)
    start = np.array([0.2, 0.2, -0.7])
    c = solve_center_fixed_twist(obs, Twist((0, 0, 0), (0, 0, 1)), start)
    assert np.allclose(c[:2], true_c[:2], atol=1e-9)
    assert c[2] == start[2]
    assert kinematic_energy(obs, Twist((0, 0, 0), (0, 0, 1)), c) < 1e-20


def test_center_step_never_worsens_energy():
    rng = np.random.default_rng(3)
    for _ in range(200):
        pts = rng.normal(scale=0.05, size=(8, 3))
        obs = ContactObservation(pts, rng.normal(scale=0.05, size=(8, 3)))
        twist = Twist(rng.normal(size=3) * 0.1, rng.normal(size=3))
        c0 = rng.normal(size=3) * 0.1
        c1 = solve_center_fixed_twist(obs, twist, c0)
        assert kinematic_energy(obs, twist, c1) <= kinematic_energy(obs, twist, c0) + 1e-12


def test_offset_initial_center_reports_velocity_of_that_point():
    # The linear velocity refers to the returned center, which stays at the
    # initial guess: the center is a gauge freedom of the energy.
    obs = ContactObservation(UNIT_AXES, [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    c0 = np.array([0.2, 0.2, 0.0])
    est = estimate_kinematics(obs, c0)
    assert np.allclose(est.twist.angular, [0, 0, 1], atol=1e-8)
    assert np.allclose(est.center, c0, atol=1e-12)
    assert np.allclose(est.twist.linear, np.cross([0, 0, 1], c0), atol=1e-8)
    assert est.residual_rms < 1e-10
    # Re-expressed at the origin, where the rotation axis passes, v vanishes.
    v_origin = est.twist.linear + np.cross(est.twist.angular, -est.center)
    assert np.allclose(v_origin, 0, atol=1e-8)
    joint, _ = lstsq_twist(obs, c0)
    assert np.allclose(est.twist.as_vector(), joint, atol=1e-10)


def test_pure_translation_converges_fast():
    pts = np.random.default_rng(4).normal(size=(6, 3))
    obs = ContactObservation(pts, np.tile([0.1, -0.2, 0.05], (6, 1)))
    est = estimate_kinematics(obs, np.zeros(3))
    assert np.allclose(est.twist.as_vector(), [0.1, -0.2, 0.05, 0, 0, 0], atol=1e-12)
    assert est.iterations_used in (1, 2)


def test_noisy_estimate_within_statistical_bound():
    sigma = 1e-3
    for seed in range(20):
        rng = np.random.default_rng(seed)
        pts = rng.normal(scale=0.03, size=(16, 3))
        truth = np.concatenate([rng.normal(scale=0.02, size=3), rng.normal(scale=0.3, size=3)])
        c = rng.normal(scale=0.01, size=3)
        clean = rigid_obs(pts, truth[:3], truth[3:], c)
        obs = ContactObservation(pts, clean.velocities + rng.normal(scale=sigma, size=(16, 3)))
        est = estimate_kinematics(obs, c)
        # brute force: joint fit at every center of a coarse grid, keep the best
        best = None
        for off in np.stack(np.meshgrid(*[np.linspace(-0.02, 0.02, 5)] * 3), -1).reshape(-1, 3):
            x, a = lstsq_twist(obs, c + off)
            e = kinematic_energy(obs, Twist.from_vector(x), c + off)
            if best is None or e < best[0]:
                best = (e, x, off, a)
        e_best, x_best, off, a = best
        assert kinematic_energy(obs, est.twist, est.center) <= e_best + 1e-15
        # compare at a common reference point
        x_ref = x_best.copy()
        x_ref[:3] += np.cross(x_best[3:], est.center - (c + off))
        assert np.allclose(est.twist.as_vector(), x_ref, atol=1e-9)
        _, a0 = lstsq_twist(obs, est.center)
        cov = sigma**2 * np.linalg.inv(a0.T @ a0)
        d = est.twist.as_vector() - truth
        assert d @ np.linalg.solve(cov, d) < 22.46  # chi-square(6) 99.9 %


nonneg_pts = st.integers(3, 20)


@given(st.integers(0, 2**32 - 1), nonneg_pts)
def test_exact_recovery_property(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(scale=0.05, size=(n, 3))
    if np.linalg.matrix_rank(pts - pts[0], tol=1e-3) < 2:
        return
    w = rng.normal(size=3)
    w *= rng.uniform(0, 5) / np.linalg.norm(w)
    v = rng.normal(size=3)
    v *= rng.uniform(0, 1) / np.linalg.norm(v)
    c = rng.normal(scale=0.05, size=3)
    est = estimate_kinematics(rigid_obs(pts, v, w, c), c)
    truth = np.concatenate([v, w])
    assert np.linalg.norm(est.twist.as_vector() - truth) <= 1e-7 * max(np.linalg.norm(truth), 1e-12) + 1e-15


@given(st.integers(0, 2**32 - 1))
def test_energy_monotone_across_rounds(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 17))
    pts = rng.normal(scale=0.05, size=(n, 3))
    obs = rigid_obs(pts, rng.normal(size=3) * 0.05, rng.normal(size=3), rng.normal(size=3) * 0.05)
    obs = ContactObservation(pts, obs.velocities + rng.normal(scale=0.01, size=(n, 3)))
    est = estimate_kinematics(obs, rng.normal(size=3) * 0.1)
    e = est.energies
    assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))
    assert est.residual_rms >= 0
    assert est.rank <= min(6, 3 * n)


@given(st.integers(0, 2**32 - 1))
def test_translation_equivariance(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(scale=0.05, size=(10, 3))
    vel = rng.normal(scale=0.05, size=(10, 3))
    c = rng.normal(scale=0.05, size=3)
    shift = rng.normal(size=3)
    a = estimate_kinematics(ContactObservation(pts, vel), c)
    b = estimate_kinematics(ContactObservation(pts + shift, vel), c + shift)
    assert np.allclose(a.twist.as_vector(), b.twist.as_vector(), atol=1e-9)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_collinear_points_never_rank_six(seed, n):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=3)
    pts = rng.normal(size=3) + np.outer(rng.normal(size=n), d)
    obs = ContactObservation(pts, rng.normal(size=(n, 3)))
    assert estimate_kinematics(obs, np.zeros(3)).rank < 6


def test_empty_and_malformed_observations():
    with pytest.raises(EmptyObservation):
        estimate_kinematics(ContactObservation(np.zeros((0, 3)), np.zeros((0, 3))), np.zeros(3))
    with pytest.raises(ValueError):
        ContactObservation(np.zeros((3, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ContactObservation([[np.nan, 0, 0]], [[0, 0, 0]])
