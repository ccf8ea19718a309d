import numpy as np
import pytest

from lietraj.align import integrand, reparameterize, weight_matrix, weighted_norm_sq
from lietraj.bench import generate_letter, screw_trajectory
from lietraj.errors import DegenerateTrajectoryError, InvalidArgumentError
from lietraj.liegroup import Pose, hat, log_map, relative
from lietraj.trajectory import Trajectory, uniform_times


def make_translation_line(times, positions):
    poses = tuple(Pose(np.eye(3), p) for p in positions)
    return Trajectory(poses, np.asarray(times, dtype=float))


def segment_speed_sq_oracle(traj, i):
    """Hand-expanded tr(A W A^T) for segment i: with the sphere inertia this
    is omega^T I omega + ||v||^2, scaled by 1/dt^2."""
    W = weight_matrix()
    xi = log_map(relative(traj.poses[i], traj.poses[i + 1]))
    dt = traj.times[i + 1] - traj.times[i]
    A = hat(xi) / dt
    return weighted_norm_sq(A, W)


# ---------------------------------------------------------------------------
# Weight matrix
# ---------------------------------------------------------------------------


def test_weight_matrix_block_form():
    W = weight_matrix()
    # Unit-mass solid sphere of radius 1: I = 0.4 eye -> upper-left 0.2 eye.
    assert np.allclose(W[:3, :3], 0.2 * np.eye(3))
    assert W[3, 3] == 1.0
    assert np.allclose(W[:3, 3], 0.0)
    assert np.allclose(W, W.T)


def test_weighted_norm_equals_kinetic_form(rng):
    # tr(A W A^T) with A = hat([omega; v]) must equal omega^T I omega + |v|^2.
    W = weight_matrix()
    for _ in range(10):
        xi = rng.normal(0, 1, 6)
        expected = 0.4 * xi[:3] @ xi[:3] + xi[3:] @ xi[3:]
        assert np.isclose(weighted_norm_sq(hat(xi), W), expected)


# ---------------------------------------------------------------------------
# integrand
# ---------------------------------------------------------------------------


def test_integrand_stationary_pair_is_zero():
    traj = make_translation_line([0.0, 0.5, 1.0],
                                 [[0, 0, 0], [0, 0, 0], [1, 0, 0]])
    assert integrand(traj, 0) == 0.0


def test_integrand_pure_translation_hand_oracle():
    # length 0.3 over dt 0.25 -> (0.3 / 0.25)^2 = 1.44 (unit translation weight)
    traj = make_translation_line([0.0, 0.25, 1.0],
                                 [[0, 0, 0], [0.3, 0, 0], [0.3, 0, 0]])
    assert np.isclose(integrand(traj, 0), 1.44)
    assert np.isclose(integrand(traj, 0), segment_speed_sq_oracle(traj, 0))


def test_integrand_quadratic_in_inverse_dt():
    slow = make_translation_line([0.0, 0.5, 1.0],
                                 [[0, 0, 0], [0.2, 0, 0], [0.4, 0, 0]])
    fast = make_translation_line([0.0, 0.25, 1.0],
                                 [[0, 0, 0], [0.2, 0, 0], [0.4, 0, 0]])
    assert np.isclose(integrand(slow, 0), integrand(fast, 0) / 4.0)


def test_integrand_matches_oracle_on_random_segments(rng):
    demos = generate_letter("S", n_points=40, noise_scale=0.01, n_demos=1, seed=9)
    traj = demos[0]
    for i in (0, 10, 25, 38):
        assert np.isclose(integrand(traj, i), segment_speed_sq_oracle(traj, i))


def test_integrand_index_out_of_range():
    traj = make_translation_line([0.0, 1.0], [[0, 0, 0], [1, 0, 0]])
    with pytest.raises(InvalidArgumentError):
        integrand(traj, 1)


# ---------------------------------------------------------------------------
# reparameterize
# ---------------------------------------------------------------------------


def test_constant_screw_keeps_identity_parameterization():
    traj = screw_trajectory(100)
    _, tau = reparameterize(traj, 50)
    assert np.abs(tau - uniform_times(50)).max() < 1e-6


def test_boundary_conditions_exact():
    demos = generate_letter("U", n_points=60, noise_scale=0.01, n_demos=1, seed=2)
    out, tau = reparameterize(demos[0], 37)
    assert tau[0] == 0.0 and tau[-1] == 1.0
    assert len(out) == 37
    assert out.times[0] == 0.0 and out.times[-1] == 1.0


def test_quadratic_time_warp_recovers_uniform_spacing():
    # Straight line, positions uniform in u, times t = u^2: the oracle output
    # is a uniformly spaced line on the uniform grid.
    n = 400
    u = np.linspace(0.0, 1.0, n)
    times = u**2
    positions = np.column_stack([u, np.zeros(n), np.zeros(n)])
    traj = make_translation_line(times, positions)
    out, _ = reparameterize(traj, 50)
    xs = out.translations()[:, 0]
    expected = np.linspace(0.0, 1.0, 50)
    assert np.abs(xs - expected).max() < 1e-3


def test_equal_speed_property():
    # Post-alignment the per-segment speeds are near constant.
    demos = generate_letter("arc", n_points=250, noise_scale=0.0, warp_scale=0.8,
                            n_demos=3, seed=11)
    for traj in demos:
        out, _ = reparameterize(traj, 50)
        speeds = np.sqrt([integrand(out, i) for i in range(len(out) - 1)])
        cov = speeds.std() / speeds.mean()
        assert cov < 0.05


def test_idempotence():
    demos = generate_letter("S", n_points=300, noise_scale=0.0, warp_scale=0.6,
                            n_demos=1, seed=3)
    once, _ = reparameterize(demos[0], 80)
    _, tau = reparameterize(once, 80)
    assert np.abs(tau - uniform_times(80)).max() < 1e-4


def test_tau_star_monotone():
    demos = generate_letter("N", n_points=120, noise_scale=0.004, n_demos=1, seed=7)
    _, tau = reparameterize(demos[0], 50)
    assert np.all(np.diff(tau) >= 0.0)
    assert np.all(np.diff(tau) > 0.0)


def test_stationary_trajectory_rejected():
    traj = make_translation_line([0.0, 0.5, 1.0],
                                 [[0, 0, 0], [0, 0, 0], [0, 0, 0]])
    with pytest.raises(DegenerateTrajectoryError):
        reparameterize(traj, 10)


def test_n_step_validation():
    traj = screw_trajectory(20)
    with pytest.raises(InvalidArgumentError):
        reparameterize(traj, 1)


def test_smoothing_window_runs():
    demos = generate_letter("arc", n_points=100, noise_scale=0.01, n_demos=1, seed=5)
    out, tau = reparameterize(demos[0], 30, smooth_window=5)
    assert len(out) == 30
    assert tau[0] == 0.0 and tau[-1] == 1.0
