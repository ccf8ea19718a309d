"""Globally optimal temporal reparameterization of pose trajectories.

A trajectory g(tau) is rescaled in time so that the integrated squared
weighted body velocity is minimized over monotone reparameterizations fixing
the endpoints.  The minimizer equalizes the weighted body speed: the new time
of a sample is the fraction of total weighted path length accumulated up to
it.  Concretely:

    F(tau) = cumulative integral of sqrt(g_speed) / total integral,
    tau*(t) = F^{-1}(t) on a uniform output grid,

with g_speed the squared weighted norm of the finite-difference body velocity
and F inverted by monotone linear interpolation.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateTrajectoryError, InvalidArgumentError
from .liegroup import Space, interpolate, log_map_many
from .trajectory import Trajectory, uniform_times

# Inertia tensor of a unit-mass solid sphere of radius 1: I = 0.4 * eye(3).
# Any positive scale cancels in the normalized accumulation, so the radius
# choice does not affect the minimizer; it is exposed for completeness.
DEFAULT_INERTIA = 0.4 * np.eye(3)


def weight_matrix(inertia: np.ndarray | None = None) -> np.ndarray:
    """4x4 weight for the body-velocity norm.

    Upper-left block is tr(I)/2 * eye(3) - I, lower-right scalar is 1 (unit
    mass).  With this weight, tr(A W A^T) of a twist matrix equals
    omega^T I omega + ||v||^2, the kinetic energy form.
    """
    inertia = DEFAULT_INERTIA if inertia is None else np.asarray(inertia, float)
    W = np.zeros((4, 4))
    W[:3, :3] = 0.5 * np.trace(inertia) * np.eye(3) - inertia
    W[3, 3] = 1.0
    return W


def weighted_norm_sq(A: np.ndarray, W: np.ndarray) -> float:
    """Squared weighted Frobenius norm tr(A W A^T)."""
    return float(np.trace(A @ W @ A.T))


def _body_speeds_sq(traj: Trajectory, W: np.ndarray) -> np.ndarray:
    """Per-segment squared weighted body speeds, shape (len - 1,)."""
    R = traj.rotations()
    t = traj.translations()
    if traj.space is Space.PCG3:
        rel_R = np.einsum("nba,nbc->nac", R[:-1], R[1:])  # R_i^T R_{i+1}
        rel_t = t[1:] - t[:-1]
    else:
        rel_R = np.einsum("nba,nbc->nac", R[:-1], R[1:])
        rel_t = np.einsum("nba,nb->na", R[:-1], t[1:] - t[:-1])  # R_i^T (t_{i+1}-t_i)
    xi = log_map_many(rel_R, rel_t, traj.space)
    dt = np.diff(traj.times)
    if np.any(dt == 0.0):
        raise DegenerateTrajectoryError("zero time step between samples")
    # tr(hat(xi) W hat(xi)^T) = omega^T I omega + ||v||^2 for the block W.
    inertia = 0.5 * np.trace(W[:3, :3]) * np.eye(3) - W[:3, :3]
    rot_part = np.einsum("ni,ij,nj->n", xi[:, :3], inertia, xi[:, :3])
    tran_part = W[3, 3] * np.einsum("ni,ni->n", xi[:, 3:], xi[:, 3:])
    return (rot_part + tran_part) / dt**2


def integrand(traj: Trajectory, i: int, W: np.ndarray | None = None) -> float:
    """Squared weighted body speed of segment i (finite difference).

    Equals ||hat(log(g_i^{-1} g_{i+1})) / dt_i||_W^2 with the weighted norm
    tr(A W A^T); always nonnegative.
    """
    if not 0 <= i < len(traj) - 1:
        raise InvalidArgumentError(
            f"segment index {i} out of range for {len(traj)} poses"
        )
    W = weight_matrix() if W is None else W
    return float(_body_speeds_sq(traj, W)[i])


def reparameterize(
    traj: Trajectory,
    n_step: int = 50,
    inertia: np.ndarray | None = None,
    smooth_window: int = 0,
):
    """Resample a trajectory onto the speed-equalizing time scale.

    Args:
        traj: input trajectory (any monotone time stamps).
        n_step: number of output samples on a uniform [0, 1] grid.
        inertia: optional 3x3 inertia tensor for the rotational weight.
        smooth_window: optional moving-average window (in samples, odd
            recommended) applied to the speed profile before accumulation;
            0 disables smoothing.

    Returns:
        (resampled Trajectory of length n_step, tau_star array of shape
        (n_step,)) with tau_star[0] = 0 and tau_star[-1] = 1 exactly.

    Raises:
        DegenerateTrajectoryError: if the trajectory never moves.
    """
    if n_step < 2:
        raise InvalidArgumentError("n_step must be at least 2")
    W = weight_matrix(inertia)
    speeds = np.sqrt(_body_speeds_sq(traj, W))
    if smooth_window and smooth_window > 1:
        kernel = np.ones(int(smooth_window)) / float(smooth_window)
        speeds = np.convolve(speeds, kernel, mode="same")
    # Each finite-difference speed is constant over its segment (the data is
    # piecewise geodesic), so the per-segment trapezoid is exactly
    # speed * dtau, the weighted chord length; accumulate those.
    tau = traj.times
    increments = speeds * np.diff(tau)
    F = np.concatenate([[0.0], np.cumsum(increments)])
    if F[-1] <= 0.0:
        raise DegenerateTrajectoryError(
            "trajectory is stationary: total weighted path length is zero"
        )
    F /= F[-1]
    F[-1] = 1.0
    t_out = uniform_times(n_step)
    tau_star = np.interp(t_out, F, tau)
    tau_star[0] = 0.0
    tau_star[-1] = 1.0
    poses = []
    idx = np.clip(np.searchsorted(tau, tau_star, side="right") - 1, 0, len(tau) - 2)
    for ts, k in zip(tau_star, idx):
        alpha = (ts - tau[k]) / (tau[k + 1] - tau[k])
        poses.append(interpolate(traj.poses[k], traj.poses[k + 1], float(np.clip(alpha, 0.0, 1.0))))
    return Trajectory(tuple(poses), t_out), tau_star
