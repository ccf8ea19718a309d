import numpy as np
import pytest

from lietraj.liegroup import Pose, Space, exp_map


def random_twist(rng, rot_scale=1.0, tran_scale=1.0, max_angle=2.9):
    """Twist with rotation magnitude strictly below the log branch cut."""
    omega = rng.normal(0.0, rot_scale, 3)
    norm = np.linalg.norm(omega)
    if norm > max_angle:
        omega *= max_angle / norm * rng.uniform(0.1, 1.0)
    v = rng.normal(0.0, tran_scale, 3)
    return np.concatenate([omega, v])


def random_pose(rng, space=Space.SE3, rot_scale=0.8, tran_scale=0.5) -> Pose:
    return exp_map(random_twist(rng, rot_scale, tran_scale), space)


def random_spd(rng, dim=6, scale=1e-2):
    A = rng.normal(0.0, scale, (dim, dim))
    return A @ A.T + scale * 0.1 * np.eye(dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
