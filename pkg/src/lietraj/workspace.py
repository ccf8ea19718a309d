"""Serial-arm kinematics and the workspace-density Gaussian.

Chains are described in product-of-exponentials form: each revolute joint has
a zero-configuration offset pose and a unit rotation axis; the end effector
adds a final fixed offset.  The workspace density summarizes where the arm
can reach as a single pose Gaussian, built by compounding per-link pose
Gaussians left to right.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .encode import sample_mean
from .errors import BranchError, IKError, InvalidArgumentError
from .liegroup import (
    Pose,
    Space,
    adjoint,
    compose,
    inverse,
    log_map,
    log_map_many,
    project_rotation,
    relative,
    so3_exp_many,
)

IK_TOL = 1e-4
IK_MAX_ITERATIONS = 200
IK_DAMPING = 0.05

# Same covariance floor as the encoder; keeps locked-joint links invertible.
LINK_COV_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class Joint:
    """A revolute joint: offset pose from the previous frame plus a unit
    rotation axis (the rotational block of a twist)."""

    offset: Pose
    axis: np.ndarray  # (3,) unit rotation axis
    limits: tuple  # (lo, hi) radians

    def __post_init__(self):
        axis = np.array(self.axis, dtype=float).reshape(-1)
        if axis.shape != (3,):
            raise InvalidArgumentError("joint axis must be a 3-vector")
        norm = np.linalg.norm(axis)
        if abs(norm - 1.0) > 1e-9:
            raise InvalidArgumentError(f"joint axis must be unit norm, got {norm}")
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if not lo < hi:
            raise InvalidArgumentError(f"joint limits must satisfy lo < hi, got {lo}, {hi}")
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """A serial manipulator with m revolute joints and an end-effector offset."""

    joints: tuple
    ee_offset: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        joints = tuple(self.joints)
        if not joints:
            raise InvalidArgumentError("chain needs at least one joint")
        object.__setattr__(self, "joints", joints)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])


@dataclass(frozen=True, eq=False)
class WorkspaceDensity:
    """Pose Gaussian summarizing end-effector reachability."""

    g_wd: Pose
    sigma_wd: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma_wd, dtype=float)
        if sigma.shape != (6, 6):
            raise InvalidArgumentError("sigma_wd must be 6x6")
        eigvals = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
        if eigvals.min() < -1e-10:
            raise InvalidArgumentError("sigma_wd must be positive semidefinite")
        object.__setattr__(self, "sigma_wd", 0.5 * (sigma + sigma.T))


def default_chain() -> KinematicChain:
    """Bundled 7-joint desk-scale arm.

    Link lengths loosely follow a common 7-DoF collaborative arm (principal
    offsets 0.333, 0.316, 0.384 m) with +-2.8 rad limits; the numbers are
    representative synthetic values, not a calibrated robot model.
    """
    z = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 1.0, 0.0])
    lim = (-2.8, 2.8)

    def offset(t):
        return Pose(np.eye(3), np.asarray(t, dtype=float))

    joints = (
        Joint(offset([0.0, 0.0, 0.333]), z, lim),
        Joint(offset([0.0, 0.0, 0.0]), y, lim),
        Joint(offset([0.0, 0.0, 0.316]), z, lim),
        Joint(offset([0.0825, 0.0, 0.0]), y, lim),
        Joint(offset([-0.0825, 0.0, 0.384]), z, lim),
        Joint(offset([0.0, 0.0, 0.0]), y, lim),
        Joint(offset([0.088, 0.0, 0.0]), z, lim),
    )
    return KinematicChain(joints, offset([0.0, 0.0, 0.107]))


# ---------------------------------------------------------------------------
# Forward / inverse kinematics
# ---------------------------------------------------------------------------


def forward_kinematics(chain: KinematicChain, q):
    """End-effector pose and per-link frames at joint configuration q.

    Each joint rotates at the base of its link, so frames accumulate as
    exp(q_j * axis_j) * offset_j; the returned link frames are the distal
    ends of each link, and the end effector adds the fixed tool offset.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != chain.n_joints:
        raise InvalidArgumentError(
            f"expected {chain.n_joints} joint values, got {q.shape[0]}"
        )
    if np.any(q < chain.lower_limits - 1e-12) or np.any(q > chain.upper_limits + 1e-12):
        warnings.warn("joint configuration outside limits", stacklevel=2)
    frames = []
    T = Pose.identity()
    for joint, angle in zip(chain.joints, q):
        rot = Pose(so3_exp_many(joint.axis * angle), np.zeros(3))
        T = compose(compose(T, rot), joint.offset)
        frames.append(T)
    ee = compose(T, chain.ee_offset)
    return ee, frames


def forward_kinematics_batch(chain: KinematicChain, q: np.ndarray,
                             return_origins: bool = False):
    """Vectorized FK over a batch of configurations q (B, m).

    Returns (rotations (B, 3, 3), translations (B, 3)) of the end effector;
    with return_origins also the frame origins (B, m + 2, 3): base, distal
    end of every link, end effector.
    """
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    B = q.shape[0]
    R = np.broadcast_to(np.eye(3), (B, 3, 3)).copy()
    t = np.zeros((B, 3))
    origins = [t]
    for j, joint in enumerate(chain.joints):
        Rj = so3_exp_many(np.outer(q[:, j], joint.axis))
        R = R @ Rj
        Ro, to = joint.offset.rotation, joint.offset.translation
        t = t + np.einsum("bij,j->bi", R, to)
        R = R @ Ro
        origins.append(t)
    to = chain.ee_offset.translation
    t = t + np.einsum("bij,j->bi", R, to)
    R = R @ chain.ee_offset.rotation
    origins.append(t)
    if return_origins:
        stacked = np.stack(origins, axis=1)
        if single:
            return R[0], t[0], stacked[0]
        return R, t, stacked
    if single:
        return R[0], t[0]
    return R, t


def _body_jacobian(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Body-frame Jacobian (6, m): column j transports the joint axis through
    the remainder of the chain (suffix Q_j = offset_j ... ee_offset)."""
    m = chain.n_joints
    suffix = chain.ee_offset
    cols = np.zeros((6, m))
    for j in range(m - 1, -1, -1):
        xi = np.concatenate([chain.joints[j].axis, np.zeros(3)])
        suffix = compose(chain.joints[j].offset, suffix)
        cols[:, j] = adjoint(inverse(suffix)) @ xi
        rot = Pose(so3_exp_many(chain.joints[j].axis * q[j]), np.zeros(3))
        suffix = compose(rot, suffix)
    return cols


def inverse_kinematics(chain: KinematicChain, target: Pose, q_seed) -> np.ndarray:
    """Damped-least-squares IK on the body-frame pose error log(fk(q)^{-1} target).

    Joints are clamped to their limits every iteration.  Succeeds when the
    error norm drops below 1e-4; raises IKError with the final residual after
    200 iterations (callers may retry from a different seed).
    """
    if target.space is not Space.SE3:
        raise InvalidArgumentError("IK targets must be SE3 poses")
    q = np.asarray(q_seed, dtype=float).reshape(-1).copy()
    if q.shape[0] != chain.n_joints:
        raise InvalidArgumentError(
            f"seed has {q.shape[0]} values for {chain.n_joints} joints"
        )
    q = np.clip(q, chain.lower_limits, chain.upper_limits)
    residual = np.inf
    nudge = 0.05 * np.resize([1.0, -1.0], chain.n_joints)
    for _ in range(IK_MAX_ITERATIONS):
        ee, _ = forward_kinematics(chain, q)
        try:
            err = log_map(relative(ee, target))
        except BranchError:
            # Error rotation sits on the pi branch cut; nudge off it and
            # keep iterating.
            q = np.clip(q + nudge, chain.lower_limits, chain.upper_limits)
            continue
        residual = float(np.linalg.norm(err))
        if residual < IK_TOL:
            return q
        J = _body_jacobian(chain, q)
        JJt = J @ J.T + IK_DAMPING**2 * np.eye(6)
        dq = J.T @ np.linalg.solve(JJt, err)
        q = np.clip(q + dq, chain.lower_limits, chain.upper_limits)
    raise IKError(
        f"inverse kinematics stalled at residual {residual:.3e}", residual=residual
    )


# ---------------------------------------------------------------------------
# Per-link pose distributions and compounding
# ---------------------------------------------------------------------------


def link_pose_distribution(
    chain: KinematicChain,
    link: int,
    samples_per_joint: int = 25,
    seed: int = 0,
    space: Space = Space.SE3,
):
    """Pose Gaussian of the distal end of one link over its joint's range.

    The joint angle is drawn uniformly over its limits; the mean solves the
    tangent-residual equation and the covariance is the absolute scatter of
    log(mu^{-1} g) about it, floored for invertibility.  The last link folds
    in the end-effector offset.
    """
    if not 0 <= link < chain.n_joints:
        raise InvalidArgumentError(f"link index {link} out of range")
    if samples_per_joint < 2:
        raise InvalidArgumentError("samples_per_joint must be at least 2")
    joint = chain.joints[link]
    rng = np.random.default_rng(seed)
    angles = rng.uniform(joint.limits[0], joint.limits[1], samples_per_joint)
    poses = []
    for a in angles:
        rot = Pose(so3_exp_many(joint.axis * a), np.zeros(3), space)
        offset = Pose(joint.offset.rotation, joint.offset.translation, space)
        g = compose(rot, offset)
        if link == chain.n_joints - 1:
            ee = Pose(chain.ee_offset.rotation, chain.ee_offset.translation, space)
            g = compose(g, ee)
        poses.append(g)
    # Wide joint ranges can put the first sample more than pi from the
    # opposite extreme; seed the mean iteration at the chordal center instead.
    init = Pose(
        project_rotation(np.mean([p.rotation for p in poses], axis=0)),
        np.mean([p.translation for p in poses], axis=0),
        space,
    )
    mu = sample_mean(poses, init=init)
    mu_inv = inverse(mu)
    rel = [compose(mu_inv, g) for g in poses]
    xi = log_map_many(
        np.stack([p.rotation for p in rel]),
        np.stack([p.translation for p in rel]),
        space,
    )
    cov = xi.T @ xi / len(poses) + LINK_COV_FLOOR * np.eye(6)
    return mu, 0.5 * (cov + cov.T)


def compound_gaussians(mu1: Pose, sigma1, mu2: Pose, sigma2):
    """First-order pose-Gaussian composition.

    Mean is mu1 * mu2; the first covariance is transported through mu2 by its
    inverse adjoint and added to the second:
    sigma = Ad(mu2^{-1}) sigma1 Ad(mu2^{-1})^T + sigma2.
    """
    A = adjoint(inverse(mu2))
    sigma = A @ np.asarray(sigma1, float) @ A.T + np.asarray(sigma2, float)
    return compose(mu1, mu2), 0.5 * (sigma + sigma.T)


def workspace_density(
    chain: KinematicChain,
    samples_per_joint: int = 25,
    seed: int = 0,
    space: Space = Space.SE3,
) -> WorkspaceDensity:
    """Reachability Gaussian of the end effector.

    Left-to-right fold of :func:`compound_gaussians` over the per-link
    distributions; the mean is the product of the per-link means.
    Deterministic under a fixed seed (per-link seeds are derived by index).
    """
    mu, sigma = link_pose_distribution(chain, 0, samples_per_joint, seed, space)
    for link in range(1, chain.n_joints):
        mu_i, sigma_i = link_pose_distribution(
            chain, link, samples_per_joint, seed + link, space
        )
        mu, sigma = compound_gaussians(mu, sigma, mu_i, sigma_i)
    return WorkspaceDensity(mu, sigma)
