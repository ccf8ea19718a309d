"""Rigid-body pose algebra on SE(3) and PCG(3).

Poses carry a rotation matrix, a translation vector and a space tag.  SE(3)
composes rotation and translation jointly (homogeneous-matrix product); PCG(3)
is the direct product SO(3) x R^3, so rotation and translation compose
independently.  Tangent vectors ("twists") are packed as [omega; v] with the
rotational coordinates first.

All operations are pure functions over immutable values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchError, InvalidArgumentError

# Tolerance for R^T R = I on construction (Frobenius norm).
ORTHONORMALITY_TOL = 1e-9

# Below this rotation magnitude the closed-form exp/log coefficients are
# replaced by 4th-order Taylor expansions.  The closed forms suffer
# 2*eps/theta^2 cancellation (worst in (1 - A/(2B))/theta^2), so the switch
# sits where both sides are accurate to ~1e-10: Taylor truncation at 1e-3 is
# ~1e-22, cancellation at 1e-3 is ~4e-10.
SMALL_ANGLE = 1e-3

# Rotations closer to pi than this margin are rejected by the logarithm.
PI_BRANCH_MARGIN = 1e-6

# Compositions tolerated before the rotation is projected back onto SO(3).
REORTHONORMALIZE_AFTER = 1000


class Space(str, enum.Enum):
    """Which group the pose lives in."""

    SE3 = "se3"
    PCG3 = "pcg3"


def _as_space(space) -> Space:
    if isinstance(space, Space):
        return space
    try:
        return Space(str(space).lower())
    except ValueError:
        raise InvalidArgumentError(f"unknown space tag: {space!r}") from None


@dataclass(frozen=True, eq=False)
class Pose:
    """An element of SE(3) or PCG(3).

    Attributes:
        rotation: 3x3 orthonormal matrix with determinant +1.
        translation: 3-vector in meters.
        space: group the pose belongs to; composition requires matching tags.
    """

    rotation: np.ndarray
    translation: np.ndarray
    space: Space = Space.SE3
    # Compositions since the rotation was last known exactly orthonormal.
    # Internal drift-control bookkeeping; not part of the pose's value.
    ops: int = field(default=0, repr=False)

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float)
        tran = np.array(self.translation, dtype=float).reshape(-1)
        if rot.shape != (3, 3):
            raise InvalidArgumentError(f"rotation must be 3x3, got {rot.shape}")
        if tran.shape != (3,):
            raise InvalidArgumentError(
                f"translation must be a 3-vector, got shape {tran.shape}"
            )
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(tran))):
            raise InvalidArgumentError("pose entries must be finite")
        defect = np.linalg.norm(rot.T @ rot - np.eye(3))
        if defect > ORTHONORMALITY_TOL:
            raise InvalidArgumentError(
                f"rotation is not orthonormal: ||R^T R - I||_F = {defect:.3e}"
            )
        if np.linalg.det(rot) < 0.0:
            raise InvalidArgumentError("rotation has determinant -1 (a reflection)")
        rot.flags.writeable = False
        tran.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tran)
        object.__setattr__(self, "space", _as_space(self.space))

    @staticmethod
    def identity(space=Space.SE3) -> "Pose":
        return Pose(np.eye(3), np.zeros(3), space)

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous-matrix form."""
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def is_close(self, other: "Pose", tol: float = 1e-9) -> bool:
        d_rot, d_tran = pose_distance(self, other)
        return self.space == other.space and d_rot <= tol and d_tran <= tol


def _trusted_pose(R: np.ndarray, t: np.ndarray, space: Space, ops: int = 0) -> Pose:
    """Construct a Pose from arrays known to be valid (products of already
    validated rotations), skipping re-validation.  Internal fast path for
    operation outputs; the public constructor always validates."""
    g = object.__new__(Pose)
    R.flags.writeable = False
    t.flags.writeable = False
    object.__setattr__(g, "rotation", R)
    object.__setattr__(g, "translation", t)
    object.__setattr__(g, "space", space)
    object.__setattr__(g, "ops", ops)
    return g


def _check_same_space(g1: Pose, g2: Pose, what: str) -> None:
    if g1.space != g2.space:
        raise InvalidArgumentError(
            f"{what} requires matching space tags, got {g1.space.value} "
            f"and {g2.space.value}"
        )


# ---------------------------------------------------------------------------
# hat / vee
# ---------------------------------------------------------------------------


def skew(omega) -> np.ndarray:
    """3-vector -> 3x3 skew-symmetric matrix."""
    x, y, z = np.asarray(omega, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def unskew(W) -> np.ndarray:
    """3x3 skew-symmetric matrix -> 3-vector."""
    W = np.asarray(W, dtype=float)
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


def hat(xi) -> np.ndarray:
    """Packed twist [omega; v] -> 4x4 matrix [[skew(omega), v], [0, 0]]."""
    xi = np.asarray(xi, dtype=float).reshape(6)
    X = np.zeros((4, 4))
    X[:3, :3] = skew(xi[:3])
    X[:3, 3] = xi[3:]
    return X


def vee(X) -> np.ndarray:
    """Inverse of :func:`hat`."""
    X = np.asarray(X, dtype=float)
    return np.concatenate([unskew(X[:3, :3]), X[:3, 3]])


# ---------------------------------------------------------------------------
# SO(3) exponential / logarithm, with batched variants
# ---------------------------------------------------------------------------


def _exp_coefficients(theta_sq: np.ndarray):
    """Rodrigues coefficients A = sin(t)/t, B = (1-cos(t))/t^2, C = (t-sin(t))/t^3.

    Taylor expansions are used below SMALL_ANGLE to avoid 0/0; the series are
    carried to 4th order in theta.
    """
    theta_sq = np.asarray(theta_sq, dtype=float)
    small = theta_sq < SMALL_ANGLE**2
    # Guard the divisions; the guarded lanes are overwritten by the series.
    safe = np.where(small, 1.0, theta_sq)
    theta = np.sqrt(safe)
    with np.errstate(invalid="ignore"):
        a = np.where(small, 1.0 - theta_sq / 6.0 + theta_sq**2 / 120.0,
                     np.sin(theta) / theta)
        b = np.where(small, 0.5 - theta_sq / 24.0 + theta_sq**2 / 720.0,
                     (1.0 - np.cos(theta)) / safe)
        c = np.where(small, 1.0 / 6.0 - theta_sq / 120.0 + theta_sq**2 / 5040.0,
                     (theta - np.sin(theta)) / (safe * theta))
    return a, b, c


def so3_exp_many(omega: np.ndarray) -> np.ndarray:
    """Exponential map so(3) -> SO(3) for a stack of rotation vectors (N, 3)."""
    omega = np.asarray(omega, dtype=float)
    single = omega.ndim == 1
    omega = np.atleast_2d(omega)
    n = omega.shape[0]
    theta_sq = np.einsum("ni,ni->n", omega, omega)
    a, b, _ = _exp_coefficients(theta_sq)
    K = np.zeros((n, 3, 3))
    K[:, 0, 1] = -omega[:, 2]
    K[:, 0, 2] = omega[:, 1]
    K[:, 1, 0] = omega[:, 2]
    K[:, 1, 2] = -omega[:, 0]
    K[:, 2, 0] = -omega[:, 1]
    K[:, 2, 1] = omega[:, 0]
    K2 = K @ K
    R = np.eye(3) + a[:, None, None] * K + b[:, None, None] * K2
    return R[0] if single else R


def so3_exp(omega) -> np.ndarray:
    """Exponential map for a single rotation vector."""
    return so3_exp_many(np.asarray(omega, dtype=float).reshape(3))


def so3_log_many(R: np.ndarray) -> np.ndarray:
    """Logarithm SO(3) -> so(3) for a stack of rotations (N, 3, 3).

    Raises BranchError when any rotation angle reaches pi - PI_BRANCH_MARGIN,
    where the principal branch is ill-defined.
    """
    R = np.asarray(R, dtype=float)
    single = R.ndim == 2
    R = R.reshape(-1, 3, 3)
    trace = np.einsum("nii->n", R)
    cos_theta = np.clip((trace - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if np.any(theta >= np.pi - PI_BRANCH_MARGIN):
        raise BranchError(
            "rotation angle within 1e-6 of pi: logarithm branch is ambiguous"
        )
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    theta_sq = theta**2
    # factor f(theta) = theta / (2 sin theta); series 1/2 + t^2/12 + 7 t^4/720.
    with np.errstate(invalid="ignore"):
        f = np.where(small, 0.5 + theta_sq / 12.0 + 7.0 * theta_sq**2 / 720.0,
                     safe / (2.0 * np.sin(safe)))
    w = np.stack(
        [R[:, 2, 1] - R[:, 1, 2], R[:, 0, 2] - R[:, 2, 0], R[:, 1, 0] - R[:, 0, 1]],
        axis=1,
    )
    omega = f[:, None] * w
    return omega[0] if single else omega


def so3_log(R) -> np.ndarray:
    """Logarithm for a single rotation matrix."""
    return so3_log_many(np.asarray(R, dtype=float).reshape(3, 3))


def project_rotation(R) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (polar projection)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt


# ---------------------------------------------------------------------------
# Group exponential / logarithm
# ---------------------------------------------------------------------------


def exp_map_many(xi: np.ndarray, space=Space.SE3):
    """Batched exponential map; returns (rotations (N,3,3), translations (N,3))."""
    space = _as_space(space)
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    if not np.all(np.isfinite(xi)):
        raise InvalidArgumentError("twist entries must be finite")
    omega, v = xi[:, :3], xi[:, 3:]
    R = so3_exp_many(omega)
    if space is Space.PCG3:
        t = v.copy()
    else:
        theta_sq = np.einsum("ni,ni->n", omega, omega)
        _, b, c = _exp_coefficients(theta_sq)
        K = np.zeros((xi.shape[0], 3, 3))
        K[:, 0, 1] = -omega[:, 2]
        K[:, 0, 2] = omega[:, 1]
        K[:, 1, 0] = omega[:, 2]
        K[:, 1, 2] = -omega[:, 0]
        K[:, 2, 0] = -omega[:, 1]
        K[:, 2, 1] = omega[:, 0]
        V = np.eye(3) + b[:, None, None] * K + c[:, None, None] * (K @ K)
        t = np.einsum("nij,nj->ni", V, v)
    if single:
        return R[0], t[0]
    return R, t


def exp_map(xi, space=Space.SE3) -> Pose:
    """Exponential map from a packed twist [omega; v] to a group element.

    SE(3) uses the closed-form Rodrigues-based exponential; PCG(3)
    exponentiates the rotation and copies the translation verbatim.
    """
    space = _as_space(space)
    R, t = exp_map_many(np.asarray(xi, dtype=float).reshape(6), space)
    return _trusted_pose(R, t, space)


def log_map_many(R: np.ndarray, t: np.ndarray, space=Space.SE3) -> np.ndarray:
    """Batched logarithm; R is (N,3,3), t is (N,3); returns twists (N,6)."""
    space = _as_space(space)
    R = np.asarray(R, dtype=float).reshape(-1, 3, 3)
    t = np.asarray(t, dtype=float).reshape(-1, 3)
    omega = so3_log_many(R)
    if space is Space.PCG3:
        return np.concatenate([omega, t], axis=1)
    theta_sq = np.einsum("ni,ni->n", omega, omega)
    small = theta_sq < SMALL_ANGLE**2
    a, b, _ = _exp_coefficients(theta_sq)
    # V^{-1} = I - skew(omega)/2 + d * skew(omega)^2,
    # d = (1 - a/(2b)) / theta^2; series 1/12 + t^2/720 + t^4/30240.
    safe = np.where(small, 1.0, theta_sq)
    with np.errstate(invalid="ignore"):
        d = np.where(small, 1.0 / 12.0 + theta_sq / 720.0 + theta_sq**2 / 30240.0,
                     (1.0 - a / (2.0 * b)) / safe)
    K = np.zeros_like(R)
    K[:, 0, 1] = -omega[:, 2]
    K[:, 0, 2] = omega[:, 1]
    K[:, 1, 0] = omega[:, 2]
    K[:, 1, 2] = -omega[:, 0]
    K[:, 2, 0] = -omega[:, 1]
    K[:, 2, 1] = omega[:, 0]
    Vinv = np.eye(3) - 0.5 * K + d[:, None, None] * (K @ K)
    v = np.einsum("nij,nj->ni", Vinv, t)
    return np.concatenate([omega, v], axis=1)


def log_map(g: Pose) -> np.ndarray:
    """Logarithm of a group element as a packed twist [omega; v].

    The rotation angle must stay below pi - 1e-6 (principal branch).
    """
    return log_map_many(g.rotation[None], g.translation[None], g.space)[0]


# ---------------------------------------------------------------------------
# Group operations
# ---------------------------------------------------------------------------


def compose(g1: Pose, g2: Pose) -> Pose:
    """Group product g1 * g2."""
    _check_same_space(g1, g2, "compose")
    R = g1.rotation @ g2.rotation
    if g1.space is Space.PCG3:
        t = g1.translation + g2.translation
    else:
        t = g1.rotation @ g2.translation + g1.translation
    ops = g1.ops + g2.ops + 1
    if ops > REORTHONORMALIZE_AFTER:
        R = project_rotation(R)
        ops = 0
    return _trusted_pose(R, t, g1.space, ops)


def inverse(g: Pose) -> Pose:
    """Group inverse."""
    Rt = g.rotation.T.copy()
    if g.space is Space.PCG3:
        t = -g.translation
    else:
        t = -(Rt @ g.translation)
    return _trusted_pose(Rt, t, g.space, g.ops)


def relative(g1: Pose, g2: Pose) -> Pose:
    """Relative pose g1^{-1} * g2 (for PCG(3): (R1^T R2, t2 - t1))."""
    return compose(inverse(g1), g2)


def adjoint(g: Pose) -> np.ndarray:
    """6x6 adjoint matrix acting on packed [omega; v] twists.

    SE(3): [[R, 0], [skew(t) R, R]].  PCG(3): blockdiag(R, I).
    """
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = g.rotation
    if g.space is Space.PCG3:
        Ad[3:, 3:] = np.eye(3)
    else:
        Ad[3:, :3] = skew(g.translation) @ g.rotation
        Ad[3:, 3:] = g.rotation
    return Ad


def interpolate(g1: Pose, g2: Pose, alpha: float) -> Pose:
    """Geodesic interpolation g1 * exp(alpha * log(g1^{-1} g2)).

    Endpoints are reproduced exactly at alpha = 0 and alpha = 1.  For PCG(3)
    the same formula reduces to a component-wise geodesic (slerp-style
    rotation, linear translation).
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return g1
    if alpha == 1.0:
        return g2
    _check_same_space(g1, g2, "interpolate")
    xi = log_map(relative(g1, g2))
    return compose(g1, exp_map(alpha * xi, g1.space))


def pose_distance(g1: Pose, g2: Pose):
    """(rotation, translation) distances: ||R1 - R2||_F and ||t1 - t2||_2."""
    d_rot = float(np.linalg.norm(g1.rotation - g2.rotation))
    d_tran = float(np.linalg.norm(g1.translation - g2.translation))
    return d_rot, d_tran


def rotation_angles_between(R: np.ndarray, R_ref: np.ndarray) -> np.ndarray:
    """Geodesic angles ||log(R^T R_ref)|| for stacks R (N,3,3), R_ref (M,3,3).

    Returns an (N, M) array.  Uses the trace identity, so it stays valid (and
    cheap) arbitrarily close to pi.
    """
    R = np.asarray(R, dtype=float).reshape(-1, 3, 3)
    R_ref = np.asarray(R_ref, dtype=float).reshape(-1, 3, 3)
    tr = np.einsum("nab,mab->nm", R, R_ref)
    return np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
