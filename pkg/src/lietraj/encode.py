"""Encoding demonstrations as a joint Gaussian over trajectory tangents.

Given time-aligned demonstrations, this module estimates a mean trajectory,
per-step relative-pose covariances, and assembles the block-tridiagonal joint
precision over the stacked tangent deviations x_1..x_n (step 0 is pinned to
the mean and carries no variable).  The off-diagonal coupling follows from the
per-step conditionals: the step-i residual is x_{i+1} - Ad^{-1}(mu_i^{-1}
mu_{i+1}) x_i weighted by the inverse relative covariance, which makes the
assembled quadratic form exactly the sum of the per-step ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .banded import BlockTridiagonal
from .errors import (
    ConvergenceError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
)
from .liegroup import (
    Pose,
    Space,
    adjoint,
    exp_map_many,
    log_map_many,
    relative,
)
from .trajectory import DemoSet, Trajectory, uniform_times

# Covariance floor added to every relative scatter matrix (rad^2, m^2 on
# tangent coordinates).  Keeps single- and few-demonstration covariances
# invertible and doubles as the manual prior for one-demo encoding.
DEFAULT_LAMBDA_REG = 1e-6

MEAN_RESIDUAL_TOL = 1e-8
MEAN_MAX_ITERATIONS = 100


@dataclass(frozen=True, eq=False)
class TrajectoryDistribution:
    """Gaussian over trajectories: mean poses plus joint tangent precision.

    mean holds n+1 poses; the tangent variable stacks steps 1..n (6n dims).
    Freshly encoded distributions keep the block-tridiagonal precision and
    the per-step relative covariances; adapted (conditioned/fused) posteriors
    store a dense covariance instead, because conditioning fills the band in.
    """

    mean: tuple
    space: Space
    rel_cov: np.ndarray | None = None          # (n, 6, 6) when banded
    precision: BlockTridiagonal | None = None  # banded form
    covariance_dense: np.ndarray | None = None  # (6n, 6n) dense form

    def __post_init__(self):
        if (self.precision is None) == (self.covariance_dense is None):
            raise InvalidArgumentError(
                "exactly one of precision (banded) or covariance_dense required"
            )

    @property
    def n_steps(self) -> int:
        """Number of tangent blocks n (mean has n + 1 poses)."""
        return len(self.mean) - 1

    @property
    def dim(self) -> int:
        return 6 * self.n_steps

    @property
    def is_banded(self) -> bool:
        return self.precision is not None

    @cached_property
    def covariance(self) -> np.ndarray:
        """Dense 6n x 6n covariance."""
        if self.covariance_dense is not None:
            return self.covariance_dense
        return self.precision.inverse_dense()

    @cached_property
    def precision_dense(self) -> np.ndarray:
        """Dense 6n x 6n precision."""
        if self.precision is not None:
            return self.precision.to_dense()
        P = np.linalg.inv(self.covariance_dense)
        return 0.5 * (P + P.T)

    def mean_trajectory(self) -> Trajectory:
        return Trajectory(self.mean, uniform_times(len(self.mean)))


def _mean_of_arrays_grouped(R, t, space, mu_R=None, mu_t=None):
    """Tangent-residual means of S independent pose sets, iterated together.

    R is (S, m, 3, 3) and t is (S, m, 3); returns (mu_R (S,3,3), mu_t (S,3)).
    Iterating every set in one batched pass keeps the per-call numpy overhead
    off the encode hot path.  Raises ConvergenceError past the iteration cap.
    """
    S, m = R.shape[0], R.shape[1]
    mu_R = R[:, 0].copy() if mu_R is None else np.array(mu_R, dtype=float)
    mu_t = t[:, 0].copy() if mu_t is None else np.array(mu_t, dtype=float)
    worst = np.inf
    for _ in range(MEAN_MAX_ITERATIONS):
        rel_R = np.einsum("sba,smbc->smac", mu_R, R)
        if space is Space.PCG3:
            rel_t = t - mu_t[:, None]
        else:
            rel_t = np.einsum("sba,smb->sma", mu_R, t - mu_t[:, None])
        xi = log_map_many(
            rel_R.reshape(S * m, 3, 3), rel_t.reshape(S * m, 3), space
        ).reshape(S, m, 6)
        worst = float(np.linalg.norm(xi.sum(axis=1), axis=1).max())
        if worst < MEAN_RESIDUAL_TOL:
            return mu_R, mu_t
        dR, dt = exp_map_many(xi.mean(axis=1), space)
        dR = dR.reshape(S, 3, 3)
        dt = dt.reshape(S, 3)
        if space is Space.PCG3:
            mu_t = mu_t + dt
        else:
            mu_t = np.einsum("sab,sb->sa", mu_R, dt) + mu_t
        mu_R = mu_R @ dR
    raise ConvergenceError(
        f"sample mean did not converge in {MEAN_MAX_ITERATIONS} iterations "
        f"(worst residual {worst:.3e})",
        residual=worst,
    )


def _mean_of_arrays(R, t, space, mu_R=None, mu_t=None):
    """Tangent-residual mean over stacked poses R (m,3,3), t (m,3)."""
    mu_R, mu_t = _mean_of_arrays_grouped(
        R[None], t[None], space,
        mu_R=None if mu_R is None else np.asarray(mu_R, dtype=float)[None],
        mu_t=None if mu_t is None else np.asarray(mu_t, dtype=float)[None],
    )
    return mu_R[0], mu_t[0]


def sample_mean(poses, init: Pose | None = None) -> Pose:
    """Bi-invariant sample mean: the pose where tangent residuals sum to zero.

    Iterates mu <- mu * exp(mean_k log(mu^{-1} g_k)) until
    ||sum_k log(mu^{-1} g_k)|| < 1e-8, capped at 100 iterations.  Starts from
    the first element unless an explicit initial guess is given (useful when
    the set is spread widely enough that the first element may sit more than
    pi away from some others).
    """
    poses = list(poses)
    if not poses:
        raise InvalidArgumentError("sample_mean needs at least one pose")
    space = poses[0].space
    if any(p.space != space for p in poses):
        raise InvalidArgumentError("sample_mean requires one shared space tag")
    if len(poses) == 1:
        return poses[0]
    if init is not None and init.space != space:
        raise InvalidArgumentError("initial guess space tag must match")
    R = np.stack([p.rotation for p in poses])
    t = np.stack([p.translation for p in poses])
    mu_R, mu_t = _mean_of_arrays(
        R, t, space,
        mu_R=None if init is None else init.rotation,
        mu_t=None if init is None else init.translation,
    )
    return Pose(mu_R, mu_t, space)


def _step_poses(demo_set: DemoSet, i: int):
    return [demo.poses[i] for demo in demo_set]


def _relative_arrays(R_i, t_i, R_j, t_j, space):
    """Relative poses g_i^{-1} g_j over stacked arrays (m,3,3)/(m,3)."""
    rel_R = np.einsum("nba,nbc->nac", R_i, R_j)
    if space is Space.PCG3:
        rel_t = t_j - t_i
    else:
        rel_t = np.einsum("nba,nb->na", R_i, t_j - t_i)
    return rel_R, rel_t


def _scatter_about_mean_grouped(rel_R, rel_t, space, lambda_reg):
    """Per-set scatter of tangent residuals about each set's mean.

    rel_R is (S, m, 3, 3), rel_t is (S, m, 3); returns (S, 6, 6), each the
    outer-product average over m plus the regularization floor.
    """
    S, m = rel_R.shape[0], rel_R.shape[1]
    mu_R, mu_t = _mean_of_arrays_grouped(rel_R, rel_t, space)
    d_R = np.einsum("sba,smbc->smac", mu_R, rel_R)
    if space is Space.PCG3:
        d_t = rel_t - mu_t[:, None]
    else:
        d_t = np.einsum("sba,smb->sma", mu_R, rel_t - mu_t[:, None])
    xi = log_map_many(
        d_R.reshape(S * m, 3, 3), d_t.reshape(S * m, 3), space
    ).reshape(S, m, 6)
    cov = np.einsum("smi,smj->sij", xi, xi) / m
    cov += lambda_reg * np.eye(6)
    return 0.5 * (cov + np.transpose(cov, (0, 2, 1)))


def _scatter_about_mean(rel_R, rel_t, space, lambda_reg):
    """Outer-product scatter of tangent residuals about the set's mean,
    divided by the sample count, plus the regularization floor."""
    return _scatter_about_mean_grouped(rel_R[None], rel_t[None], space,
                                       lambda_reg)[0]


def relative_covariance(
    demo_set: DemoSet, i: int, lambda_reg: float = DEFAULT_LAMBDA_REG
) -> np.ndarray:
    """Covariance of the step i -> i+1 relative pose across demonstrations.

    Scatter of log(mu_rel^{-1} delta_k) around the relative-pose mean, divided
    by the demo count, plus lambda_reg * eye(6).  Symmetric PSD by
    construction.
    """
    if not 0 <= i < demo_set.n_points - 1:
        raise InvalidArgumentError(f"step index {i} out of range")
    R_i = np.stack([d.poses[i].rotation for d in demo_set])
    t_i = np.stack([d.poses[i].translation for d in demo_set])
    R_j = np.stack([d.poses[i + 1].rotation for d in demo_set])
    t_j = np.stack([d.poses[i + 1].translation for d in demo_set])
    rel_R, rel_t = _relative_arrays(R_i, t_i, R_j, t_j, demo_set.space)
    return _scatter_about_mean(rel_R, rel_t, demo_set.space, lambda_reg)


def assemble_precision(
    means, rel_cov: np.ndarray, space: Space
) -> BlockTridiagonal:
    """Joint precision over tangent steps 1..n from per-step quantities.

    Diagonal block i is inv(rel_cov[i-1]) plus the transported term
    inv(Ad Sigma Ad^T) for the outgoing step; the super-diagonal block is
    -Ad^{-T} inv(Sigma); the sub-diagonal is its transpose.
    """
    n = len(means) - 1
    if rel_cov.shape != (n, 6, 6):
        raise InvalidArgumentError(
            f"expected {n} relative covariances, got {rel_cov.shape}"
        )
    sigma_inv = np.linalg.inv(rel_cov)
    ads = np.stack(
        [adjoint(relative(means[i], means[i + 1])) for i in range(n)]
    )
    diag = np.empty((n, 6, 6))
    off = np.empty((max(n - 1, 0), 6, 6))
    for i in range(1, n + 1):
        block = sigma_inv[i - 1].copy()
        if i <= n - 1:
            ad_inv = np.linalg.inv(ads[i])
            transported = ad_inv.T @ sigma_inv[i] @ ad_inv
            block = block + transported
            off[i - 1] = -ad_inv.T @ sigma_inv[i]
        diag[i - 1] = 0.5 * (block + block.T)
    return BlockTridiagonal(diag, off)


def encode(
    demo_set: DemoSet, lambda_reg: float = DEFAULT_LAMBDA_REG
) -> TrajectoryDistribution:
    """Encode aligned demonstrations into a trajectory distribution.

    The mean trajectory is the per-step sample mean of the absolute poses;
    the joint precision couples adjacent steps only (block-tridiagonal).
    Step 0 is fixed at its mean and carries no tangent variable.
    """
    n_points = demo_set.n_points
    if n_points < 3:
        raise InvalidArgumentError("need at least 3 points (2 steps) to encode")
    space = demo_set.space
    # (n_points, m, ...) stacks shared by the mean and covariance passes.
    R = np.stack([d.rotations() for d in demo_set]).transpose(1, 0, 2, 3)
    t = np.stack([d.translations() for d in demo_set]).transpose(1, 0, 2)
    mu_R, mu_t = _mean_of_arrays_grouped(R, t, space)
    means = tuple(Pose(mu_R[i], mu_t[i], space) for i in range(n_points))
    # Relative poses g_i^{-1} g_{i+1} for every step and demo at once.
    rel_R = np.einsum("smba,smbc->smac", R[:-1], R[1:])
    if space is Space.PCG3:
        rel_t = t[1:] - t[:-1]
    else:
        rel_t = np.einsum("smba,smb->sma", R[:-1], t[1:] - t[:-1])
    rel_cov = _scatter_about_mean_grouped(rel_R, rel_t, space, lambda_reg)
    precision = assemble_precision(means, rel_cov, space)
    return TrajectoryDistribution(
        mean=means, space=space, rel_cov=rel_cov, precision=precision
    )


def tangent_samples(
    dist: TrajectoryDistribution, count: int, seed: int
) -> np.ndarray:
    """Draw tangent vectors x ~ N(0, Sigma'), shape (count, 6n)."""
    if count < 1:
        raise InvalidArgumentError("sample count must be positive")
    rng = np.random.default_rng(seed)
    if dist.is_banded:
        return dist.precision.sample_gaussian(count, rng)
    # Dense posterior: factor the recomputed precision and solve L^T x = z.
    try:
        L = np.linalg.cholesky(dist.precision_dense)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            "distribution precision is not positive definite"
        ) from exc
    z = rng.standard_normal((count, dist.dim))
    return np.linalg.solve(L.T, z.T).T


def trajectories_from_tangents(
    dist: TrajectoryDistribution, xs: np.ndarray
):
    """Materialize trajectories g_i = mu_i * exp(x_i) from tangent rows
    (count, 6n); step 0 always equals the mean's start pose."""
    n = dist.n_steps
    times = uniform_times(n + 1)
    mu_R = np.stack([p.rotation for p in dist.mean])
    mu_t = np.stack([p.translation for p in dist.mean])
    out = []
    for x in np.atleast_2d(xs):
        dR, dt = exp_map_many(x.reshape(n, 6), dist.space)
        poses = [dist.mean[0]]
        if dist.space is Space.PCG3:
            R = mu_R[1:] @ dR
            t = mu_t[1:] + dt
        else:
            R = mu_R[1:] @ dR
            t = np.einsum("nij,nj->ni", mu_R[1:], dt) + mu_t[1:]
        for k in range(n):
            poses.append(Pose(R[k], t[k], dist.space))
        out.append(Trajectory(tuple(poses), times))
    return out


def sample_trajectories(
    dist: TrajectoryDistribution, count: int, seed: int
):
    """Sample trajectories g_i = mu_i * exp(x_i) with x ~ N(0, Sigma').

    Deterministic under a fixed seed; step 0 always equals the mean's start
    pose.  Returns a list of Trajectory of the same length as the mean.
    """
    return trajectories_from_tangents(dist, tangent_samples(dist, count, seed))
