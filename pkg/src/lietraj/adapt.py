"""Adaptation operators on trajectory distributions.

Via-pose conditioning, start re-anchoring, change of viewing frame, and
fusion with a robot's workspace density.  Conditioning treats the desired
pose as a noisy observation of one tangent block and applies the standard
Gaussian update; the posterior covariance is formed in Joseph form, which is
algebraically identical to the short form (I - KC) Sigma but keeps the result
symmetric PSD.  Posteriors lose the band structure and are stored dense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encode import TrajectoryDistribution, assemble_precision
from .errors import InvalidArgumentError
from .liegroup import (
    Pose,
    adjoint,
    compose,
    exp_map,
    inverse,
    log_map,
    relative,
)

PSD_TOL = 1e-10


def _check_psd(sigma: np.ndarray, name: str) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (6, 6):
        raise InvalidArgumentError(f"{name} must be 6x6, got {sigma.shape}")
    if not np.allclose(sigma, sigma.T, atol=1e-9):
        raise InvalidArgumentError(f"{name} must be symmetric")
    eigvals = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    if eigvals.min() < -PSD_TOL:
        raise InvalidArgumentError(
            f"{name} must be positive semidefinite (min eigenvalue "
            f"{eigvals.min():.3e})"
        )
    return 0.5 * (sigma + sigma.T)


@dataclass(frozen=True, eq=False)
class ViaPoseConstraint:
    """A desired pose at normalized time t with observation covariance."""

    t: float
    g_star: Pose
    sigma_star: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise InvalidArgumentError(f"via time must lie in [0, 1], got {self.t}")
        object.__setattr__(self, "sigma_star", _check_psd(self.sigma_star, "sigma_star"))

    def step_index(self, n: int) -> int:
        """Map t to a tangent step index; 0 means "reanchor the start"."""
        return int(np.clip(round(self.t * n), 0, n))


@dataclass(frozen=True, eq=False)
class ViewChange:
    """Relative transformation h from the current frame to a new frame."""

    h: Pose


def _updated_means(dist: TrajectoryDistribution, x_hat: np.ndarray):
    """Right-perturb means 1..n by the tangent update blocks."""
    n = dist.n_steps
    blocks = x_hat.reshape(n, 6)
    new_means = [dist.mean[0]]
    for i in range(n):
        new_means.append(compose(dist.mean[i + 1], exp_map(blocks[i], dist.space)))
    return tuple(new_means)


def _kalman_update(sigma, x_hat, rows, innovation_cov, y):
    """One Gaussian observation update in a fixed tangent frame.

    Observes y = C x + noise for the tangent blocks in `rows` (0-based into
    steps 1..n), given the current estimate (x_hat, sigma) expressed in the
    prior's tangent frame.  Joseph-form covariance keeps the result symmetric
    PD.  Returns (x_hat', sigma').
    """
    dim = sigma.shape[0]
    C = np.zeros((6 * len(rows), dim))
    for k, i in enumerate(rows):
        C[6 * k:6 * (k + 1), 6 * i:6 * (i + 1)] = np.eye(6)
    S = C @ sigma @ C.T + innovation_cov
    try:
        S_inv = np.linalg.inv(S)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError(
            "singular innovation covariance; observation noise must be PSD"
        ) from exc
    K = sigma @ C.T @ S_inv
    x_new = x_hat + K @ (y - C @ x_hat)
    I_KC = np.eye(dim) - K @ C
    post = I_KC @ sigma @ I_KC.T + K @ innovation_cov @ K.T
    return x_new, 0.5 * (post + post.T)


def _posterior(
    dist: TrajectoryDistribution,
    rows: np.ndarray,
    innovation_cov: np.ndarray,
    y: np.ndarray,
) -> TrajectoryDistribution:
    x_hat, post = _kalman_update(
        dist.covariance, np.zeros(dist.dim), rows, innovation_cov, y
    )
    return TrajectoryDistribution(
        mean=_updated_means(dist, x_hat),
        space=dist.space,
        rel_cov=None,
        precision=None,
        covariance_dense=post,
    )


def reanchor_start(dist: TrajectoryDistribution, g0_new: Pose) -> TrajectoryDistribution:
    """Shift the whole mean trajectory so it starts at g0_new.

    Means become g0_new * (mu_0^{-1} mu_i), which preserves every relative
    pose, so the tangent covariance structure is unchanged.  The banded
    precision is reassembled from the new means for uniformity.
    """
    if g0_new.space != dist.space:
        raise InvalidArgumentError("start pose space tag must match distribution")
    shift = compose(g0_new, inverse(dist.mean[0]))
    new_means = tuple(compose(shift, mu) for mu in dist.mean)
    if dist.is_banded:
        precision = assemble_precision(new_means, dist.rel_cov, dist.space)
        return TrajectoryDistribution(
            mean=new_means, space=dist.space, rel_cov=dist.rel_cov,
            precision=precision,
        )
    return TrajectoryDistribution(
        mean=new_means, space=dist.space, rel_cov=None, precision=None,
        covariance_dense=dist.covariance_dense,
    )


def condition_on_via(
    dist: TrajectoryDistribution, via: ViaPoseConstraint
) -> TrajectoryDistribution:
    """Condition the distribution on passing near a via pose.

    The observation is y = log(mu_i^{-1} g*) on the tangent block of step i;
    posterior means are mu_j * exp(x_hat_j).  A via at t = 0 is routed to
    :func:`reanchor_start` because step 0 is deterministic.
    """
    if via.g_star.space != dist.space:
        raise InvalidArgumentError("via pose space tag must match distribution")
    n = dist.n_steps
    idx = via.step_index(n)
    if idx == 0:
        return reanchor_start(dist, via.g_star)
    y = log_map(relative(dist.mean[idx], via.g_star))
    return _posterior(dist, np.array([idx - 1]), via.sigma_star, y)


def condition_on_via_set(
    dist: TrajectoryDistribution, vias
) -> TrajectoryDistribution:
    """Apply several via constraints sequentially in ascending time order.

    Step indices must be distinct after mapping; a t = 0 entry is applied
    first as a start re-anchor.  The sequential updates accumulate in the
    prior's tangent frame (one linearization point), so independent
    observations at distinct steps reproduce the joint update exactly and
    the result does not depend on the constraint order.
    """
    vias = list(vias)
    if not vias:
        return dist
    n = dist.n_steps
    indices = [v.step_index(n) for v in vias]
    if len(set(indices)) != len(indices):
        raise InvalidArgumentError(
            f"via constraints map to duplicate step indices: {sorted(indices)}"
        )
    out = dist
    ordered = sorted(vias, key=lambda v: v.t)
    if ordered[0].step_index(n) == 0:
        out = reanchor_start(out, ordered[0].g_star)
        ordered = ordered[1:]
        if not ordered:
            return out
    for via in ordered:
        if via.g_star.space != out.space:
            raise InvalidArgumentError("via pose space tag must match distribution")
    sigma = out.covariance
    x_hat = np.zeros(out.dim)
    for via in ordered:
        idx = via.step_index(n)
        y = log_map(relative(out.mean[idx], via.g_star))
        x_hat, sigma = _kalman_update(sigma, x_hat, [idx - 1], via.sigma_star, y)
    return TrajectoryDistribution(
        mean=_updated_means(out, x_hat),
        space=out.space,
        rel_cov=None,
        precision=None,
        covariance_dense=sigma,
    )


def change_view(dist: TrajectoryDistribution, view: ViewChange) -> TrajectoryDistribution:
    """Re-express the distribution in a new viewing frame.

    Means are conjugated mu_i -> h^{-1} mu_i h.  Tangent blocks transform by
    Ad^{-1}(h), so relative covariances map congruently and the banded
    precision is reassembled with the conjugated means; a dense covariance
    maps by the block-diagonal congruence directly.
    """
    h = view.h
    if h.space != dist.space:
        raise InvalidArgumentError("view pose space tag must match distribution")
    h_inv = inverse(h)
    new_means = tuple(compose(compose(h_inv, mu), h) for mu in dist.mean)
    A = adjoint(h_inv)
    if dist.is_banded:
        rel_cov = np.einsum("ab,nbc,dc->nad", A, dist.rel_cov, A)
        rel_cov = 0.5 * (rel_cov + np.transpose(rel_cov, (0, 2, 1)))
        precision = assemble_precision(new_means, rel_cov, dist.space)
        return TrajectoryDistribution(
            mean=new_means, space=dist.space, rel_cov=rel_cov, precision=precision
        )
    n = dist.n_steps
    big = np.kron(np.eye(n), A)
    cov = big @ dist.covariance_dense @ big.T
    return TrajectoryDistribution(
        mean=new_means, space=dist.space, rel_cov=None, precision=None,
        covariance_dense=0.5 * (cov + cov.T),
    )


def transform_via(via: ViaPoseConstraint, view: ViewChange) -> ViaPoseConstraint:
    """The via constraint as seen from the new frame (pose conjugated,
    covariance mapped by Ad^{-1}(h))."""
    h_inv = inverse(view.h)
    g = compose(compose(h_inv, via.g_star), view.h)
    A = adjoint(h_inv)
    return ViaPoseConstraint(via.t, g, A @ via.sigma_star @ A.T)


def fuse_workspace_density(dist: TrajectoryDistribution, wd) -> TrajectoryDistribution:
    """Pull every step toward the high-density region of a robot workspace.

    Every tangent block is observed as y_i = log(mu_i^{-1} g_wd) with noise
    covariance sigma_wd, i.e. a joint update with gain
    Sigma' (Sigma' + I_n (x) sigma_wd)^{-1}.
    """
    if wd.g_wd.space != dist.space:
        raise InvalidArgumentError("workspace density space tag must match")
    sigma_wd = _check_psd(wd.sigma_wd, "sigma_wd")
    n = dist.n_steps
    y = np.concatenate(
        [log_map(relative(dist.mean[i + 1], wd.g_wd)) for i in range(n)]
    )
    innovation = np.kron(np.eye(n), sigma_wd)
    return _posterior(dist, np.arange(n), innovation, y)
