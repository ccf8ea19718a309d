"""Stochastic joint-space trajectory optimization guided by a pose-trajectory
distribution.

The planner perturbs a joint trajectory with smoothness-correlated noise,
scores every rollout per step with a workspace cost, and applies the
probability-weighted update.  The per-step cost combines a guidance term (the
average Lie-group distance between the rollout's end-effector pose and random
samples drawn once from the reference distribution) with a sphere-obstacle
penetration term.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .encode import (
    TrajectoryDistribution,
    tangent_samples,
    trajectories_from_tangents,
)
from .errors import IKError, InvalidArgumentError, PlannerInitError
from .liegroup import Pose, Space, rotation_angles_between
from .trajectory import Trajectory
from .workspace import (
    KinematicChain,
    forward_kinematics,
    forward_kinematics_batch,
    inverse_kinematics,
)


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.array(self.center, dtype=float).reshape(3)
        if self.radius <= 0.0:
            raise InvalidArgumentError("sphere radius must be positive")
        center.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True, eq=False)
class PlanningScene:
    """Sphere obstacles plus a safety clearance; the robot body is
    approximated by spheres of body_radius placed along each link."""

    obstacles: tuple = ()
    clearance: float = 0.0
    body_radius: float = 0.05

    def __post_init__(self):
        if self.clearance < 0.0:
            raise InvalidArgumentError("clearance must be nonnegative")
        if self.body_radius <= 0.0:
            raise InvalidArgumentError("body_radius must be positive")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))


@dataclass(frozen=True, eq=False)
class StompParams:
    """Optimizer knobs.

    The guidance weights w_rot and w_tran default to 1.0; the remaining
    values follow common practice for this family of planners and are all
    user-overridable.
    """

    n_rollouts: int = 20
    n_iterations: int = 100
    noise_stddev: float = 0.05
    temperature: float = 10.0
    w_rot: float = 1.0
    w_tran: float = 1.0
    w_obs: float = 10.0
    w_smooth: float = 0.0
    w_guide: float = 1.0
    m_r: int = 20
    # Extra shell (meters) the rollout scoring inflates obstacles by, so the
    # optimizer crosses the true clearance boundary in finite time instead of
    # creeping up on it; collision reporting always uses the true threshold.
    soft_margin: float = 0.02

    def __post_init__(self):
        if self.n_rollouts < 2 or self.n_rollouts % 2 != 0:
            raise InvalidArgumentError(
                "n_rollouts must be an even count >= 2 (noise is paired +/-)"
            )
        if self.n_iterations < 0:
            raise InvalidArgumentError("n_iterations must be nonnegative")
        for name in ("noise_stddev", "temperature", "w_rot", "w_tran", "m_r"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class JointTrajectory:
    """Waypoints (N, m) in radians; endpoints held fixed by the planner."""

    waypoints: np.ndarray
    fixed_endpoints: bool = True

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=float)
        if w.ndim != 2:
            raise InvalidArgumentError("waypoints must be a 2-D array")
        w.flags.writeable = False
        object.__setattr__(self, "waypoints", w)

    @property
    def n_steps(self) -> int:
        return self.waypoints.shape[0]


@dataclass(frozen=True, eq=False)
class PlanResult:
    trajectory: JointTrajectory
    cost_history: np.ndarray
    collision_free: bool
    planning_time_s: float
    iterations_used: int


@dataclass(frozen=True, eq=False)
class PlanMetrics:
    e_rot: float
    e_tran: float
    collision_free: bool
    planning_time_s: float
    iterations_used: int


# ---------------------------------------------------------------------------
# Cost terms
# ---------------------------------------------------------------------------


def _reference_arrays(ref_samples):
    """Stack reference sample poses: (rotations (S, N, 3, 3), translations)."""
    R = np.stack([traj.rotations() for traj in ref_samples])
    t = np.stack([traj.translations() for traj in ref_samples])
    return R, t


def guidance_cost(
    chain: KinematicChain,
    q_i,
    t_i: int,
    ref_samples,
    w_rot: float = 1.0,
    w_tran: float = 1.0,
) -> float:
    """Average workspace distance from fk(q_i) to the reference samples at
    step t_i: mean_k of w_rot * ||log(R^T R_k)|| + w_tran * ||t - t_k||."""
    ref_samples = list(ref_samples)
    if not ref_samples:
        raise InvalidArgumentError("guidance cost needs reference samples")
    n_step = len(ref_samples[0])
    if not 0 <= t_i < n_step:
        raise InvalidArgumentError(f"step {t_i} out of range for {n_step}")
    ee, _ = forward_kinematics(chain, q_i)
    R_ref = np.stack([traj.poses[t_i].rotation for traj in ref_samples])
    t_ref = np.stack([traj.poses[t_i].translation for traj in ref_samples])
    angles = rotation_angles_between(ee.rotation[None], R_ref)[0]
    d_tran = np.linalg.norm(ee.translation[None] - t_ref, axis=1)
    return float(np.mean(w_rot * angles + w_tran * d_tran))


def _segment_fractions(chain: KinematicChain, spacing: float = 0.05):
    """Interpolation fractions per link segment so body spheres sit at most
    `spacing` apart.  Link lengths are configuration-independent for rigid
    links, so this is computed once per chain."""
    lengths = [np.linalg.norm(j.offset.translation) for j in chain.joints]
    lengths.append(np.linalg.norm(chain.ee_offset.translation))
    fracs = []
    for length in lengths:
        n_sub = max(int(np.ceil(length / spacing)), 1)
        fracs.append(np.arange(1, n_sub + 1) / n_sub)
    return fracs


def body_points_batch(chain: KinematicChain, q: np.ndarray,
                      spacing: float = 0.05) -> np.ndarray:
    """Collision proxy points along the arm, vectorized over configurations:
    the base plus points every `spacing` meters along each link segment.
    Returns (B, P, 3)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    _, _, origins = forward_kinematics_batch(chain, q, return_origins=True)
    parts = [origins[:, :1]]
    for seg, fracs in enumerate(_segment_fractions(chain, spacing)):
        a = origins[:, seg, None]
        b = origins[:, seg + 1, None]
        parts.append(a + (b - a) * fracs[None, :, None])
    return np.concatenate(parts, axis=1)


def _penetrations_batch(chain: KinematicChain, q: np.ndarray,
                        scene: PlanningScene, margin: float = 0.0) -> np.ndarray:
    """Summed clearance violations per configuration, shape (B,)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if not scene.obstacles:
        return np.zeros(q.shape[0])
    pts = body_points_batch(chain, q)
    total = np.zeros(q.shape[0])
    for obs in scene.obstacles:
        d = np.linalg.norm(pts - obs.center[None, None], axis=2)
        pen = scene.clearance + scene.body_radius + obs.radius + margin - d
        total += np.maximum(pen, 0.0).sum(axis=1)
    return total


def obstacle_cost(
    chain: KinematicChain, q_i, scene: PlanningScene
) -> float:
    """Summed penetration of body spheres into (obstacle + clearance) shells;
    zero when every body point keeps its distance."""
    if not scene.obstacles:
        return 0.0
    return float(_penetrations_batch(chain, np.asarray(q_i, dtype=float), scene)[0])


def _rollout_costs(
    chain: KinematicChain,
    rollouts: np.ndarray,
    ref_R: np.ndarray,
    ref_t: np.ndarray,
    scene: PlanningScene,
    params: StompParams,
) -> np.ndarray:
    """Per-step costs for a batch of rollouts (K, N, m) -> (K, N)."""
    K, N, m = rollouts.shape
    flat = rollouts.reshape(K * N, m)
    R, t = forward_kinematics_batch(chain, flat)
    # Guidance: distances to the S reference samples at the matching step.
    S = ref_R.shape[0]
    cost = np.zeros(K * N)
    step_idx = np.tile(np.arange(N), K)
    for s in range(S):
        Rs = ref_R[s][step_idx]
        ts = ref_t[s][step_idx]
        tr = np.einsum("nab,nab->n", R, Rs)
        ang = np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
        d = np.linalg.norm(t - ts, axis=1)
        cost += params.w_rot * ang + params.w_tran * d
    cost *= params.w_guide / S
    cost = cost.reshape(K, N)
    if scene.obstacles:
        obs = _penetrations_batch(chain, flat, scene,
                                  margin=params.soft_margin).reshape(K, N)
        cost = cost + params.w_obs * obs
    if params.w_smooth > 0.0:
        acc = np.zeros((K, N))
        acc[:, 1:-1] = np.sum(
            (rollouts[:, 2:] - 2.0 * rollouts[:, 1:-1] + rollouts[:, :-2]) ** 2,
            axis=2,
        )
        cost = cost + params.w_smooth * acc
    return cost


# ---------------------------------------------------------------------------
# STOMP machinery
# ---------------------------------------------------------------------------


def _smoothing_matrices(n_free: int):
    """Finite-difference acceleration matrix machinery.

    Returns (noise_chol, M): a Cholesky factor of the normalized inverse
    control matrix R^{-1} = (A^T A)^{-1} for drawing correlated noise, and the
    column-rescaled projection M used to smooth the weighted update.
    """
    A = np.zeros((n_free + 2, n_free))
    for i in range(n_free):
        A[i, i] += 1.0
        A[i + 1, i] += -2.0
        A[i + 2, i] += 1.0
    R = A.T @ A
    R_inv = np.linalg.inv(R)
    scale = np.max(np.diag(R_inv))
    noise_cov = R_inv / scale
    noise_chol = np.linalg.cholesky(noise_cov + 1e-12 * np.eye(n_free))
    M = R_inv / (n_free * np.max(np.abs(R_inv), axis=0)[None, :])
    return noise_chol, M


def draw_rollout_noise(
    rng: np.random.Generator,
    params: StompParams,
    n_free: int,
    m: int,
    noise_chol: np.ndarray,
) -> np.ndarray:
    """Antithetic smoothness-correlated perturbations, shape (K, n_free, m).

    Rollouts come in +/- pairs, so the empirical mean across rollouts is
    exactly zero.
    """
    half = params.n_rollouts // 2
    z = rng.standard_normal((half, n_free, m))
    eps_half = params.noise_stddev * np.einsum("fe,kem->kfm", noise_chol, z)
    return np.concatenate([eps_half, -eps_half], axis=0)


IK_RETRY_SEEDS = 12


def _initial_joint_path(
    chain: KinematicChain, dist: TrajectoryDistribution, q_seed: np.ndarray
) -> np.ndarray:
    """IK of the distribution's mean trajectory, each waypoint seeded by the
    previous solution; failed waypoints retry from a deterministic sweep of
    alternative seeds before giving up."""
    waypoints = []
    q = np.asarray(q_seed, dtype=float).reshape(-1)
    retry_rng = np.random.default_rng(1234567)
    retries = retry_rng.uniform(
        0.7 * chain.lower_limits, 0.7 * chain.upper_limits,
        (IK_RETRY_SEEDS, chain.n_joints),
    )
    for k, pose in enumerate(dist.mean):
        # IK targets live in SE3; a PCG3 mean is the same (R, t) pair.
        target = pose if pose.space is Space.SE3 else Pose(
            pose.rotation, pose.translation)
        last_exc = None
        for seed in (q, *retries):
            try:
                q = inverse_kinematics(chain, target, seed)
                break
            except IKError as exc:
                last_exc = exc
        else:
            raise PlannerInitError(
                f"IK failed on mean waypoint {k}: {last_exc}"
            ) from last_exc
        waypoints.append(q)
    return np.stack(waypoints)


def stomp_plan(
    chain: KinematicChain,
    scene: PlanningScene,
    dist: TrajectoryDistribution,
    params: StompParams = StompParams(),
    seed: int = 0,
    q_seed=None,
) -> PlanResult:
    """Optimize a joint trajectory against the reference distribution.

    Initializes from IK of the mean trajectory, draws the reference samples
    once, then iterates: perturb with antithetic smoothness-correlated noise,
    score per step, softmax-weight by exponentiated cost, project the update
    through the smoothing matrix, and keep the endpoints fixed.  Returns the
    best trajectory seen (the initialization counts as a candidate) plus the
    per-iteration cost; deterministic under a fixed seed.  If the best
    trajectory still collides the result is flagged rather than raised.
    """
    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    if q_seed is None:
        q_seed = np.zeros(chain.n_joints)
    theta = _initial_joint_path(chain, dist, q_seed)
    N, m = theta.shape
    # Reference samples are drawn once per plan, in antithetic +/- tangent
    # pairs: the symmetric cloud makes the mean trajectory a per-step
    # minimizer of the guidance cost, so cost descent tracks the reference.
    half = tangent_samples(dist, max(params.m_r // 2, 1),
                           seed=int(rng.integers(2**63)))
    ref = trajectories_from_tangents(dist, np.concatenate([half, -half]))
    ref_R, ref_t = _reference_arrays(ref)

    def total_cost(path: np.ndarray) -> float:
        return float(
            _rollout_costs(chain, path[None], ref_R, ref_t, scene, params).sum()
        )

    def collision_free(path: np.ndarray) -> bool:
        if not scene.obstacles:
            return True
        return bool(np.all(_penetrations_batch(chain, path, scene) == 0.0))

    best_theta = theta.copy()
    best_cost = total_cost(theta)
    history = []
    if params.n_iterations == 0 or N <= 2:
        elapsed = time.perf_counter() - t_start
        return PlanResult(
            JointTrajectory(best_theta), np.array(history), collision_free(best_theta),
            elapsed, 0,
        )

    n_free = N - 2
    noise_chol, M = _smoothing_matrices(n_free)
    lo, hi = chain.lower_limits, chain.upper_limits
    for _ in range(params.n_iterations):
        eps = draw_rollout_noise(rng, params, n_free, m, noise_chol)
        rollouts = np.repeat(theta[None], params.n_rollouts, axis=0)
        rollouts[:, 1:-1] += eps
        rollouts = np.clip(rollouts, lo[None, None], hi[None, None])
        costs = _rollout_costs(chain, rollouts, ref_R, ref_t, scene, params)
        c_min = costs.min(axis=0, keepdims=True)
        c_max = costs.max(axis=0, keepdims=True)
        spread = np.maximum(c_max - c_min, 1e-10)
        weights = np.exp(-params.temperature * (costs - c_min) / spread)
        weights /= weights.sum(axis=0, keepdims=True)
        # Weight the noise actually applied after clipping, so the update
        # stays inside the joint limits.
        applied = rollouts[:, 1:-1] - theta[None, 1:-1]
        delta = np.einsum("kf,kfm->fm", weights[:, 1:-1], applied)
        delta = np.einsum("fe,em->fm", M, delta)
        theta = theta.copy()
        theta[1:-1] += delta
        theta = np.clip(theta, lo[None], hi[None])
        cost = total_cost(theta)
        history.append(cost)
        if cost < best_cost:
            best_cost = cost
            best_theta = theta.copy()
    elapsed = time.perf_counter() - t_start
    return PlanResult(
        JointTrajectory(best_theta),
        np.array(history),
        collision_free(best_theta),
        elapsed,
        params.n_iterations,
    )


def end_effector_trajectory(chain: KinematicChain, plan: JointTrajectory) -> Trajectory:
    """FK of every waypoint as a workspace trajectory on a uniform grid."""
    from .trajectory import uniform_times

    poses = []
    for q in plan.waypoints:
        ee, _ = forward_kinematics(chain, q)
        poses.append(Pose(ee.rotation, ee.translation))
    return Trajectory(tuple(poses), uniform_times(plan.n_steps))


def reference_errors(reference_poses, planned: Trajectory):
    """Accumulated per-step errors between a reference pose sequence and a
    planned path: sum of rotation log-norms and of translation distances."""
    ref_R = np.stack([p.rotation for p in reference_poses])
    ref_t = np.stack([p.translation for p in reference_poses])
    R = planned.rotations()
    t = planned.translations()
    if R.shape[0] != ref_R.shape[0]:
        raise InvalidArgumentError("plan and reference lengths differ")
    tr = np.einsum("nab,nab->n", ref_R, R)
    ang = np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
    e_rot = float(np.sum(ang))
    e_tran = float(np.sum(np.linalg.norm(t - ref_t, axis=1)))
    return e_rot, e_tran


def plan_report(
    result: PlanResult, dist: TrajectoryDistribution, scene: PlanningScene,
    chain: KinematicChain,
) -> PlanMetrics:
    """Accumulated rotation/translation error of the planned end-effector
    path against the distribution mean, plus bookkeeping from the run."""
    planned = end_effector_trajectory(chain, result.trajectory)
    e_rot, e_tran = reference_errors(dist.mean, planned)
    return PlanMetrics(
        e_rot=e_rot,
        e_tran=e_tran,
        collision_free=result.collision_free,
        planning_time_s=result.planning_time_s,
        iterations_used=result.iterations_used,
    )
