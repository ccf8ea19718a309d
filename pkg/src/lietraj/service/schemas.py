"""Pydantic request/response models and converters to core objects."""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from ..adapt import ViaPoseConstraint
from ..encode import TrajectoryDistribution, assemble_precision
from ..errors import ParseError
from ..liegroup import Pose, Space, project_rotation
from ..planner import PlanningScene, Sphere, StompParams
from ..trajectory import DemoSet, Trajectory
from ..workspace import Joint, KinematicChain

SpaceName = Literal["se3", "pcg3"]


class PoseModel(BaseModel):
    rotation: list[list[float]]
    translation: list[float]


class TrajectoryModel(BaseModel):
    space: SpaceName = "se3"
    times: list[float]
    poses: list[PoseModel]


class DistributionModel(BaseModel):
    space: SpaceName
    kind: Literal["banded", "dense"]
    mean: list[PoseModel]
    rel_cov: Optional[list[list[list[float]]]] = None
    covariance: Optional[list[list[float]]] = None


class ViaModel(BaseModel):
    t: float
    pose: PoseModel
    sigma: list[list[float]]


class JointModel(BaseModel):
    axis: list[float]
    offset: PoseModel
    limits: list[float]


class ChainModel(BaseModel):
    joints: list[JointModel]
    ee_offset: PoseModel


class SphereModel(BaseModel):
    center: list[float]
    radius: float


class SceneModel(BaseModel):
    spheres: list[SphereModel] = Field(default_factory=list)
    clearance: float = 0.0
    body_radius: float = 0.05


class StompParamsModel(BaseModel):
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


class DensityModel(BaseModel):
    pose: PoseModel
    sigma: list[list[float]]


class MetricsModel(BaseModel):
    d_demo_rot: float = 0.0
    d_demo_tran: float = 0.0
    d_via_rot: float = 0.0
    d_via_tran: float = 0.0
    e_rot: float = 0.0
    e_tran: float = 0.0
    encode_ms: float = 0.0
    condition_ms: float = 0.0


class PointSetsModel(BaseModel):
    mean: Optional[list[list[float]]] = None
    samples: list[list[list[float]]] = Field(default_factory=list)
    demos: list[list[list[float]]] = Field(default_factory=list)
    planned: Optional[list[list[float]]] = None


# ---------------------------------------------------------------------------
# Requests / responses
# ---------------------------------------------------------------------------


class AlignRequest(BaseModel):
    trajectories: list[TrajectoryModel]
    n_step: int = 50
    smooth_window: int = 0


class AlignResponse(BaseModel):
    trajectories: list[TrajectoryModel]
    tau_star: list[list[float]]


class EncodeRequest(BaseModel):
    demos: list[TrajectoryModel]
    lambda_reg: float = 1e-6


class EncodeResponse(BaseModel):
    distribution: DistributionModel
    elapsed_ms: float


class ConditionRequest(BaseModel):
    distribution: DistributionModel
    vias: list[ViaModel]


class ConditionResponse(BaseModel):
    distribution: DistributionModel
    elapsed_ms: float


class SampleRequest(BaseModel):
    distribution: DistributionModel
    count: int = 10
    seed: int = 0


class SampleResponse(BaseModel):
    trajectories: list[TrajectoryModel]


class FuseRequest(BaseModel):
    distribution: DistributionModel
    chain: Optional[ChainModel] = None
    samples_per_joint: int = 25
    seed: int = 0


class FuseResponse(BaseModel):
    distribution: DistributionModel
    density: DensityModel


class PlanRequest(BaseModel):
    distribution: DistributionModel
    chain: Optional[ChainModel] = None
    scene: Optional[SceneModel] = None
    params: Optional[StompParamsModel] = None
    seed: int = 0


class PlanResponse(BaseModel):
    waypoints: list[list[float]]
    collision_free: bool
    cost_history: list[float]
    iterations_used: int
    planning_time_ms: float
    ee_trajectory: TrajectoryModel


class GenDemosRequest(BaseModel):
    shape: Literal["N", "U", "S", "arc", "screw"] = "N"
    n_points: int = 200
    noise_scale: float = 0.005
    warp_scale: Optional[float] = None
    n_demos: int = 5
    seed: int = 0
    space: SpaceName = "se3"
    tangent_aligned: bool = False


class GenDemosResponse(BaseModel):
    demos: list[TrajectoryModel]


class ReportRequest(BaseModel):
    demos: list[TrajectoryModel]
    distribution: Optional[DistributionModel] = None
    samples: Optional[list[TrajectoryModel]] = None
    sample_count: int = 50
    seed: int = 0
    via: Optional[ViaModel] = None
    plan_waypoints: Optional[list[list[float]]] = None
    chain: Optional[ChainModel] = None
    time_ops: bool = False
    lambda_reg: float = 1e-6


class ReportResponse(BaseModel):
    metrics: MetricsModel
    points: PointSetsModel


class HealthResponse(BaseModel):
    status: str
    version: str


# ---------------------------------------------------------------------------
# Converters
# ---------------------------------------------------------------------------


def pose_to_model(pose: Pose) -> PoseModel:
    return PoseModel(
        rotation=pose.rotation.tolist(), translation=pose.translation.tolist()
    )


def pose_from_model(model: PoseModel, space) -> Pose:
    R = np.array(model.rotation, dtype=float)
    if R.shape != (3, 3):
        raise ParseError(f"pose rotation must be 3x3, got {R.shape}")
    defect = np.linalg.norm(R.T @ R - np.eye(3))
    if defect > 1e-6:
        raise ParseError(f"pose rotation not orthonormal (defect {defect:.2e})")
    if defect > 1e-9:
        R = project_rotation(R)
    return Pose(R, np.array(model.translation, dtype=float), Space(space))


def trajectory_to_model(traj: Trajectory) -> TrajectoryModel:
    return TrajectoryModel(
        space=traj.space.value,
        times=traj.times.tolist(),
        poses=[pose_to_model(p) for p in traj.poses],
    )


def trajectory_from_model(model: TrajectoryModel) -> Trajectory:
    poses = tuple(pose_from_model(p, model.space) for p in model.poses)
    return Trajectory(poses, np.array(model.times, dtype=float))


def demo_set_from_models(models) -> DemoSet:
    return DemoSet(tuple(trajectory_from_model(m) for m in models))


def distribution_to_model(dist: TrajectoryDistribution) -> DistributionModel:
    return DistributionModel(
        space=dist.space.value,
        kind="banded" if dist.is_banded else "dense",
        mean=[pose_to_model(p) for p in dist.mean],
        rel_cov=dist.rel_cov.tolist() if dist.is_banded else None,
        covariance=None if dist.is_banded else dist.covariance_dense.tolist(),
    )


def distribution_from_model(model: DistributionModel) -> TrajectoryDistribution:
    space = Space(model.space)
    mean = tuple(pose_from_model(p, space) for p in model.mean)
    n = len(mean) - 1
    if model.kind == "banded":
        if model.rel_cov is None:
            raise ParseError("banded distribution requires rel_cov")
        rel_cov = np.array(model.rel_cov, dtype=float)
        if rel_cov.shape != (n, 6, 6):
            raise ParseError(
                f"rel_cov must have shape ({n}, 6, 6), got {rel_cov.shape}"
            )
        precision = assemble_precision(mean, rel_cov, space)
        return TrajectoryDistribution(
            mean=mean, space=space, rel_cov=rel_cov, precision=precision
        )
    if model.covariance is None:
        raise ParseError("dense distribution requires covariance")
    cov = np.array(model.covariance, dtype=float)
    if cov.shape != (6 * n, 6 * n):
        raise ParseError(
            f"covariance must be ({6 * n}, {6 * n}), got {cov.shape}"
        )
    return TrajectoryDistribution(mean=mean, space=space, covariance_dense=cov)


def via_from_model(model: ViaModel, space) -> ViaPoseConstraint:
    return ViaPoseConstraint(
        t=model.t,
        g_star=pose_from_model(model.pose, space),
        sigma_star=np.array(model.sigma, dtype=float),
    )


def chain_from_model(model: Optional[ChainModel]) -> KinematicChain:
    from ..workspace import default_chain

    if model is None:
        return default_chain()
    joints = tuple(
        Joint(
            offset=pose_from_model(j.offset, Space.SE3),
            axis=np.array(j.axis, dtype=float),
            limits=(j.limits[0], j.limits[1]),
        )
        for j in model.joints
    )
    return KinematicChain(joints, pose_from_model(model.ee_offset, Space.SE3))


def scene_from_model(model: Optional[SceneModel]) -> PlanningScene:
    if model is None:
        return PlanningScene()
    return PlanningScene(
        obstacles=tuple(
            Sphere(np.array(s.center, dtype=float), s.radius) for s in model.spheres
        ),
        clearance=model.clearance,
        body_radius=model.body_radius,
    )


def params_from_model(model: Optional[StompParamsModel]) -> StompParams:
    if model is None:
        return StompParams()
    return StompParams(**model.model_dump())
