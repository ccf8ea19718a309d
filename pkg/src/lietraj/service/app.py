"""HTTP service exposing the trajectory-distribution pipeline.

Every endpoint is stateless: artifacts travel in the request/response bodies,
so any number of clients (or the bundled CLI) can share one server.  Errors
map onto status codes the CLI translates back into exit codes: 400 for
invalid payloads, 409 for numerical failures.
"""

from __future__ import annotations

import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..adapt import condition_on_via_set, fuse_workspace_density
from ..align import reparameterize
from ..bench import d_demo, d_via, generate_letter
from ..encode import encode, sample_trajectories
from ..errors import MATH_ERRORS, InvalidArgumentError, LieTrajError, ParseError
from ..planner import end_effector_trajectory, stomp_plan
from ..workspace import workspace_density
from . import schemas as sc

app = FastAPI(
    title="lietraj",
    version=__version__,
    description="Pose-trajectory distribution encoding, adaptation and planning",
)


@app.exception_handler(LieTrajError)
async def _lietraj_error_handler(request: Request, exc: LieTrajError):
    if isinstance(exc, MATH_ERRORS):
        status = 409
    elif isinstance(exc, (ParseError, InvalidArgumentError)):
        status = 400
    else:
        status = 500
    return JSONResponse(
        status_code=status,
        content={"detail": {"error_class": type(exc).__name__, "message": str(exc)}},
    )


@app.get("/health", response_model=sc.HealthResponse)
def health() -> sc.HealthResponse:
    return sc.HealthResponse(status="ok", version=__version__)


@app.post("/align", response_model=sc.AlignResponse)
def align(req: sc.AlignRequest) -> sc.AlignResponse:
    out = []
    taus = []
    for model in req.trajectories:
        traj = sc.trajectory_from_model(model)
        resampled, tau = reparameterize(
            traj, n_step=req.n_step, smooth_window=req.smooth_window
        )
        out.append(sc.trajectory_to_model(resampled))
        taus.append(tau.tolist())
    return sc.AlignResponse(trajectories=out, tau_star=taus)


@app.post("/encode", response_model=sc.EncodeResponse)
def encode_demos(req: sc.EncodeRequest) -> sc.EncodeResponse:
    demos = sc.demo_set_from_models(req.demos)
    start = time.perf_counter()
    dist = encode(demos, lambda_reg=req.lambda_reg)
    elapsed = (time.perf_counter() - start) * 1e3
    return sc.EncodeResponse(
        distribution=sc.distribution_to_model(dist), elapsed_ms=elapsed
    )


@app.post("/condition", response_model=sc.ConditionResponse)
def condition(req: sc.ConditionRequest) -> sc.ConditionResponse:
    dist = sc.distribution_from_model(req.distribution)
    vias = [sc.via_from_model(v, dist.space) for v in req.vias]
    start = time.perf_counter()
    post = condition_on_via_set(dist, vias)
    elapsed = (time.perf_counter() - start) * 1e3
    return sc.ConditionResponse(
        distribution=sc.distribution_to_model(post), elapsed_ms=elapsed
    )


@app.post("/sample", response_model=sc.SampleResponse)
def sample(req: sc.SampleRequest) -> sc.SampleResponse:
    dist = sc.distribution_from_model(req.distribution)
    trajs = sample_trajectories(dist, req.count, req.seed)
    return sc.SampleResponse(
        trajectories=[sc.trajectory_to_model(t) for t in trajs]
    )


@app.post("/fuse-wd", response_model=sc.FuseResponse)
def fuse(req: sc.FuseRequest) -> sc.FuseResponse:
    dist = sc.distribution_from_model(req.distribution)
    chain = sc.chain_from_model(req.chain)
    wd = workspace_density(
        chain, samples_per_joint=req.samples_per_joint, seed=req.seed,
        space=dist.space,
    )
    fused = fuse_workspace_density(dist, wd)
    return sc.FuseResponse(
        distribution=sc.distribution_to_model(fused),
        density=sc.DensityModel(
            pose=sc.pose_to_model(wd.g_wd), sigma=wd.sigma_wd.tolist()
        ),
    )


@app.post("/plan", response_model=sc.PlanResponse)
def plan(req: sc.PlanRequest) -> sc.PlanResponse:
    dist = sc.distribution_from_model(req.distribution)
    chain = sc.chain_from_model(req.chain)
    scene = sc.scene_from_model(req.scene)
    params = sc.params_from_model(req.params)
    result = stomp_plan(chain, scene, dist, params, seed=req.seed)
    ee = end_effector_trajectory(chain, result.trajectory)
    return sc.PlanResponse(
        waypoints=result.trajectory.waypoints.tolist(),
        collision_free=result.collision_free,
        cost_history=result.cost_history.tolist(),
        iterations_used=result.iterations_used,
        planning_time_ms=result.planning_time_s * 1e3,
        ee_trajectory=sc.trajectory_to_model(ee),
    )


@app.post("/gen-demos", response_model=sc.GenDemosResponse)
def gen_demos(req: sc.GenDemosRequest) -> sc.GenDemosResponse:
    demos = generate_letter(
        req.shape,
        n_points=req.n_points,
        noise_scale=req.noise_scale,
        n_demos=req.n_demos,
        seed=req.seed,
        space=req.space,
        tangent_aligned=req.tangent_aligned,
        warp_scale=req.warp_scale,
    )
    return sc.GenDemosResponse(demos=[sc.trajectory_to_model(t) for t in demos])


def _translations(traj) -> list:
    return traj.translations().tolist()


@app.post("/report", response_model=sc.ReportResponse)
def report(req: sc.ReportRequest) -> sc.ReportResponse:
    from ..encode import encode as encode_op

    demos = sc.demo_set_from_models(req.demos)
    metrics = {}
    points = {"mean": None, "samples": [], "demos": [], "planned": None}
    points["demos"] = [_translations(t) for t in demos]

    dist = (
        sc.distribution_from_model(req.distribution)
        if req.distribution is not None
        else None
    )
    if req.samples is not None:
        samples = [sc.trajectory_from_model(m) for m in req.samples]
    elif dist is not None:
        samples = sample_trajectories(dist, req.sample_count, req.seed)
    else:
        samples = []
    if dist is not None:
        points["mean"] = [p.translation.tolist() for p in dist.mean]
    points["samples"] = [_translations(t) for t in samples]

    if samples:
        rot, tran = d_demo(samples, demos)
        metrics["d_demo_rot"] = rot
        metrics["d_demo_tran"] = tran
    if req.via is not None and samples:
        space = samples[0].space
        via = sc.via_from_model(req.via, space)
        idx = via.step_index(len(samples[0]) - 1)
        rot, tran = d_via(samples, idx, via.g_star)
        metrics["d_via_rot"] = rot
        metrics["d_via_tran"] = tran
    if req.plan_waypoints is not None and dist is not None:
        from ..planner import JointTrajectory, reference_errors

        chain = sc.chain_from_model(req.chain)
        traj = JointTrajectory(np.array(req.plan_waypoints, dtype=float))
        planned = end_effector_trajectory(chain, traj)
        e_rot, e_tran = reference_errors(dist.mean, planned)
        metrics["e_rot"] = e_rot
        metrics["e_tran"] = e_tran
        points["planned"] = _translations(planned)
    if req.time_ops:
        start = time.perf_counter()
        timed_dist = encode_op(demos, lambda_reg=req.lambda_reg)
        metrics["encode_ms"] = (time.perf_counter() - start) * 1e3
        if req.via is not None:
            from ..adapt import condition_on_via

            via = sc.via_from_model(req.via, demos.space)
            start = time.perf_counter()
            condition_on_via(timed_dist, via)
            metrics["condition_ms"] = (time.perf_counter() - start) * 1e3
    return sc.ReportResponse(
        metrics=sc.MetricsModel(**metrics), points=sc.PointSetsModel(**points)
    )
