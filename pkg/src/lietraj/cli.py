"""Command-line front end.

The CLI is a thin client of the HTTP service: every subcommand reads its
input files, posts one request to the corresponding endpoint, and writes the
response back to disk.  By default the service runs in-process; pass
--server to talk to a remote instance instead.

Exit codes: 0 ok, 2 parse/schema error, 3 math or convergence failure,
4 planner found no collision-free trajectory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .config import RunConfig, child_seed
from .errors import MATH_ERRORS, InvalidArgumentError, LieTrajError, ParseError
from .liegroup import Space

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_MATH = 3
EXIT_NO_SOLUTION = 4


# ---------------------------------------------------------------------------
# Service client
# ---------------------------------------------------------------------------


class ServiceClient:
    """Minimal JSON-over-HTTP client; in-process unless a server URL is given."""

    def __init__(self, server: str | None = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # Some starlette builds warn about their httpx test shim;
                # irrelevant for in-process use.
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code >= 400:
            detail = {}
            try:
                detail = resp.json().get("detail", {})
            except Exception:
                pass
            message = detail.get("message", resp.text) if isinstance(detail, dict) else str(detail)
            if resp.status_code in (400, 422):
                raise ParseError(f"service rejected request: {message}")
            raise _RemoteMathError(f"service reported failure: {message}")
        return resp.json()


class _RemoteMathError(LieTrajError, RuntimeError):
    """A numerical failure reported by the service (HTTP 409)."""


# ---------------------------------------------------------------------------
# Payload helpers (file <-> wire)
# ---------------------------------------------------------------------------


def _pose_obj(pose) -> dict:
    return {
        "rotation": pose.rotation.tolist(),
        "translation": pose.translation.tolist(),
    }


def _traj_obj(traj) -> dict:
    return {
        "space": traj.space.value,
        "times": traj.times.tolist(),
        "poses": [_pose_obj(p) for p in traj.poses],
    }


def _traj_from_obj(obj):
    from .liegroup import Pose
    from .trajectory import Trajectory

    space = Space(obj["space"])
    poses = tuple(
        Pose(np.array(p["rotation"]), np.array(p["translation"]), space)
        for p in obj["poses"]
    )
    return Trajectory(poses, np.array(obj["times"], dtype=float))


def _dist_obj(dist) -> dict:
    return {
        "space": dist.space.value,
        "kind": "banded" if dist.is_banded else "dense",
        "mean": [_pose_obj(p) for p in dist.mean],
        "rel_cov": dist.rel_cov.tolist() if dist.is_banded else None,
        "covariance": None if dist.is_banded else dist.covariance_dense.tolist(),
    }


def _dist_from_obj(obj):
    from .encode import TrajectoryDistribution, assemble_precision
    from .liegroup import Pose

    space = Space(obj["space"])
    mean = tuple(
        Pose(np.array(p["rotation"]), np.array(p["translation"]), space)
        for p in obj["mean"]
    )
    if obj["kind"] == "banded":
        rel_cov = np.array(obj["rel_cov"], dtype=float)
        precision = assemble_precision(mean, rel_cov, space)
        return TrajectoryDistribution(
            mean=mean, space=space, rel_cov=rel_cov, precision=precision
        )
    return TrajectoryDistribution(
        mean=mean, space=space,
        covariance_dense=np.array(obj["covariance"], dtype=float),
    )


def _chain_obj(path: str | None) -> dict | None:
    if path is None:
        return None
    chain = fileio.read_chain(path)
    return {
        "joints": [
            {
                "axis": j.axis.tolist(),
                "offset": _pose_obj(j.offset),
                "limits": [j.limits[0], j.limits[1]],
            }
            for j in chain.joints
        ],
        "ee_offset": _pose_obj(chain.ee_offset),
    }


def _scene_obj(path: str | None) -> dict | None:
    if path is None:
        return None
    scene = fileio.read_scene(path)
    return {
        "spheres": [
            {"center": s.center.tolist(), "radius": s.radius}
            for s in scene.obstacles
        ],
        "clearance": scene.clearance,
        "body_radius": scene.body_radius,
    }


def _via_obj(spec, space: str) -> dict:
    t_str, pose_path, sigma_str = spec
    try:
        t = float(t_str)
        sigma_scale = float(sigma_str)
    except ValueError:
        raise ParseError(f"via spec must be T POSE_FILE SIGMA, got {spec}") from None
    pose = fileio.read_pose(pose_path, Space(space))
    return {
        "t": t,
        "pose": _pose_obj(pose),
        "sigma": (sigma_scale * np.eye(6)).tolist(),
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_gen_demos(args, cfg: RunConfig, client: ServiceClient) -> int:
    payload = {
        "shape": args.shape,
        "n_points": args.n_points,
        "noise_scale": args.noise,
        "warp_scale": args.warp,
        "n_demos": args.n_demos,
        "seed": child_seed(cfg.seed, "gen_demos"),
        "space": cfg.space,
        "tangent_aligned": args.tangent_aligned,
    }
    resp = client.post("/gen-demos", payload)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, obj in enumerate(resp["demos"]):
        fileio.write_trajectory(out_dir / f"demo_{k:03d}.traj", _traj_from_obj(obj))
    print(f"gen-demos: wrote {len(resp['demos'])} {args.shape!r} demos to {out_dir}")
    return EXIT_OK


def _cmd_gora(args, cfg: RunConfig, client: ServiceClient) -> int:
    trajs = [fileio.read_trajectory(p, strict=not args.project_rotations)
             for p in args.inputs]
    payload = {
        "trajectories": [_traj_obj(t) for t in trajs],
        "n_step": cfg.n_step,
        "smooth_window": cfg.smooth_window,
    }
    resp = client.post("/align", payload)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for src, obj in zip(args.inputs, resp["trajectories"]):
        fileio.write_trajectory(out_dir / Path(src).name, _traj_from_obj(obj))
    print(f"gora: aligned {len(trajs)} trajectories to {cfg.n_step} steps -> {out_dir}")
    return EXIT_OK


def _cmd_encode(args, cfg: RunConfig, client: ServiceClient) -> int:
    demos = [fileio.read_trajectory(p) for p in args.inputs]
    payload = {
        "demos": [_traj_obj(t) for t in demos],
        "lambda_reg": cfg.lambda_reg,
    }
    resp = client.post("/encode", payload)
    fileio.write_distribution(args.output, _dist_from_obj(resp["distribution"]))
    print(
        f"encode: {len(demos)} demos -> {args.output} "
        f"({resp['elapsed_ms']:.1f} ms)"
    )
    return EXIT_OK


def _cmd_condition(args, cfg: RunConfig, client: ServiceClient) -> int:
    dist = fileio.read_distribution(args.distribution)
    vias = [_via_obj(v, cfg.space) for v in args.via or []]
    if args.start is not None:
        pose = fileio.read_pose(args.start, Space(cfg.space))
        vias.insert(
            0, {"t": 0.0, "pose": _pose_obj(pose), "sigma": np.eye(6).tolist()}
        )
    payload = {"distribution": _dist_obj(dist), "vias": vias}
    resp = client.post("/condition", payload)
    fileio.write_distribution(args.output, _dist_from_obj(resp["distribution"]))
    print(
        f"condition: {len(vias)} constraint(s) -> {args.output} "
        f"({resp['elapsed_ms']:.1f} ms)"
    )
    return EXIT_OK


def _cmd_sample(args, cfg: RunConfig, client: ServiceClient) -> int:
    dist = fileio.read_distribution(args.distribution)
    payload = {
        "distribution": _dist_obj(dist),
        "count": args.count,
        "seed": child_seed(cfg.seed, "sample"),
    }
    resp = client.post("/sample", payload)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, obj in enumerate(resp["trajectories"]):
        fileio.write_trajectory(out_dir / f"sample_{k:03d}.traj", _traj_from_obj(obj))
    print(f"sample: wrote {args.count} trajectories to {out_dir}")
    return EXIT_OK


def _cmd_fuse_wd(args, cfg: RunConfig, client: ServiceClient) -> int:
    dist = fileio.read_distribution(args.distribution)
    payload = {
        "distribution": _dist_obj(dist),
        "chain": _chain_obj(args.chain or cfg.chain),
        "samples_per_joint": cfg.samples_per_joint,
        "seed": child_seed(cfg.seed, "fuse"),
    }
    resp = client.post("/fuse-wd", payload)
    fileio.write_distribution(args.output, _dist_from_obj(resp["distribution"]))
    print(f"fuse-wd: fused workspace density -> {args.output}")
    return EXIT_OK


def _cmd_plan(args, cfg: RunConfig, client: ServiceClient) -> int:
    dist = fileio.read_distribution(args.distribution)
    stomp = dict(cfg.stomp)
    for override in args.param or []:
        key, _, value = override.partition("=")
        if not value:
            raise ParseError(f"--param expects KEY=VALUE, got {override!r}")
        stomp[key] = json.loads(value)
    payload = {
        "distribution": _dist_obj(dist),
        "chain": _chain_obj(args.chain or cfg.chain),
        "scene": _scene_obj(args.scene or cfg.scene),
        "params": stomp or None,
        "seed": child_seed(cfg.seed, "plan"),
    }
    resp = client.post("/plan", payload)
    fileio.write_plan(
        args.output,
        np.array(resp["waypoints"]),
        resp["collision_free"],
        resp["cost_history"],
        resp["iterations_used"],
    )
    if args.ee_output:
        fileio.write_trajectory(args.ee_output, _traj_from_obj(resp["ee_trajectory"]))
    status = "collision-free" if resp["collision_free"] else "IN COLLISION"
    print(
        f"plan: {len(resp['waypoints'])} waypoints, {status}, "
        f"{resp['planning_time_ms']:.0f} ms -> {args.output}"
    )
    return EXIT_OK if resp["collision_free"] else EXIT_NO_SOLUTION


def _write_point_csv(path, series_name: str, sets) -> None:
    lines = ["series,index,step,x,y,z"]
    for idx, points in enumerate(sets):
        for step, (x, y, z) in enumerate(points):
            lines.append(
                f"{series_name},{idx},{step},{x!r},{y!r},{z!r}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def _write_svg(path, point_sets) -> None:
    """Simple polyline rendering of the x/y translation traces."""
    all_pts = [p for _, sets in point_sets for points in sets for p in points]
    if not all_pts:
        Path(path).write_text("<svg xmlns='http://www.w3.org/2000/svg'/>\n")
        return
    xs = [p[0] for p in all_pts]
    ys = [p[1] for p in all_pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-9)
    width = 480.0
    pad = 20.0

    def sx(x):
        return pad + (x - x0) / span * width

    def sy(y):
        return pad + (y1 - y) / span * width

    colors = {"demos": "#9ecae1", "samples": "#fdae6b", "mean": "#08519c",
              "planned": "#d62728"}
    parts = [
        f"<svg xmlns='http://www.w3.org/2000/svg' "
        f"width='{width + 2 * pad:.0f}' height='{width + 2 * pad:.0f}'>"
    ]
    for name, sets in point_sets:
        color = colors.get(name, "#333333")
        for points in sets:
            pts = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}" for p in points)
            parts.append(
                f"<polyline fill='none' stroke='{color}' stroke-width='1.5' "
                f"points='{pts}'><title>{name}</title></polyline>"
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _cmd_report(args, cfg: RunConfig, client: ServiceClient) -> int:
    demos = [fileio.read_trajectory(p) for p in args.demos]
    payload = {
        "demos": [_traj_obj(t) for t in demos],
        "distribution": (
            _dist_obj(fileio.read_distribution(args.distribution))
            if args.distribution else None
        ),
        "samples": (
            [_traj_obj(fileio.read_trajectory(p)) for p in args.samples]
            if args.samples else None
        ),
        "sample_count": args.sample_count,
        "seed": child_seed(cfg.seed, "report"),
        "via": _via_obj(args.via, cfg.space) if args.via else None,
        "plan_waypoints": (
            fileio.read_plan(args.plan)["trajectory"].waypoints.tolist()
            if args.plan else None
        ),
        "chain": _chain_obj(args.chain or cfg.chain),
        "time_ops": args.time,
        "lambda_reg": cfg.lambda_reg,
    }
    resp = client.post("/report", payload)
    metrics = resp["metrics"]
    fileio.write_metrics(args.output, metrics)
    points = resp["points"]
    if args.csv_dir:
        csv_dir = Path(args.csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        _write_point_csv(csv_dir / "demos.csv", "demos", points["demos"])
        _write_point_csv(csv_dir / "samples.csv", "samples", points["samples"])
        if points["mean"] is not None:
            _write_point_csv(csv_dir / "mean.csv", "mean", [points["mean"]])
        if points["planned"] is not None:
            _write_point_csv(csv_dir / "planned.csv", "planned", [points["planned"]])
    if args.svg:
        sets = [("demos", points["demos"]), ("samples", points["samples"])]
        if points["mean"] is not None:
            sets.append(("mean", [points["mean"]]))
        if points["planned"] is not None:
            sets.append(("planned", [points["planned"]]))
        _write_svg(args.svg, sets)
    print(
        "report: D_demo=({d_demo_rot:.4g}, {d_demo_tran:.4g}) "
        "D_via=({d_via_rot:.4g}, {d_via_tran:.4g}) "
        "e=({e_rot:.4g}, {e_tran:.4g}) -> {out}".format(**metrics, out=args.output)
    )
    return EXIT_OK


def _cmd_export_chain(args, cfg: RunConfig, client: ServiceClient) -> int:
    from .workspace import default_chain

    fileio.write_chain(args.output, default_chain())
    print(f"export-chain: bundled 7-joint arm -> {args.output}")
    return EXIT_OK


def _cmd_serve(args, cfg: RunConfig, client: ServiceClient) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lietraj",
        description="Pose-trajectory distribution pipeline: "
        "align, encode, adapt, sample, plan, report.",
    )
    parser.add_argument("--config", help="JSON run-config file")
    parser.add_argument("--seed", type=int, help="root seed (overrides config)")
    parser.add_argument("--space", choices=["se3", "pcg3"], help="pose space")
    parser.add_argument("--n-step", type=int, help="aligned trajectory length")
    parser.add_argument("--server", help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="generate synthetic demonstrations")
    p.add_argument("--shape", default="N", choices=["N", "U", "S", "arc", "screw"])
    p.add_argument("--n-demos", type=int, default=5)
    p.add_argument("--n-points", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.005)
    p.add_argument("--warp", type=float, default=None)
    p.add_argument("--tangent-aligned", action="store_true")
    p.add_argument("-o", "--out-dir", default="demos")
    p.set_defaults(func=_cmd_gen_demos)

    p = sub.add_parser("gora", help="temporally align trajectories")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out-dir", required=True)
    p.add_argument("--project-rotations", action="store_true",
                   help="project slightly non-orthonormal rotations instead of failing")
    p.set_defaults(func=_cmd_gora)

    p = sub.add_parser("encode", help="encode aligned demos into a distribution")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("condition", help="condition a distribution on via poses")
    p.add_argument("distribution")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--via", nargs=3, action="append",
                   metavar=("T", "POSE_FILE", "SIGMA"),
                   help="via constraint: time in [0,1], pose file, isotropic variance")
    p.add_argument("--start", help="pose file: re-anchor the start pose")
    p.set_defaults(func=_cmd_condition)

    p = sub.add_parser("sample", help="sample trajectories from a distribution")
    p.add_argument("distribution")
    p.add_argument("-s", "--count", type=int, default=10)
    p.add_argument("-o", "--out-dir", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("fuse-wd", help="fuse with a robot workspace density")
    p.add_argument("distribution")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--chain", help="chain file (default: bundled 7-joint arm)")
    p.set_defaults(func=_cmd_fuse_wd)

    p = sub.add_parser("plan", help="plan a guided joint trajectory")
    p.add_argument("distribution")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--chain")
    p.add_argument("--scene")
    p.add_argument("--ee-output", help="also write the end-effector trajectory")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="planner parameter override (JSON value)")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("report", help="metrics and plot data for a run")
    p.add_argument("--demos", nargs="+", required=True)
    p.add_argument("--distribution")
    p.add_argument("--samples", nargs="+")
    p.add_argument("--sample-count", type=int, default=50)
    p.add_argument("--via", nargs=3, metavar=("T", "POSE_FILE", "SIGMA"))
    p.add_argument("--plan")
    p.add_argument("--chain")
    p.add_argument("--time", action="store_true",
                   help="re-measure encode/condition wall-clock times")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--csv-dir")
    p.add_argument("--svg")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("export-chain", help="write the bundled chain file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_export_chain)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(func=_cmd_serve)

    return parser


def _load_config(args) -> RunConfig:
    cfg = fileio.read_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.space is not None:
        cfg.space = args.space
    if args.n_step is not None:
        cfg.n_step = args.n_step
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        client = ServiceClient(args.server) if args.command != "serve" else None
        return args.func(args, cfg, client)
    except (ParseError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MATH_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH
    except _RemoteMathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
