"""File formats: trajectories, distributions, chains, scenes, plans, configs.

Trajectory files are line-oriented text (header plus one row per sample:
time, row-major rotation, translation).  Everything else is versioned JSON.
Floats are written with shortest round-trip repr, so reading a canonical file
and writing it back is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encode import TrajectoryDistribution, assemble_precision
from .errors import ParseError
from .liegroup import Pose, Space, project_rotation
from .planner import JointTrajectory, PlanningScene, Sphere, StompParams
from .trajectory import Trajectory
from .workspace import Joint, KinematicChain

TRAJECTORY_MAGIC = "# lietraj trajectory v1"
ROTATION_FILE_TOL = 1e-6

_FORMATS = {
    "distribution": ("lietraj-distribution", 1),
    "chain": ("lietraj-chain", 1),
    "scene": ("lietraj-scene", 1),
    "plan": ("lietraj-plan", 1),
    "metrics": ("lietraj-metrics", 1),
    "config": ("lietraj-config", 1),
    "pose": ("lietraj-pose", 1),
}


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Trajectory text files
# ---------------------------------------------------------------------------


def write_trajectory(path, traj: Trajectory) -> None:
    lines = [
        TRAJECTORY_MAGIC,
        f"space: {traj.space.value}",
        "units: rad m",
        f"points: {len(traj)}",
    ]
    for t, pose in zip(traj.times, traj.poses):
        row = [t, *pose.rotation.reshape(9), *pose.translation]
        lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path, strict: bool = True) -> Trajectory:
    """Parse a trajectory file.

    Rotations whose orthonormality defect exceeds 1e-6 are an error when
    strict, projected onto the nearest rotation otherwise; defects below the
    file tolerance are always cleaned up by projection.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRAJECTORY_MAGIC:
        raise ParseError(f"{path}: missing header {TRAJECTORY_MAGIC!r}", line=1)
    header = {}
    data_rows = []
    in_header = True
    for ln, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped:
            continue
        if in_header and ":" in stripped and stripped.split(":")[0].isalpha():
            key, _, value = stripped.partition(":")
            header[key.strip()] = value.strip()
            continue
        in_header = False
        data_rows.append((ln, stripped))
    for key in ("space", "points"):
        if key not in header:
            raise ParseError(f"{path}: missing header field {key!r}")
    try:
        space = Space(header["space"])
    except ValueError:
        raise ParseError(f"{path}: unknown space {header['space']!r}") from None
    try:
        n_points = int(header["points"])
    except ValueError:
        raise ParseError(f"{path}: points must be an integer") from None

    times = []
    poses = []
    for ln, stripped in data_rows:
        tokens = stripped.split()
        if len(tokens) != 13:
            raise ParseError(
                f"{path}: expected 13 values (t, 9 rotation, 3 translation), "
                f"got {len(tokens)}",
                line=ln,
            )
        try:
            values = np.array([float(tok) for tok in tokens])
        except ValueError:
            raise ParseError(f"{path}: non-numeric value", line=ln) from None
        R = values[1:10].reshape(3, 3)
        defect = np.linalg.norm(R.T @ R - np.eye(3))
        if defect > ROTATION_FILE_TOL:
            if strict:
                raise ParseError(
                    f"{path}: rotation not orthonormal (defect {defect:.2e})",
                    line=ln,
                )
            R = project_rotation(R)
        elif defect > 1e-9:
            R = project_rotation(R)
        times.append(values[0])
        poses.append(Pose(R, values[10:13], space))
    if len(poses) != n_points:
        raise ParseError(
            f"{path}: header says {n_points} points but found {len(poses)}"
        )
    try:
        return Trajectory(tuple(poses), np.array(times))
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Versioned JSON documents
# ---------------------------------------------------------------------------


def _write_json(path, kind: str, payload: dict) -> None:
    magic, version = _FORMATS[kind]
    doc = {"format": magic, "version": version, **payload}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _read_json(path, kind: str) -> dict:
    magic, version = _FORMATS[kind]
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != magic:
        raise ParseError(f"{path}: not a {magic} document")
    if doc.get("version") != version:
        raise ParseError(
            f"{path}: unsupported {magic} version {doc.get('version')!r} "
            f"(expected {version})"
        )
    return doc


def _pose_to_obj(pose: Pose) -> dict:
    return {
        "rotation": pose.rotation.tolist(),
        "translation": pose.translation.tolist(),
    }


def _pose_from_obj(obj, space: Space, where: str) -> Pose:
    try:
        R = np.array(obj["rotation"], dtype=float)
        t = np.array(obj["translation"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: malformed pose ({exc})") from exc
    defect = np.linalg.norm(R.T @ R - np.eye(3))
    if defect > ROTATION_FILE_TOL:
        raise ParseError(f"{where}: rotation not orthonormal (defect {defect:.2e})")
    if defect > 1e-9:
        R = project_rotation(R)
    return Pose(R, t, space)


def write_distribution(path, dist: TrajectoryDistribution) -> None:
    payload = {
        "space": dist.space.value,
        "kind": "banded" if dist.is_banded else "dense",
        "mean": [_pose_to_obj(p) for p in dist.mean],
    }
    if dist.is_banded:
        payload["rel_cov"] = dist.rel_cov.tolist()
    else:
        payload["covariance"] = dist.covariance_dense.tolist()
    _write_json(path, "distribution", payload)


def read_distribution(path) -> TrajectoryDistribution:
    doc = _read_json(path, "distribution")
    try:
        space = Space(doc["space"])
        kind = doc["kind"]
        mean = tuple(
            _pose_from_obj(obj, space, f"{path} mean[{i}]")
            for i, obj in enumerate(doc["mean"])
        )
    except KeyError as exc:
        raise ParseError(f"{path}: missing field {exc}") from exc
    n = len(mean) - 1
    if kind == "banded":
        rel_cov = np.array(doc.get("rel_cov"), dtype=float)
        if rel_cov.shape != (n, 6, 6):
            raise ParseError(
                f"{path}: rel_cov must have shape ({n}, 6, 6), got {rel_cov.shape}"
            )
        precision = assemble_precision(mean, rel_cov, space)
        return TrajectoryDistribution(
            mean=mean, space=space, rel_cov=rel_cov, precision=precision
        )
    if kind == "dense":
        cov = np.array(doc.get("covariance"), dtype=float)
        if cov.shape != (6 * n, 6 * n):
            raise ParseError(
                f"{path}: covariance must be ({6 * n}, {6 * n}), got {cov.shape}"
            )
        return TrajectoryDistribution(
            mean=mean, space=space, covariance_dense=cov
        )
    raise ParseError(f"{path}: unknown distribution kind {kind!r}")


def write_chain(path, chain: KinematicChain) -> None:
    payload = {
        "joints": [
            {
                "axis": j.axis.tolist(),
                "offset": _pose_to_obj(j.offset),
                "limits": [j.limits[0], j.limits[1]],
            }
            for j in chain.joints
        ],
        "ee_offset": _pose_to_obj(chain.ee_offset),
    }
    _write_json(path, "chain", payload)


def read_chain(path) -> KinematicChain:
    doc = _read_json(path, "chain")
    try:
        joints = tuple(
            Joint(
                offset=_pose_from_obj(obj["offset"], Space.SE3, f"{path} joint {i}"),
                axis=np.array(obj["axis"], dtype=float),
                limits=(float(obj["limits"][0]), float(obj["limits"][1])),
            )
            for i, obj in enumerate(doc["joints"])
        )
        ee = _pose_from_obj(doc["ee_offset"], Space.SE3, f"{path} ee_offset")
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"{path}: malformed chain document ({exc})") from exc
    return KinematicChain(joints, ee)


def write_scene(path, scene: PlanningScene) -> None:
    payload = {
        "clearance": scene.clearance,
        "body_radius": scene.body_radius,
        "spheres": [
            {"center": s.center.tolist(), "radius": s.radius}
            for s in scene.obstacles
        ],
    }
    _write_json(path, "scene", payload)


def read_scene(path) -> PlanningScene:
    doc = _read_json(path, "scene")
    try:
        spheres = tuple(
            Sphere(np.array(o["center"], dtype=float), float(o["radius"]))
            for o in doc.get("spheres", [])
        )
        return PlanningScene(
            obstacles=spheres,
            clearance=float(doc.get("clearance", 0.0)),
            body_radius=float(doc.get("body_radius", 0.05)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed scene document ({exc})") from exc


def write_plan(path, waypoints: np.ndarray, collision_free: bool,
               cost_history, iterations_used: int) -> None:
    payload = {
        "waypoints": np.asarray(waypoints, dtype=float).tolist(),
        "collision_free": bool(collision_free),
        "cost_history": [float(c) for c in cost_history],
        "iterations_used": int(iterations_used),
    }
    _write_json(path, "plan", payload)


def read_plan(path):
    doc = _read_json(path, "plan")
    try:
        return {
            "trajectory": JointTrajectory(np.array(doc["waypoints"], dtype=float)),
            "collision_free": bool(doc["collision_free"]),
            "cost_history": np.array(doc.get("cost_history", []), dtype=float),
            "iterations_used": int(doc.get("iterations_used", 0)),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed plan document ({exc})") from exc


def write_metrics(path, record: dict) -> None:
    _write_json(path, "metrics", record)


def write_pose(path, pose: Pose) -> None:
    _write_json(path, "pose", {"space": pose.space.value, **_pose_to_obj(pose)})


def read_pose(path, space: Space | None = None) -> Pose:
    doc = _read_json(path, "pose")
    tag = space if space is not None else Space(doc.get("space", "se3"))
    return _pose_from_obj(doc, tag, str(path))


def read_config(path):
    from .config import RunConfig

    doc = _read_json(path, "config")
    payload = {k: v for k, v in doc.items() if k not in ("format", "version")}
    return RunConfig.from_obj(payload)


def write_config(path, config) -> None:
    _write_json(path, "config", config.to_obj())


def stomp_params_from_obj(obj: dict) -> StompParams:
    known = {f for f in StompParams.__dataclass_fields__}
    unknown = set(obj) - known
    if unknown:
        raise ParseError(f"unknown planner parameters: {sorted(unknown)}")
    return StompParams(**obj)
