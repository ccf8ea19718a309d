"""Evaluation metrics and synthetic demonstration generators.

Metrics report rotation and translation components separately: elastic
(DTW) distance between sampled and demonstrated trajectories, per-step
distance to a via pose, and accumulated error between a planned path and a
reference.  The generators draw letter-like planar strokes, arcs and screws,
perturbed by smooth correlated noise and monotone time warps, for use in
tests and the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .liegroup import Pose, Space, exp_map, pose_distance, so3_exp
from .trajectory import DemoSet, Trajectory, uniform_times

LETTER_SHAPES = ("N", "U", "S", "arc", "screw")


@dataclass(frozen=True, eq=False)
class MetricReport:
    """One evaluation record; all distances are nonnegative."""

    d_demo_rot: float = 0.0
    d_demo_tran: float = 0.0
    d_via_rot: float = 0.0
    d_via_tran: float = 0.0
    e_rot: float = 0.0
    e_tran: float = 0.0
    encode_ms: float = 0.0
    condition_ms: float = 0.0


# ---------------------------------------------------------------------------
# DTW
# ---------------------------------------------------------------------------


def _dtw_table(local: np.ndarray) -> float:
    """Accumulated cost of the classic DP with match/insert/delete steps,
    boundary anchored at both ends."""
    r, c = local.shape
    D = np.full((r, c), np.inf)
    D[0, 0] = local[0, 0]
    for j in range(1, c):
        D[0, j] = D[0, j - 1] + local[0, j]
    for i in range(1, r):
        D[i, 0] = D[i - 1, 0] + local[i, 0]
        for j in range(1, c):
            D[i, j] = local[i, j] + min(D[i - 1, j - 1], D[i - 1, j], D[i, j - 1])
    return float(D[-1, -1])


def dtw_distance(a: Trajectory, b: Trajectory):
    """Elastic alignment distance between two trajectories.

    Run independently on the rotation grid (Frobenius distance between
    rotation matrices) and the translation grid (Euclidean distance);
    returns the (rot, tran) pair.
    """
    Ra, ta = a.rotations(), a.translations()
    Rb, tb = b.rotations(), b.translations()
    rot_grid = np.linalg.norm(Ra[:, None] - Rb[None, :], axis=(2, 3))
    tran_grid = np.linalg.norm(ta[:, None] - tb[None, :], axis=2)
    return _dtw_table(rot_grid), _dtw_table(tran_grid)


def d_demo(dist_samples, demos: DemoSet):
    """Average DTW between every (sample, demo) pair, normalized by
    m * s * N_step."""
    samples = list(dist_samples)
    if not samples:
        raise InvalidArgumentError("need at least one sampled trajectory")
    n_step = len(samples[0])
    total_rot = 0.0
    total_tran = 0.0
    for s in samples:
        for d in demos:
            rot, tran = dtw_distance(s, d)
            total_rot += rot
            total_tran += tran
    norm = len(demos) * len(samples) * n_step
    return total_rot / norm, total_tran / norm


def d_via(samples, i: int, mu_star: Pose):
    """Average pose distance of the samples' step i to a target pose."""
    samples = list(samples)
    if not samples:
        raise InvalidArgumentError("need at least one sampled trajectory")
    if not 0 <= i < len(samples[0]):
        raise InvalidArgumentError(f"step {i} out of range")
    rot = 0.0
    tran = 0.0
    for s in samples:
        d_r, d_t = pose_distance(s.poses[i], mu_star)
        rot += d_r
        tran += d_t
    return rot / len(samples), tran / len(samples)


# ---------------------------------------------------------------------------
# Synthetic demonstrations
# ---------------------------------------------------------------------------


def _stroke_points(shape: str, u: np.ndarray) -> np.ndarray:
    """Planar (or helical) stroke sampled at parameter u in [0, 1]; returns
    (len(u), 3) positions in meters at desk scale."""
    size = 0.15
    if shape == "N":
        pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        seg = np.clip(u * 3.0, 0.0, 3.0)
        idx = np.clip(seg.astype(int), 0, 2)
        frac = seg - idx
        xy = pts[idx] * (1.0 - frac[:, None]) + pts[idx + 1] * frac[:, None]
        xyz = np.column_stack([xy * size, np.zeros_like(u)])
    elif shape == "U":
        xyz = np.empty((u.shape[0], 3))
        for k, s in enumerate(u):
            if s < 1.0 / 3.0:
                p = np.array([0.0, 1.0 - 3.0 * s * 0.5])
            elif s < 2.0 / 3.0:
                ang = np.pi * (1.0 + 3.0 * (s - 1.0 / 3.0))
                p = np.array([0.5 + 0.5 * np.cos(ang), 0.5 + 0.5 * np.sin(ang)])
            else:
                p = np.array([1.0, 0.5 + 3.0 * (s - 2.0 / 3.0) * 0.5])
            xyz[k] = [p[0] * size, p[1] * size, 0.0]
    elif shape == "S":
        xyz = np.empty((u.shape[0], 3))
        for k, s in enumerate(u):
            if s < 0.5:
                ang = 0.5 * np.pi - 2.0 * np.pi * s
                p = np.array([0.5 + 0.5 * np.cos(ang), 1.5 + 0.5 * np.sin(ang)])
            else:
                ang = 0.5 * np.pi + 2.0 * np.pi * (s - 0.5)
                p = np.array([0.5 + 0.5 * np.cos(ang), 0.5 + 0.5 * np.sin(ang)])
            xyz[k] = [p[0] * size, p[1] * size * 0.5, 0.0]
    elif shape == "arc":
        ang = np.pi * u
        xyz = np.column_stack(
            [size * np.cos(ang), size * np.sin(ang), np.zeros_like(u)]
        )
    elif shape == "screw":
        ang = 2.0 * np.pi * u
        xyz = np.column_stack(
            [size * np.cos(ang), size * np.sin(ang), 0.1 * u]
        )
    else:
        raise InvalidArgumentError(
            f"unknown shape {shape!r}; expected one of {LETTER_SHAPES}"
        )
    return xyz


# Writing pose: tool axis pointing down, as when dragging a pen over a desk.
# Keeps letter strokes well inside the bundled arm's dexterous workspace.
TOOL_DOWN = np.diag([1.0, -1.0, -1.0])

# Anchor of the stroke bounding-box center in the workspace (meters).
STROKE_ANCHOR = np.array([0.42, 0.0, 0.35])


def _orientations(shape: str, u: np.ndarray, tangent_aligned: bool) -> np.ndarray:
    """Rotations per sample: the fixed writing pose, or rotating at a
    constant rate for screws / yawed along the stroke tangent for letters."""
    n = u.shape[0]
    if shape == "screw" and tangent_aligned:
        # Constant-rate rotation about z matching the helix phase: together
        # with the helical translation this gives a constant body velocity.
        return np.stack([so3_exp(np.array([0.0, 0.0, 2.0 * np.pi * s])) for s in u])
    if not tangent_aligned:
        return np.broadcast_to(TOOL_DOWN, (n, 3, 3)).copy()
    # Letters: yaw the writing pose to face the tangent direction.
    pts = _stroke_points(shape, u)
    d = np.gradient(pts, axis=0)
    yaw = np.arctan2(d[:, 1], d[:, 0])
    return np.stack([so3_exp(np.array([0.0, 0.0, a])) @ TOOL_DOWN for a in yaw])


def generate_letter(
    shape: str,
    n_points: int = 200,
    noise_scale: float = 0.005,
    n_demos: int = 5,
    seed: int = 0,
    space: Space = Space.SE3,
    tangent_aligned: bool = False,
    warp_scale: float | None = None,
) -> DemoSet:
    """Synthetic demonstrations of a parametric stroke.

    Each demo samples the stroke at a randomly warped parameter (monotone,
    endpoints pinned) and adds smooth correlated position noise built from
    low-order Fourier modes that vanish at the endpoints.  warp_scale
    defaults to noise_scale * 20 so that noise_scale = 0 yields identical,
    unwarped copies; pass it explicitly to warp without spatial noise.
    Deterministic under a fixed seed.
    """
    if n_points < 10:
        raise InvalidArgumentError("n_points must be at least 10")
    if shape not in LETTER_SHAPES:
        raise InvalidArgumentError(
            f"unknown shape {shape!r}; expected one of {LETTER_SHAPES}"
        )
    if warp_scale is None:
        warp_scale = 20.0 * noise_scale
    rng = np.random.default_rng(seed)
    times = uniform_times(n_points)
    # One shared anchor per shape: center the clean stroke's bounding box.
    ref = _stroke_points(shape, uniform_times(512))
    center = 0.5 * (ref.min(axis=0) + ref.max(axis=0))
    demos = []
    for _ in range(n_demos):
        gamma = 2.0 ** (warp_scale * rng.uniform(-1.0, 1.0))
        u = times**gamma
        pts = _stroke_points(shape, u) - center + STROKE_ANCHOR
        if noise_scale > 0.0:
            for axis in range(3):
                for k in range(1, 4):
                    amp = rng.normal(0.0, noise_scale / k)
                    pts[:, axis] += amp * np.sin(np.pi * k * u)
        R = _orientations(shape, u, tangent_aligned)
        poses = tuple(Pose(R[k], pts[k], space) for k in range(n_points))
        demos.append(Trajectory(poses, times))
    return DemoSet(tuple(demos))


def screw_trajectory(n_points: int = 100, space: Space = Space.SE3) -> Trajectory:
    """A constant-body-velocity screw on a uniform grid (handy reference:
    its reparameterization is the identity)."""
    times = uniform_times(n_points)
    xi = np.array([0.0, 0.0, 2.0 * np.pi, 0.05, 0.0, 0.1])
    poses = tuple(exp_map(t * xi, space) for t in times)
    return Trajectory(poses, times)
