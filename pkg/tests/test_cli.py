import json

import numpy as np
import pytest

from lietraj import fileio
from lietraj.cli import main
from lietraj.liegroup import pose_distance
from lietraj.planner import PlanningScene, Sphere


def run(args):
    return main([str(a) for a in args])


@pytest.fixture
def pipeline_dirs(tmp_path):
    demos = tmp_path / "demos"
    aligned = tmp_path / "aligned"
    return tmp_path, demos, aligned


def make_demos(tmp, n_points=80, noise=0.003, shape="arc", seed=5):
    out = tmp / "demos"
    assert run(["--seed", seed, "gen-demos", "--shape", shape,
                "--n-demos", 3, "--n-points", n_points, "--noise", noise,
                "-o", out]) == 0
    return sorted(out.glob("*.traj"))


def test_gen_demos_and_gora_batch(tmp_path):
    files = make_demos(tmp_path)
    assert len(files) == 3
    aligned_dir = tmp_path / "aligned"
    assert run(["--n-step", 15, "gora", *files, "-o", aligned_dir]) == 0
    outs = sorted(aligned_dir.glob("*.traj"))
    assert len(outs) == 3
    for f in outs:
        traj = fileio.read_trajectory(f)
        assert len(traj) == 15
        assert np.allclose(traj.times, np.linspace(0, 1, 15))


def test_gora_single_constant_speed_file(tmp_path):
    from lietraj.bench import screw_trajectory

    src = tmp_path / "screw.traj"
    fileio.write_trajectory(src, screw_trajectory(60))
    out_dir = tmp_path / "out"
    assert run(["--n-step", 20, "gora", src, "-o", out_dir]) == 0
    out = fileio.read_trajectory(out_dir / "screw.traj")
    assert np.allclose(out.times, np.linspace(0, 1, 20))


def test_gora_malformed_rotation_exit_2(tmp_path, capsys):
    files = make_demos(tmp_path)
    text = files[0].read_text().splitlines()
    tokens = text[5].split()
    tokens[1] = "2.0"
    text[5] = " ".join(tokens)
    files[0].write_text("\n".join(text) + "\n")
    code = run(["gora", files[0], "-o", tmp_path / "x"])
    assert code == 2
    assert "line 6" in capsys.readouterr().err


def test_encode_condition_sample_report_flow(tmp_path):
    files = make_demos(tmp_path)
    aligned_dir = tmp_path / "aligned"
    assert run(["--n-step", 10, "gora", *files, "-o", aligned_dir]) == 0
    aligned = sorted(aligned_dir.glob("*.traj"))

    dist_path = tmp_path / "dist.json"
    assert run(["encode", *aligned, "-o", dist_path]) == 0
    dist = fileio.read_distribution(dist_path)

    goal_path = tmp_path / "goal.json"
    fileio.write_pose(goal_path, dist.mean[-1])
    post_path = tmp_path / "post.json"
    assert run(["condition", dist_path, "-o", post_path,
                "--via", "1.0", goal_path, "1e-10"]) == 0
    post = fileio.read_distribution(post_path)
    assert not post.is_banded
    assert max(pose_distance(post.mean[-1], dist.mean[-1])) < 1e-5

    samples_dir = tmp_path / "samples"
    assert run(["--seed", 7, "sample", post_path, "-s", 5, "-o", samples_dir]) == 0
    sample_files = sorted(samples_dir.glob("*.traj"))
    assert len(sample_files) == 5

    report_path = tmp_path / "report.json"
    csv_dir = tmp_path / "csv"
    svg = tmp_path / "plot.svg"
    assert run(["report", "--demos", *aligned, "--distribution", post_path,
                "--samples", *sample_files, "--via", "1.0", goal_path, "1e-10",
                "-o", report_path, "--csv-dir", csv_dir, "--svg", svg]) == 0
    record = json.loads(report_path.read_text())
    assert record["format"] == "lietraj-metrics"
    assert record["d_via_tran"] < 1e-4
    assert (csv_dir / "mean.csv").exists()
    assert (csv_dir / "samples.csv").exists()
    assert svg.read_text().startswith("<svg")


def test_encode_three_identical_demos_samples_near_demo(tmp_path):
    files = make_demos(tmp_path, noise=0.0)
    aligned_dir = tmp_path / "aligned"
    assert run(["--n-step", 8, "gora", *files, "-o", aligned_dir]) == 0
    aligned = sorted(aligned_dir.glob("*.traj"))
    dist_path = tmp_path / "dist.json"
    assert run(["encode", *aligned, "-o", dist_path]) == 0
    samples_dir = tmp_path / "samples"
    assert run(["sample", dist_path, "-s", 5, "-o", samples_dir]) == 0
    demo = fileio.read_trajectory(aligned[0])
    for f in sorted(samples_dir.glob("*.traj")):
        s = fileio.read_trajectory(f)
        for a, b in zip(s.poses, demo.poses):
            _, d_tran = pose_distance(a, b)
            assert d_tran < 0.02  # floor-covariance-scale noise only


def test_plan_zero_iterations_equals_ik_of_mean(tmp_path):
    files = make_demos(tmp_path)
    aligned_dir = tmp_path / "aligned"
    assert run(["--n-step", 8, "gora", *files, "-o", aligned_dir]) == 0
    aligned = sorted(aligned_dir.glob("*.traj"))
    dist_path = tmp_path / "dist.json"
    assert run(["encode", *aligned, "-o", dist_path]) == 0
    plan_path = tmp_path / "plan.json"
    ee_path = tmp_path / "ee.traj"
    assert run(["plan", dist_path, "-o", plan_path, "--ee-output", ee_path,
                "--param", "n_iterations=0"]) == 0
    doc = fileio.read_plan(plan_path)
    assert doc["iterations_used"] == 0
    dist = fileio.read_distribution(dist_path)
    ee = fileio.read_trajectory(ee_path)
    for pose, mu in zip(ee.poses, dist.mean):
        _, d_tran = pose_distance(pose, mu)
        assert d_tran < 2e-4


def test_plan_in_collision_exit_4(tmp_path):
    files = make_demos(tmp_path)
    aligned_dir = tmp_path / "aligned"
    assert run(["--n-step", 8, "gora", *files, "-o", aligned_dir]) == 0
    aligned = sorted(aligned_dir.glob("*.traj"))
    dist_path = tmp_path / "dist.json"
    assert run(["encode", *aligned, "-o", dist_path]) == 0
    dist = fileio.read_distribution(dist_path)
    mid = dist.mean[4].translation
    scene_path = tmp_path / "scene.json"
    fileio.write_scene(scene_path, PlanningScene(
        obstacles=(Sphere(mid, 0.03),), clearance=0.005, body_radius=0.03))
    plan_path = tmp_path / "plan.json"
    code = run(["plan", dist_path, "-o", plan_path, "--scene", scene_path,
                "--param", "n_iterations=0"])
    assert code == 4
    assert fileio.read_plan(plan_path)["collision_free"] is False


def test_fuse_wd_command(tmp_path):
    files = make_demos(tmp_path)
    aligned_dir = tmp_path / "aligned"
    assert run(["--n-step", 6, "gora", *files, "-o", aligned_dir]) == 0
    aligned = sorted(aligned_dir.glob("*.traj"))
    dist_path = tmp_path / "dist.json"
    assert run(["encode", *aligned, "-o", dist_path]) == 0
    fused_path = tmp_path / "fused.json"
    assert run(["fuse-wd", dist_path, "-o", fused_path]) == 0
    fused = fileio.read_distribution(fused_path)
    assert not fused.is_banded


def test_export_chain(tmp_path):
    path = tmp_path / "chain.json"
    assert run(["export-chain", "-o", path]) == 0
    chain = fileio.read_chain(path)
    assert chain.n_joints == 7


def test_config_file_defaults(tmp_path):
    from lietraj.config import RunConfig

    cfg_path = tmp_path / "cfg.json"
    fileio.write_config(cfg_path, RunConfig(n_step=9, seed=3))
    files = make_demos(tmp_path)
    aligned_dir = tmp_path / "aligned"
    assert run(["--config", cfg_path, "gora", *files, "-o", aligned_dir]) == 0
    out = fileio.read_trajectory(sorted(aligned_dir.glob("*.traj"))[0])
    assert len(out) == 9


def test_missing_file_exit_2(tmp_path, capsys):
    assert run(["encode", tmp_path / "nope.traj", "-o", tmp_path / "d.json"]) == 2


def test_degenerate_input_exit_3(tmp_path):
    from lietraj.liegroup import Pose
    from lietraj.trajectory import Trajectory

    pose = Pose(np.eye(3), [0.1, 0.2, 0.3])
    still = Trajectory((pose, pose, pose), np.array([0.0, 0.5, 1.0]))
    src = tmp_path / "still.traj"
    fileio.write_trajectory(src, still)
    assert run(["gora", src, "-o", tmp_path / "out"]) == 3


def test_full_pipeline_deterministic(tmp_path):
    outs = []
    for run_dir in ("r1", "r2"):
        base = tmp_path / run_dir
        base.mkdir()
        demo_dir = base / "demos"
        assert run(["--seed", 99, "gen-demos", "--shape", "U", "--n-demos", 3,
                    "--n-points", 60, "--noise", 0.002, "-o", demo_dir]) == 0
        files = sorted(demo_dir.glob("*.traj"))
        aligned_dir = base / "aligned"
        assert run(["--seed", 99, "--n-step", 8, "gora", *files,
                    "-o", aligned_dir]) == 0
        aligned = sorted(aligned_dir.glob("*.traj"))
        dist = base / "dist.json"
        assert run(["--seed", 99, "encode", *aligned, "-o", dist]) == 0
        samples = base / "samples"
        assert run(["--seed", 99, "sample", dist, "-s", 3, "-o", samples]) == 0
        blobs = [f.read_bytes() for f in sorted(samples.glob("*.traj"))]
        blobs.append(dist.read_bytes())
        outs.append(blobs)
    assert outs[0] == outs[1]


def test_pcg3_pipeline_via_space_flag(tmp_path):
    demo_dir = tmp_path / "demos"
    assert run(["--seed", 4, "--space", "pcg3", "gen-demos", "--shape", "arc",
                "--n-demos", 3, "--n-points", 60, "--noise", 0.002,
                "-o", demo_dir]) == 0
    files = sorted(demo_dir.glob("*.traj"))
    first = fileio.read_trajectory(files[0])
    assert first.space.value == "pcg3"
    aligned_dir = tmp_path / "aligned"
    assert run(["--n-step", 8, "gora", *files, "-o", aligned_dir]) == 0
    aligned = sorted(aligned_dir.glob("*.traj"))
    dist_path = tmp_path / "dist.json"
    assert run(["encode", *aligned, "-o", dist_path]) == 0
    dist = fileio.read_distribution(dist_path)
    assert dist.space.value == "pcg3"
    goal = tmp_path / "goal.json"
    fileio.write_pose(goal, dist.mean[-1])
    post_path = tmp_path / "post.json"
    assert run(["--space", "pcg3", "condition", dist_path, "-o", post_path,
                "--via", "1.0", goal, "1e-8"]) == 0
    samples = tmp_path / "samples"
    assert run(["sample", post_path, "-s", 2, "-o", samples]) == 0
    assert len(list(samples.glob("*.traj"))) == 2
