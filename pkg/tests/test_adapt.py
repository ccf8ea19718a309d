import numpy as np
import pytest

from lietraj.adapt import (
    ViaPoseConstraint,
    ViewChange,
    change_view,
    condition_on_via,
    condition_on_via_set,
    fuse_workspace_density,
    reanchor_start,
    transform_via,
)
from lietraj.bench import d_via
from lietraj.encode import encode, sample_trajectories
from lietraj.errors import InvalidArgumentError
from lietraj.liegroup import (
    Pose,
    Space,
    adjoint,
    compose,
    exp_map,
    inverse,
    log_map,
    pose_distance,
    relative,
)
from lietraj.workspace import WorkspaceDensity

from conftest import random_pose
from test_encode import make_demo_set


def dense_condition_oracle(sigma, mean_poses, space, observed, y_stack, noise):
    """Textbook joint-Gaussian conditioning on a subset of tangent blocks;
    written directly from the posterior formulas, independent of the
    implementation's gain/Joseph machinery."""
    n = len(mean_poses) - 1
    C = np.zeros((6 * len(observed), 6 * n))
    for k, i in enumerate(observed):
        C[6 * k:6 * (k + 1), 6 * (i - 1):6 * i] = np.eye(6)
    S = C @ sigma @ C.T + noise
    G = sigma @ C.T @ np.linalg.inv(S)
    x_hat = G @ y_stack
    sigma_post = sigma - G @ C @ sigma
    means_post = [mean_poses[0]] + [
        compose(mean_poses[i + 1], exp_map(x_hat[6 * i:6 * i + 6], space))
        for i in range(n)
    ]
    return means_post, sigma_post


def max_mean_distance(dist_a, dist_b):
    return max(
        max(pose_distance(a, b)) for a, b in zip(dist_a.mean, dist_b.mean)
    )


@pytest.fixture
def small_dist(rng):
    return encode(make_demo_set(rng, n_demos=5, n_points=4, scatter=0.03))


# ---------------------------------------------------------------------------
# condition_on_via
# ---------------------------------------------------------------------------


def test_zero_innovation_keeps_mean_and_shrinks_covariance(small_dist):
    n = small_dist.n_steps
    i = 2
    via = ViaPoseConstraint(t=i / n, g_star=small_dist.mean[i],
                            sigma_star=1e-4 * np.eye(6))
    post = condition_on_via(small_dist, via)
    assert max_mean_distance(post, small_dist) < 1e-12
    blk = slice(6 * (i - 1), 6 * i)
    prior_blk = small_dist.covariance[blk, blk]
    post_blk = post.covariance[blk, blk]
    assert np.trace(post_blk) < np.trace(prior_blk)


def test_tight_observation_pins_via_pose(rng, small_dist):
    n = small_dist.n_steps
    i = 2
    g_star = compose(small_dist.mean[i], exp_map(rng.normal(0, 0.05, 6)))
    via = ViaPoseConstraint(t=i / n, g_star=g_star, sigma_star=1e-12 * np.eye(6))
    post = condition_on_via(small_dist, via)
    d_rot, d_tran = pose_distance(post.mean[i], g_star)
    assert d_rot < 1e-5 and d_tran < 1e-5


def test_matches_dense_conditioning_oracle(rng):
    for _ in range(20):
        dist = encode(make_demo_set(rng, n_demos=4, n_points=4, scatter=0.04))
        n = dist.n_steps
        i = int(rng.integers(1, n + 1))
        g_star = compose(dist.mean[i], exp_map(rng.normal(0, 0.05, 6)))
        sigma_star = 1e-3 * np.eye(6)
        post = condition_on_via(
            dist, ViaPoseConstraint(t=i / n, g_star=g_star, sigma_star=sigma_star)
        )
        y = log_map(relative(dist.mean[i], g_star))
        means_o, sigma_o = dense_condition_oracle(
            dist.covariance, dist.mean, dist.space, [i], y, sigma_star
        )
        assert np.abs(post.covariance - sigma_o).max() < 1e-8
        for a, b in zip(post.mean, means_o):
            assert max(pose_distance(a, b)) < 1e-8


def test_posterior_is_dense_and_spd(small_dist, rng):
    via = ViaPoseConstraint(t=0.7, g_star=random_pose(rng),
                            sigma_star=1e-2 * np.eye(6))
    post = condition_on_via(small_dist, via)
    assert not post.is_banded
    np.linalg.cholesky(post.covariance)
    assert np.allclose(post.covariance, post.covariance.T)


def test_trace_strictly_decreases(small_dist, rng):
    via = ViaPoseConstraint(t=0.4, g_star=random_pose(rng),
                            sigma_star=1e-2 * np.eye(6))
    post = condition_on_via(small_dist, via)
    assert np.trace(post.covariance) < np.trace(small_dist.covariance)


def test_space_mismatch_rejected(small_dist, rng):
    via = ViaPoseConstraint(t=0.5, g_star=random_pose(rng, Space.PCG3),
                            sigma_star=np.eye(6))
    with pytest.raises(InvalidArgumentError):
        condition_on_via(small_dist, via)


def test_sigma_star_must_be_psd(rng):
    with pytest.raises(InvalidArgumentError):
        ViaPoseConstraint(t=0.5, g_star=random_pose(rng),
                          sigma_star=-np.eye(6))


def test_d_via_improves_after_conditioning(rng, small_dist):
    n = small_dist.n_steps
    i = 2
    g_star = compose(small_dist.mean[i], exp_map(rng.normal(0, 0.08, 6)))
    via = ViaPoseConstraint(t=i / n, g_star=g_star, sigma_star=1e-4 * np.eye(6))
    post = condition_on_via(small_dist, via)
    prior_samples = sample_trajectories(small_dist, 100, seed=5)
    post_samples = sample_trajectories(post, 100, seed=5)
    prior_rot, prior_tran = d_via(prior_samples, i, g_star)
    post_rot, post_tran = d_via(post_samples, i, g_star)
    assert post_tran < prior_tran
    assert post_rot < prior_rot


# ---------------------------------------------------------------------------
# condition_on_via_set
# ---------------------------------------------------------------------------


def test_empty_via_set_is_identity(small_dist):
    assert condition_on_via_set(small_dist, []) is small_dist


def test_via_set_order_independent(rng, small_dist):
    n = small_dist.n_steps
    vias = []
    for i in (1, 3):
        g_star = compose(small_dist.mean[i], exp_map(rng.normal(0, 0.05, 6)))
        vias.append(ViaPoseConstraint(t=i / n, g_star=g_star,
                                      sigma_star=1e-3 * np.eye(6)))
    a = condition_on_via_set(small_dist, vias)
    b = condition_on_via_set(small_dist, vias[::-1])
    assert max_mean_distance(a, b) < 1e-8
    assert np.abs(a.covariance - b.covariance).max() < 1e-8
    # Sequential equals the joint update.
    y = np.concatenate([
        log_map(relative(small_dist.mean[i], v.g_star))
        for i, v in zip((1, 3), vias)
    ])
    means_o, sigma_o = dense_condition_oracle(
        small_dist.covariance, small_dist.mean, small_dist.space, [1, 3], y,
        np.kron(np.eye(2), 1e-3 * np.eye(6)),
    )
    assert np.abs(a.covariance - sigma_o).max() < 1e-8
    for p, q in zip(a.mean, means_o):
        assert max(pose_distance(p, q)) < 1e-8


def test_start_plus_goal_hits_both_endpoints(rng, small_dist):
    n = small_dist.n_steps
    start = compose(small_dist.mean[0], exp_map(rng.normal(0, 0.05, 6)))
    goal = compose(small_dist.mean[n], exp_map(rng.normal(0, 0.05, 6)))
    vias = [
        ViaPoseConstraint(t=0.0, g_star=start, sigma_star=1e-12 * np.eye(6)),
        ViaPoseConstraint(t=1.0, g_star=goal, sigma_star=1e-12 * np.eye(6)),
    ]
    post = condition_on_via_set(small_dist, vias)
    assert max(pose_distance(post.mean[0], start)) < 1e-5
    assert max(pose_distance(post.mean[n], goal)) < 1e-5


def test_duplicate_step_indices_rejected(rng, small_dist):
    g = random_pose(rng)
    vias = [
        ViaPoseConstraint(t=0.52, g_star=g, sigma_star=np.eye(6)),
        ViaPoseConstraint(t=0.55, g_star=g, sigma_star=np.eye(6)),
    ]
    with pytest.raises(InvalidArgumentError):
        condition_on_via_set(small_dist, vias)


# ---------------------------------------------------------------------------
# reanchor_start
# ---------------------------------------------------------------------------


def test_reanchor_to_current_start_is_identity(small_dist):
    out = reanchor_start(small_dist, small_dist.mean[0])
    assert max_mean_distance(out, small_dist) < 1e-12
    P0 = small_dist.precision.to_dense()
    P1 = out.precision.to_dense()
    assert np.abs(P1 - P0).max() <= 1e-9 * max(np.abs(P0).max(), 1.0)


def test_reanchor_pure_translation_shifts_uniformly(small_dist):
    delta = np.array([0.3, -0.2, 0.5])
    g0_new = Pose(small_dist.mean[0].rotation,
                  small_dist.mean[0].translation + delta)
    out = reanchor_start(small_dist, g0_new)
    for a, b in zip(out.mean, small_dist.mean):
        assert np.allclose(a.translation - b.translation, delta, atol=1e-12)
        assert np.allclose(a.rotation, b.rotation, atol=1e-12)


def test_reanchor_preserves_relative_structure(rng, small_dist):
    g0_new = random_pose(rng)
    out = reanchor_start(small_dist, g0_new)
    assert max(pose_distance(out.mean[0], g0_new)) < 1e-12
    for i in range(small_dist.n_steps):
        before = relative(small_dist.mean[i], small_dist.mean[i + 1])
        after = relative(out.mean[i], out.mean[i + 1])
        assert max(pose_distance(before, after)) < 1e-12


def test_via_at_t_zero_routes_to_reanchor(rng, small_dist):
    g0_new = random_pose(rng)
    via = ViaPoseConstraint(t=0.0, g_star=g0_new, sigma_star=np.eye(6))
    out = condition_on_via(small_dist, via)
    assert max(pose_distance(out.mean[0], g0_new)) < 1e-12
    assert out.is_banded


# ---------------------------------------------------------------------------
# change_view
# ---------------------------------------------------------------------------


def test_identity_view_change_is_identity(small_dist):
    out = change_view(small_dist, ViewChange(Pose.identity()))
    assert max_mean_distance(out, small_dist) < 1e-12
    assert np.abs(out.covariance - small_dist.covariance).max() < 1e-12


def test_change_view_involution(rng, small_dist):
    h = random_pose(rng)
    out = change_view(change_view(small_dist, ViewChange(h)),
                      ViewChange(inverse(h)))
    assert max_mean_distance(out, small_dist) < 1e-9
    assert np.abs(out.covariance - small_dist.covariance).max() < 1e-9


def test_change_view_conjugates_means(rng, small_dist):
    h = random_pose(rng)
    out = change_view(small_dist, ViewChange(h))
    for a, b in zip(out.mean, small_dist.mean):
        expected = compose(compose(inverse(h), b), h)
        assert max(pose_distance(a, expected)) < 1e-12


def test_change_view_congruence_on_covariance(rng, small_dist):
    h = random_pose(rng)
    out = change_view(small_dist, ViewChange(h))
    A = adjoint(inverse(h))
    big = np.kron(np.eye(small_dist.n_steps), A)
    expected = big @ small_dist.covariance @ big.T
    assert np.abs(out.covariance - expected).max() < 1e-9


def test_equivariance_diagram_commutes(rng):
    # Condition-then-transform equals transform-then-condition with the via
    # conjugated into the new frame.
    for _ in range(10):
        dist = encode(make_demo_set(rng, n_demos=4, n_points=5, scatter=0.04))
        n = dist.n_steps
        i = int(rng.integers(1, n + 1))
        g_star = compose(dist.mean[i], exp_map(rng.normal(0, 0.05, 6)))
        via = ViaPoseConstraint(t=i / n, g_star=g_star,
                                sigma_star=1e-3 * np.eye(6))
        h = random_pose(rng)
        view = ViewChange(h)
        path_a = change_view(condition_on_via(dist, via), view)
        path_b = condition_on_via(change_view(dist, view),
                                  transform_via(via, view))
        assert max_mean_distance(path_a, path_b) < 1e-8
        assert np.abs(path_a.covariance - path_b.covariance).max() < 1e-8


def energy_statistic(X, Y):
    def pair_dist(A, B):
        G = A @ B.T
        na = np.einsum("ij,ij->i", A, A)
        nb = np.einsum("ij,ij->i", B, B)
        D2 = na[:, None] + nb[None, :] - 2.0 * G
        return np.sqrt(np.maximum(D2, 0.0))

    dxy = pair_dist(X, Y).mean()
    dxx = pair_dist(X, X).mean()
    dyy = pair_dist(Y, Y).mean()
    return 2.0 * dxy - dxx - dyy


def test_change_view_samples_match_original_frame(rng):
    # Samples drawn in the new frame, conjugated back, follow the original
    # distribution: permutation two-sample energy test at alpha = 0.01.
    dist = encode(make_demo_set(rng, n_demos=5, n_points=4, scatter=0.05))
    h = random_pose(rng)
    viewed = change_view(dist, ViewChange(h))
    n_samp = 2000
    orig = sample_trajectories(dist, n_samp, seed=101)
    moved = sample_trajectories(viewed, n_samp, seed=202)

    def features(trajs, conjugate):
        rows = []
        for t in trajs:
            feats = []
            for p in t.poses:
                g = compose(compose(h, p), inverse(h)) if conjugate else p
                feats.append(np.concatenate([g.rotation.reshape(9), g.translation]))
            rows.append(np.concatenate(feats))
        return np.asarray(rows, dtype=np.float32)

    X = features(orig, conjugate=False)
    Y = features(moved, conjugate=True)
    observed = energy_statistic(X, Y)
    pooled = np.concatenate([X, Y])
    G = pooled @ pooled.T
    nrm = np.einsum("ij,ij->i", pooled, pooled)
    D = np.sqrt(np.maximum(nrm[:, None] + nrm[None, :] - 2.0 * G, 0.0))
    perm_rng = np.random.default_rng(7)
    total = pooled.shape[0]
    count = 0
    n_perm = 199
    for _ in range(n_perm):
        idx = perm_rng.permutation(total)
        a, b = idx[:n_samp], idx[n_samp:]
        daa = D[np.ix_(a, a)].mean()
        dbb = D[np.ix_(b, b)].mean()
        dab = D[np.ix_(a, b)].mean()
        stat = 2.0 * dab - daa - dbb
        if stat >= observed:
            count += 1
    p_value = (count + 1) / (n_perm + 1)
    assert p_value > 0.01


# ---------------------------------------------------------------------------
# fuse_workspace_density
# ---------------------------------------------------------------------------


def test_uninformative_fusion_is_identity(rng, small_dist):
    wd = WorkspaceDensity(random_pose(rng), 1e12 * np.eye(6))
    out = fuse_workspace_density(small_dist, wd)
    assert max_mean_distance(out, small_dist) < 1e-6
    assert np.abs(out.covariance - small_dist.covariance).max() < 1e-6


def test_tight_fusion_pins_means_to_density(rng, small_dist):
    g_wd = compose(small_dist.mean[2], exp_map(rng.normal(0, 0.02, 6)))
    wd = WorkspaceDensity(g_wd, 1e-14 * np.eye(6))
    out = fuse_workspace_density(small_dist, wd)
    for i in range(1, small_dist.n_steps + 1):
        assert max(pose_distance(out.mean[i], g_wd)) < 1e-4


def test_fusion_matches_dense_all_step_oracle(rng):
    for _ in range(10):
        dist = encode(make_demo_set(rng, n_demos=4, n_points=4, scatter=0.04))
        n = dist.n_steps
        g_wd = compose(dist.mean[1], exp_map(rng.normal(0, 0.05, 6)))
        sigma_wd = 1e-2 * np.eye(6)
        out = fuse_workspace_density(dist, WorkspaceDensity(g_wd, sigma_wd))
        y = np.concatenate(
            [log_map(relative(dist.mean[i + 1], g_wd)) for i in range(n)]
        )
        means_o, sigma_o = dense_condition_oracle(
            dist.covariance, dist.mean, dist.space, list(range(1, n + 1)), y,
            np.kron(np.eye(n), sigma_wd),
        )
        assert np.abs(out.covariance - sigma_o).max() < 1e-8
        for a, b in zip(out.mean, means_o):
            assert max(pose_distance(a, b)) < 1e-8


def test_fusion_trace_strictly_below_prior(rng, small_dist):
    wd = WorkspaceDensity(random_pose(rng), 1e-2 * np.eye(6))
    out = fuse_workspace_density(small_dist, wd)
    assert np.trace(out.covariance) < np.trace(small_dist.covariance)


def test_fusion_rejects_non_psd_sigma(rng, small_dist):
    with pytest.raises(InvalidArgumentError):
        fuse_workspace_density(
            small_dist, WorkspaceDensity(random_pose(rng), -np.eye(6))
        )
