"""Tests for the synthetic scene generator."""

import math

import numpy as np
import pytest

from vistr.errors import DataError
from vistr.geometry import Pose
from vistr.pnp import reproject
from vistr.synthetic import SyntheticSceneConfig, generate_synthetic_scene


def small_config(**overrides):
    base = dict(n_points=400, n_cameras=20, query_stride=5, extent=10.0,
                embedding_dim=16, descriptor_dim=16, image_size=64,
                seed=3)
    base.update(overrides)
    return SyntheticSceneConfig(**base)


# --- determinism ---

def test_same_config_same_scene():
    a = generate_synthetic_scene(small_config())
    b = generate_synthetic_scene(small_config())
    assert np.array_equal(a.bundle.positions, b.bundle.positions)
    assert np.array_equal(a.bundle.embeddings, b.bundle.embeddings)
    assert np.array_equal(a.bundle.quats, b.bundle.quats)
    assert len(a.bundle.visible) == len(b.bundle.visible)
    for va, vb in zip(a.bundle.visible, b.bundle.visible):
        assert np.array_equal(va, vb)
    assert len(a.queries) == len(b.queries)
    for qa, qb in zip(a.queries, b.queries):
        assert qa.image_id == qb.image_id
        assert np.array_equal(qa.keypoints, qb.keypoints)
        assert np.array_equal(qa.descriptors, qb.descriptors)
        assert np.array_equal(qa.embedding, qb.embedding)


def test_seed_changes_scene():
    a = generate_synthetic_scene(small_config(seed=3))
    b = generate_synthetic_scene(small_config(seed=4))
    assert not np.array_equal(a.bundle.positions, b.bundle.positions)


# --- visibility geometry ---

def _check_in_view(scene, point_idx, pose, cfg):
    intr = scene.bundle.intrinsics[0]
    pts = scene.bundle.positions[point_idx]
    uv, in_front = reproject(pts, pose, intr)
    assert in_front.all()
    depths = pose.world_to_camera(pts)[:, 2]
    assert (depths > 0.02 * cfg.extent).all()
    assert (uv[:, 0] >= 0).all() and (uv[:, 0] < intr.width).all()
    assert (uv[:, 1] >= 0).all() and (uv[:, 1] < intr.height).all()


def test_every_visible_point_reprojects_inside_image():
    cfg = small_config(dropout=0.2, keypoint_noise_px=0.7)
    scene = generate_synthetic_scene(cfg)
    for k in range(len(scene.bundle.visible)):
        pose = Pose(quat=scene.bundle.quats[k], trans=scene.bundle.trans[k])
        _check_in_view(scene, scene.bundle.visible[k].astype(int), pose, cfg)
    for q in scene.queries:
        _check_in_view(scene, scene.query_visible[q.image_id].astype(int),
                       q.gt_pose, cfg)


def test_visible_ids_sorted_unique_uint64():
    scene = generate_synthetic_scene(small_config(dropout=0.3))
    for vis in scene.bundle.visible:
        assert vis.dtype == np.uint64
        assert (np.diff(vis.astype(np.int64)) > 0).all()


def test_minimum_visible_points_everywhere():
    scene = generate_synthetic_scene(small_config(dropout=0.4))
    for vis in scene.bundle.visible:
        assert vis.shape[0] >= 8
    for vis in scene.query_visible.values():
        assert vis.shape[0] >= 8


def test_dropout_thins_visible_sets():
    dense = generate_synthetic_scene(small_config(dropout=0.0))
    thin = generate_synthetic_scene(small_config(dropout=0.5))
    mean_dense = np.mean([v.shape[0] for v in dense.bundle.visible])
    mean_thin = np.mean([v.shape[0] for v in thin.bundle.visible])
    assert mean_thin < 0.7 * mean_dense


# --- query split ---

def test_query_split_by_stride():
    scene = generate_synthetic_scene(small_config())
    # every 5th camera (ids 4, 9, 14, 19) is a query, the rest are mapping
    assert sorted(q.image_id for q in scene.queries) == [4, 9, 14, 19]
    assert scene.bundle.embeddings.shape[0] == 16
    mapping_ids = set(scene.bundle.image_ids.tolist())
    assert mapping_ids == set(range(20)) - {4, 9, 14, 19}


def test_query_split_stride_two():
    scene = generate_synthetic_scene(small_config(query_stride=2))
    assert sorted(q.image_id for q in scene.queries) == list(range(1, 20, 2))


def test_query_arrays_are_aligned():
    scene = generate_synthetic_scene(small_config(dropout=0.1))
    for q in scene.queries:
        vis = scene.query_visible[q.image_id]
        assert q.keypoints.shape == (vis.shape[0], 2)
        assert q.descriptors.shape[0] == vis.shape[0]
        assert q.descriptors.dtype == np.float32
        assert q.embedding.shape == (16,)
        assert q.embedding.dtype == np.float32
        assert q.gt_pose is not None
        assert q.intrinsics_id == 0


# --- noise models ---

def test_noise_free_keypoints_are_exact_reprojections():
    cfg = small_config(keypoint_noise_px=0.0, descriptor_noise=0.0,
                       dropout=0.0)
    scene = generate_synthetic_scene(cfg)
    intr = scene.bundle.intrinsics[0]
    for q in scene.queries:
        vis = scene.query_visible[q.image_id].astype(int)
        uv, _ = reproject(scene.bundle.positions[vis], q.gt_pose, intr)
        assert np.array_equal(q.keypoints, uv)


def test_noise_free_descriptors_match_canonical():
    cfg = small_config(descriptor_noise=0.0, dropout=0.0)
    scene = generate_synthetic_scene(cfg)
    for q in scene.queries:
        vis = scene.query_visible[q.image_id].astype(int)
        assert np.array_equal(q.descriptors, scene.bundle.descriptors[vis])


def test_descriptor_noise_statistics():
    # Query descriptors are canonical + N(0, sigma) per dimension, then
    # re-normalised. Simulate that process independently and compare the
    # mean cosine similarity to the canonical descriptor.
    sigma, dim = 0.1, 64
    cfg = small_config(descriptor_noise=sigma, descriptor_dim=dim,
                       dropout=0.0, n_cameras=40, n_points=1500)
    scene = generate_synthetic_scene(cfg)
    cosines = []
    for q in scene.queries:
        vis = scene.query_visible[q.image_id].astype(int)
        canon = scene.bundle.descriptors[vis].astype(np.float64)
        noisy = q.descriptors.astype(np.float64)
        cosines.extend(np.sum(canon * noisy, axis=1))
    assert len(cosines) > 500

    sim_rng = np.random.default_rng(90210)
    perturbed = np.zeros((20000, dim))
    perturbed[:, 0] = 1.0
    perturbed += sim_rng.normal(0.0, sigma, perturbed.shape)
    expected = np.mean(perturbed[:, 0] / np.linalg.norm(perturbed, axis=1))
    assert abs(np.mean(cosines) - expected) < 0.01


def test_descriptor_noise_keeps_unit_norm():
    scene = generate_synthetic_scene(small_config(descriptor_noise=0.2))
    for q in scene.queries:
        norms = np.linalg.norm(q.descriptors.astype(np.float64), axis=1)
        assert np.allclose(norms, 1.0, atol=1e-6)


def test_keypoint_noise_perturbs_but_stays_close():
    noisy = generate_synthetic_scene(small_config(keypoint_noise_px=0.5,
                                                  descriptor_noise=0.0,
                                                  dropout=0.0))
    clean = generate_synthetic_scene(small_config(keypoint_noise_px=0.0,
                                                  descriptor_noise=0.0,
                                                  dropout=0.0))
    deltas = []
    for qn, qc in zip(noisy.queries, clean.queries):
        assert qn.keypoints.shape == qc.keypoints.shape
        deltas.extend(np.linalg.norm(qn.keypoints - qc.keypoints, axis=1))
    deltas = np.asarray(deltas)
    assert (deltas > 0).all()
    # 2-d Gaussian with sigma 0.5 px: mean radial offset ~0.63 px
    assert 0.4 < deltas.mean() < 0.9


# --- intrinsics ---

def test_intrinsics_from_field_of_view():
    cfg = small_config(fov_deg=90.0, image_size=128)
    scene = generate_synthetic_scene(cfg)
    intr = scene.bundle.intrinsics[0]
    assert intr.fx == pytest.approx(64.0, rel=1e-12)  # tan(45 deg) = 1
    assert intr.fy == intr.fx
    assert intr.cx == 64.0 and intr.cy == 64.0
    assert intr.width == 128 and intr.height == 128
    focal = (64.0) / math.tan(math.radians(35.0))
    other = generate_synthetic_scene(small_config(fov_deg=70.0,
                                                  image_size=128))
    assert other.bundle.intrinsics[0].fx == pytest.approx(focal, rel=1e-12)


# --- failure modes ---

def test_starved_visibility_rejected():
    # an 11-degree field of view over a sparse cloud leaves every camera
    # with fewer than 8 visible points
    cfg = small_config(n_points=100, n_cameras=10, fov_deg=11.0,
                       image_size=32)
    with pytest.raises(DataError, match="fewer than 8"):
        generate_synthetic_scene(cfg)


@pytest.mark.parametrize("overrides", [
    dict(n_points=99),
    dict(n_cameras=9),
    dict(query_stride=1),
    dict(extent=0.0),
    dict(extent=-1.0),
    dict(fov_deg=5.0),
    dict(fov_deg=175.0),
    dict(embedding_dim=4),
    dict(descriptor_dim=4),
    dict(dropout=1.0),
    dict(dropout=-0.1),
    dict(descriptor_noise=-0.01),
    dict(keypoint_noise_px=-1.0),
    dict(image_size=16),
])
def test_config_validation(overrides):
    with pytest.raises(DataError):
        generate_synthetic_scene(small_config(**overrides))
