"""Tests for the single-query localisation pipeline.

A generator whose decoder is zeroed emits all samples at the centre of the
map, so a large retrieval radius selects the whole map and a tiny one selects
nothing; exact query descriptors and keypoints then make the matching and
pose stages behave predictably without any training.
"""

import dataclasses

import numpy as np
import pytest

from vistr.bundle_io import QueryFeatures
from vistr.errors import DataError, ShapeError
from vistr.localize import RetrievalConfig, localize
from vistr.metrics import pose_errors
from vistr.pnp import RansacConfig
from vistr.retrieval import SpatialIndex
from vistr.scene import compute_norm_transform
from vistr.synthetic import SyntheticSceneConfig, generate_synthetic_scene
from vistr.vae import init_model


@pytest.fixture(scope="module")
def exact_scene():
    cfg = SyntheticSceneConfig(n_points=1500, n_cameras=20, query_stride=5,
                               extent=10.0, embedding_dim=16,
                               descriptor_dim=32, image_size=640,
                               descriptor_noise=0.0, keypoint_noise_px=0.0,
                               dropout=0.0, seed=11)
    return generate_synthetic_scene(cfg)


@pytest.fixture(scope="module")
def centre_model(exact_scene):
    model = init_model(embedding_dim=16,
                       norm=compute_norm_transform(
                           exact_scene.bundle.positions),
                       rng=np.random.default_rng(5), latent_dim=3,
                       hidden_width=16, n_hidden=3, lift_dim=4)
    for name, arr in model.param_items():
        if name.startswith(("dec_", "lift_latent")):
            arr[...] = 0.0
    return model


@pytest.fixture(scope="module")
def index(exact_scene):
    return SpatialIndex(exact_scene.bundle)


def wide_retrieval():
    return RetrievalConfig(n_samples=50, radius=25.0, voxel_size=1.0, seed=0)


def test_exact_query_localises(exact_scene, centre_model, index):
    query = exact_scene.queries[0]
    est = localize(centre_model, exact_scene.bundle, index, query,
                   exact_scene.bundle.intrinsics[0], wide_retrieval())
    assert est.success
    assert est.failure_reason == ""
    t_err, r_err = pose_errors(est.pose, query.gt_pose)
    assert t_err < 1e-6
    assert r_err < 1e-5

    n_vis = exact_scene.query_visible[query.image_id].shape[0]
    assert est.num_matches == n_vis
    assert est.num_inliers == n_vis
    assert est.submap_size == 1500
    np.testing.assert_array_equal(est.retrieved_ids,
                                  exact_scene.bundle.point_ids)


def test_all_queries_localise(exact_scene, centre_model, index):
    for query in exact_scene.queries:
        est = localize(centre_model, exact_scene.bundle, index, query,
                       exact_scene.bundle.intrinsics[0], wide_retrieval())
        assert est.success
        t_err, _ = pose_errors(est.pose, query.gt_pose)
        assert t_err < 1e-6


def test_timings_populated(exact_scene, centre_model, index):
    est = localize(centre_model, exact_scene.bundle, index,
                   exact_scene.queries[0],
                   exact_scene.bundle.intrinsics[0], wide_retrieval())
    t = est.timings
    for value in (t.generate_us, t.retrieve_us, t.match_us, t.pose_us):
        assert value >= 0.0
    assert t.total_us == pytest.approx(
        t.generate_us + t.retrieve_us + t.match_us + t.pose_us)


def test_tiny_radius_fails_with_empty_submap(exact_scene, centre_model,
                                             index):
    cfg = RetrievalConfig(n_samples=50, radius=1e-9, voxel_size=1.0, seed=0)
    est = localize(centre_model, exact_scene.bundle, index,
                   exact_scene.queries[0],
                   exact_scene.bundle.intrinsics[0], cfg)
    assert not est.success
    assert est.failure_reason == "empty submap"
    assert est.submap_size == 0
    assert est.num_matches == 0
    assert est.retrieved_ids.shape == (0,)


def test_too_few_keypoints_fail(exact_scene, centre_model, index):
    q = exact_scene.queries[0]
    clipped = QueryFeatures(image_id=q.image_id, intrinsics_id=q.intrinsics_id,
                            embedding=q.embedding, keypoints=q.keypoints[:3],
                            descriptors=q.descriptors[:3], gt_pose=q.gt_pose)
    est = localize(centre_model, exact_scene.bundle, index, clipped,
                   exact_scene.bundle.intrinsics[0], wide_retrieval())
    assert not est.success
    assert est.failure_reason == "too few matches"
    assert est.num_matches <= 3


def test_scrambled_keypoints_reach_no_consensus(exact_scene, centre_model,
                                                index):
    q = exact_scene.queries[0]
    rng = np.random.default_rng(77)
    scrambled = QueryFeatures(
        image_id=q.image_id, intrinsics_id=q.intrinsics_id,
        embedding=q.embedding,
        keypoints=rng.uniform(0, 640, q.keypoints.shape),
        descriptors=q.descriptors, gt_pose=q.gt_pose)
    est = localize(centre_model, exact_scene.bundle, index, scrambled,
                   exact_scene.bundle.intrinsics[0], wide_retrieval(),
                   ransac=RansacConfig(max_iterations=1500))
    assert not est.success
    assert est.failure_reason == "no consensus"
    assert est.num_matches >= 12  # matching still succeeds; geometry does not


def test_model_bundle_dimension_mismatch(exact_scene, index):
    other = init_model(embedding_dim=8,
                       norm=compute_norm_transform(
                           exact_scene.bundle.positions),
                       rng=np.random.default_rng(0), hidden_width=16,
                       n_hidden=3, lift_dim=4)
    with pytest.raises(ShapeError, match="bundle"):
        localize(other, exact_scene.bundle, index, exact_scene.queries[0],
                 exact_scene.bundle.intrinsics[0], wide_retrieval())


def test_query_embedding_dimension_mismatch(exact_scene, centre_model, index):
    q = exact_scene.queries[0]
    bad = QueryFeatures(image_id=q.image_id, intrinsics_id=q.intrinsics_id,
                        embedding=q.embedding[:8], keypoints=q.keypoints,
                        descriptors=q.descriptors, gt_pose=q.gt_pose)
    with pytest.raises(ShapeError, match="embedding"):
        localize(centre_model, exact_scene.bundle, index, bad,
                 exact_scene.bundle.intrinsics[0], wide_retrieval())


def test_query_descriptor_dimension_mismatch(exact_scene, centre_model,
                                             index):
    q = exact_scene.queries[0]
    bad = QueryFeatures(image_id=q.image_id, intrinsics_id=q.intrinsics_id,
                        embedding=q.embedding, keypoints=q.keypoints,
                        descriptors=q.descriptors[:, :16], gt_pose=q.gt_pose)
    with pytest.raises(ShapeError, match="descriptors"):
        localize(centre_model, exact_scene.bundle, index, bad,
                 exact_scene.bundle.intrinsics[0], wide_retrieval())


def test_retrieval_config_validated(exact_scene, centre_model, index):
    with pytest.raises(DataError):
        localize(centre_model, exact_scene.bundle, index,
                 exact_scene.queries[0], exact_scene.bundle.intrinsics[0],
                 RetrievalConfig(n_samples=0))


def test_localisation_is_deterministic(exact_scene, centre_model, index):
    q = exact_scene.queries[1]
    a = localize(centre_model, exact_scene.bundle, index, q,
                 exact_scene.bundle.intrinsics[0], wide_retrieval())
    b = localize(centre_model, exact_scene.bundle, index, q,
                 exact_scene.bundle.intrinsics[0], wide_retrieval())
    assert np.array_equal(a.pose.quat, b.pose.quat)
    assert np.array_equal(a.pose.trans, b.pose.trans)
    assert a.num_inliers == b.num_inliers
