import numpy as np
import pytest

from support import build_random_bundle, default_intrinsics
from vistr.errors import DataError, DegenerateGeometryError, IntegrityError
from vistr.scene import (NormTransform, build_training_pairs,
                         compute_norm_transform, make_bundle)


def test_norm_transform_box_margin_zero():
    pts = np.array([[0.0, 0.0, 0.0], [10.0, 10.0, 10.0]])
    t = compute_norm_transform(pts, margin=0.0)
    assert t.scale == pytest.approx(0.1)
    np.testing.assert_allclose(t.apply(np.array([[5.0, 5.0, 5.0]])),
                               [[0.5, 0.5, 0.5]], atol=1e-12)


def test_norm_transform_identity_case():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    t = compute_norm_transform(pts, margin=0.0)
    assert t.scale == pytest.approx(1.0)
    np.testing.assert_allclose(t.offset, 0.0, atol=1e-12)


def test_norm_transform_margin_bounds(rng):
    pts = rng.normal(0, 4, (1000, 3))
    t = compute_norm_transform(pts, margin=0.05)
    mapped = t.apply(pts)
    assert mapped.min() >= 0.05 - 1e-9
    assert mapped.max() <= 0.95 + 1e-9


def test_norm_transform_degenerate():
    pts = np.ones((5, 3))
    with pytest.raises(DegenerateGeometryError):
        compute_norm_transform(pts)


def test_norm_transform_margin_range():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    with pytest.raises(DataError):
        compute_norm_transform(pts, margin=0.3)


def test_norm_round_trip_many(rng):
    pts = rng.normal(0, 50, (100_000, 3))
    t = compute_norm_transform(pts)
    back = t.invert(t.apply(pts))
    assert np.max(np.abs(back - pts)) < 1e-6


def test_norm_transform_rigid_equivariance(rng):
    # shifting/scaling the cloud composes with the transform as expected
    pts = rng.normal(0, 3, (200, 3))
    t = compute_norm_transform(pts)
    shift = np.array([3.0, -7.0, 11.0])
    scale = 2.5
    t2 = compute_norm_transform(pts * scale + shift)
    mapped_a = t.apply(pts)
    mapped_b = t2.apply(pts * scale + shift)
    np.testing.assert_allclose(mapped_a, mapped_b, rtol=1e-9, atol=1e-9)


def test_identity_transform():
    t = NormTransform.identity()
    p = np.array([[0.3, -2.0, 5.0]])
    np.testing.assert_array_equal(t.apply(p), p)


def test_make_bundle_rejects_dangling_visibility(rng):
    bundle = build_random_bundle(rng)
    bad_visible = list(bundle.visible)
    bad_visible[0] = np.array([99999], dtype=np.uint64)
    with pytest.raises(IntegrityError):
        make_bundle(point_ids=bundle.point_ids, positions=bundle.positions,
                    descriptors=bundle.descriptors, image_ids=bundle.image_ids,
                    embeddings=bundle.embeddings, quats=bundle.quats,
                    trans=bundle.trans, intrinsics_ids=bundle.intrinsics_ids,
                    visible=tuple(bad_visible), intrinsics=bundle.intrinsics)


def test_make_bundle_rejects_duplicate_point_ids(rng):
    bundle = build_random_bundle(rng)
    ids = bundle.point_ids.copy()
    ids[1] = ids[0]
    with pytest.raises(IntegrityError):
        make_bundle(point_ids=ids, positions=bundle.positions,
                    descriptors=bundle.descriptors, image_ids=bundle.image_ids,
                    embeddings=bundle.embeddings, quats=bundle.quats,
                    trans=bundle.trans, intrinsics_ids=bundle.intrinsics_ids,
                    visible=bundle.visible, intrinsics=bundle.intrinsics)


def test_make_bundle_rejects_empty_visibility(rng):
    bundle = build_random_bundle(rng)
    bad_visible = list(bundle.visible)
    bad_visible[2] = np.empty(0, dtype=np.uint64)
    with pytest.raises(IntegrityError):
        make_bundle(point_ids=bundle.point_ids, positions=bundle.positions,
                    descriptors=bundle.descriptors, image_ids=bundle.image_ids,
                    embeddings=bundle.embeddings, quats=bundle.quats,
                    trans=bundle.trans, intrinsics_ids=bundle.intrinsics_ids,
                    visible=tuple(bad_visible), intrinsics=bundle.intrinsics)


def test_make_bundle_rejects_nonfinite_positions(rng):
    bundle = build_random_bundle(rng)
    pos = bundle.positions.copy()
    pos[3, 1] = np.nan
    with pytest.raises(DataError):
        make_bundle(point_ids=bundle.point_ids, positions=pos,
                    descriptors=bundle.descriptors, image_ids=bundle.image_ids,
                    embeddings=bundle.embeddings, quats=bundle.quats,
                    trans=bundle.trans, intrinsics_ids=bundle.intrinsics_ids,
                    visible=bundle.visible, intrinsics=bundle.intrinsics)


def test_minimal_bundle_counts():
    intr = {0: default_intrinsics()}
    desc = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
    bundle = make_bundle(
        point_ids=np.array([7, 9], dtype=np.uint64),
        positions=np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]),
        descriptors=desc,
        image_ids=np.array([1], dtype=np.uint64),
        embeddings=np.zeros((1, 4), dtype=np.float32),
        quats=np.array([[1.0, 0.0, 0.0, 0.0]]),
        trans=np.zeros((1, 3)),
        intrinsics_ids=np.zeros(1, dtype=np.uint32),
        visible=(np.array([7, 9], dtype=np.uint64),),
        intrinsics=intr)
    assert bundle.positions.shape[0] == 2
    assert bundle.embeddings.shape[0] == 1


def test_training_pairs_count_and_multiset(rng):
    bundle = build_random_bundle(rng)
    img_idx, pts = build_training_pairs(bundle, seed=3)
    total = sum(v.shape[0] for v in bundle.visible)
    assert img_idx.shape[0] == total
    assert pts.shape == (total, 3)
    # multiset of incidences matches the visibility lists
    seen = {}
    point_index = {int(pid): k for k, pid in enumerate(bundle.point_ids)}
    norm_positions = bundle.norm.apply(bundle.positions)
    for k in range(total):
        row = (int(img_idx[k]), tuple(np.round(pts[k], 12)))
        seen[row] = seen.get(row, 0) + 1
    expected = {}
    for i, vis in enumerate(bundle.visible):
        for pid in vis:
            row = (i, tuple(np.round(norm_positions[point_index[int(pid)]], 12)))
            expected[row] = expected.get(row, 0) + 1
    assert seen == expected


def test_training_pairs_normalised(rng):
    bundle = build_random_bundle(rng)
    _, pts = build_training_pairs(bundle, seed=0)
    assert pts.min() >= -1e-9
    assert pts.max() <= 1.0 + 1e-9


def test_training_pairs_deterministic(rng):
    bundle = build_random_bundle(rng)
    a_idx, a_pts = build_training_pairs(bundle, seed=11)
    b_idx, b_pts = build_training_pairs(bundle, seed=11)
    np.testing.assert_array_equal(a_idx, b_idx)
    np.testing.assert_array_equal(a_pts, b_pts)
    c_idx, _ = build_training_pairs(bundle, seed=12)
    assert not np.array_equal(a_idx, c_idx)
