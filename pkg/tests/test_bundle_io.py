import numpy as np
import pytest

from support import build_random_bundle, default_intrinsics, random_unit_quat
from vistr.bundle_io import (QueryFeatures, QuerySet, load_queries,
                             load_scene_bundle, load_text_queries,
                             load_text_scene, save_queries, save_scene_bundle,
                             save_text_queries, save_text_scene,
                             load_embedding_sidecar, save_embedding_sidecar)
from vistr.errors import FileMissingError, FormatError, IntegrityError
from vistr.geometry import Pose


def bundles_equal(a, b):
    assert np.array_equal(a.point_ids, b.point_ids)
    assert a.positions.tobytes() == b.positions.tobytes()
    assert a.descriptors.tobytes() == b.descriptors.tobytes()
    assert np.array_equal(a.image_ids, b.image_ids)
    assert a.embeddings.tobytes() == b.embeddings.tobytes()
    assert a.quats.tobytes() == b.quats.tobytes()
    assert a.trans.tobytes() == b.trans.tobytes()
    assert np.array_equal(a.intrinsics_ids, b.intrinsics_ids)
    assert len(a.visible) == len(b.visible)
    for va, vb in zip(a.visible, b.visible):
        assert np.array_equal(va, vb)
    assert a.intrinsics == b.intrinsics
    assert a.norm.scale == b.norm.scale
    assert a.norm.offset.tobytes() == b.norm.offset.tobytes()


def test_bundle_round_trip_bytes(rng, tmp_path):
    bundle = build_random_bundle(rng)
    p1 = tmp_path / "a.vstr"
    p2 = tmp_path / "b.vstr"
    save_scene_bundle(bundle, p1)
    loaded = load_scene_bundle(p1)
    bundles_equal(bundle, loaded)
    save_scene_bundle(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_bundle_bad_magic(tmp_path):
    p = tmp_path / "bad.vstr"
    p.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(FormatError):
        load_scene_bundle(p)


def test_bundle_truncated(rng, tmp_path):
    bundle = build_random_bundle(rng)
    p = tmp_path / "t.vstr"
    save_scene_bundle(bundle, p)
    data = p.read_bytes()
    p.write_bytes(data[: len(data) // 2])
    with pytest.raises(FormatError):
        load_scene_bundle(p)


def test_bundle_trailing_garbage(rng, tmp_path):
    bundle = build_random_bundle(rng)
    p = tmp_path / "t.vstr"
    save_scene_bundle(bundle, p)
    p.write_bytes(p.read_bytes() + b"xx")
    with pytest.raises(FormatError):
        load_scene_bundle(p)


def test_bundle_missing_file(tmp_path):
    with pytest.raises(FileMissingError):
        load_scene_bundle(tmp_path / "absent.vstr")


def make_query_set(rng, with_gt=True, n_queries=3, emb_dim=16, desc_dim=8):
    queries = []
    for qid in range(n_queries):
        k = int(rng.integers(4, 12))
        desc = rng.normal(0, 1, (k, desc_dim))
        desc /= np.linalg.norm(desc, axis=1, keepdims=True)
        gt = None
        if with_gt:
            gt = Pose(quat=random_unit_quat(rng), trans=rng.normal(0, 2, 3))
        queries.append(QueryFeatures(
            image_id=qid * 10, intrinsics_id=0,
            embedding=rng.normal(0, 1, emb_dim).astype(np.float32),
            keypoints=rng.uniform(0, 400, (k, 2)),
            descriptors=desc.astype(np.float32),
            gt_pose=gt))
    return QuerySet(queries=tuple(queries),
                    intrinsics={0: default_intrinsics()},
                    embedding_dim=emb_dim, descriptor_dim=desc_dim)


def queries_equal(a, b):
    assert len(a.queries) == len(b.queries)
    assert a.intrinsics == b.intrinsics
    for qa, qb in zip(a.queries, b.queries):
        assert qa.image_id == qb.image_id
        assert qa.intrinsics_id == qb.intrinsics_id
        assert qa.embedding.tobytes() == qb.embedding.tobytes()
        assert qa.keypoints.tobytes() == qb.keypoints.tobytes()
        assert qa.descriptors.tobytes() == qb.descriptors.tobytes()
        assert (qa.gt_pose is None) == (qb.gt_pose is None)
        if qa.gt_pose is not None:
            assert qa.gt_pose.quat.tobytes() == qb.gt_pose.quat.tobytes()
            assert qa.gt_pose.trans.tobytes() == qb.gt_pose.trans.tobytes()


@pytest.mark.parametrize("with_gt", [True, False])
def test_queries_round_trip(rng, tmp_path, with_gt):
    qs = make_query_set(rng, with_gt=with_gt)
    p = tmp_path / "q.vstq"
    save_queries(qs, p)
    loaded = load_queries(p)
    queries_equal(qs, loaded)
    p2 = tmp_path / "q2.vstq"
    save_queries(loaded, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_queries_bad_magic(tmp_path):
    p = tmp_path / "bad.vstq"
    p.write_bytes(b"JUNKJUNKJUNK")
    with pytest.raises(FormatError):
        load_queries(p)


def test_text_scene_round_trip(rng, tmp_path):
    bundle = build_random_bundle(rng)
    txt = tmp_path / "scene.txt"
    save_text_scene(bundle, txt)
    loaded = load_text_scene(txt)
    bundles_equal(bundle, loaded)


def test_text_scene_with_embedding_sidecar(rng, tmp_path):
    bundle = build_random_bundle(rng)
    txt = tmp_path / "scene.txt"
    side = tmp_path / "emb.txt"
    save_text_scene(bundle, txt)
    # move embeddings into a sidecar, replacing inline values with '@'
    rows = {int(i): bundle.embeddings[k]
            for k, i in enumerate(bundle.image_ids)}
    save_embedding_sidecar(rows, bundle.embeddings.shape[1], side)
    lines = txt.read_text().splitlines()
    out = []
    for line in lines:
        if line.startswith("image "):
            parts = line.split()
            # image id intrinsics_id quat(4) trans(3) emb(De) vis...
            emb_start = 2 + 4 + 3 + 1  # after 'image', id, intr, quat, trans
            de = bundle.embeddings.shape[1]
            out.append(" ".join(parts[:emb_start] + ["@"]
                                + parts[emb_start + de:]))
        else:
            out.append(line)
    txt.write_text("\n".join(out) + "\n")
    loaded = load_text_scene(txt, embeddings_path=side)
    bundles_equal(bundle, loaded)


def test_embedding_sidecar_round_trip(rng, tmp_path):
    rows = {5: rng.normal(0, 1, 8).astype(np.float32),
            9: rng.normal(0, 1, 8).astype(np.float32)}
    p = tmp_path / "emb.txt"
    save_embedding_sidecar(rows, 8, p)
    loaded, dim = load_embedding_sidecar(p)
    assert dim == 8
    assert set(loaded) == {5, 9}
    for k in rows:
        assert rows[k].tobytes() == loaded[k].tobytes()


def test_text_scene_dangling_reference(rng, tmp_path):
    bundle = build_random_bundle(rng)
    txt = tmp_path / "scene.txt"
    save_text_scene(bundle, txt)
    content = txt.read_text().replace("\nimage 0 ", "\nimage 0 ", 1)
    # corrupt one visibility id to a non-existent point
    lines = content.splitlines()
    for i, line in enumerate(lines):
        if line.startswith("image "):
            parts = line.split()
            parts[-1] = "999999"
            lines[i] = " ".join(parts)
            break
    txt.write_text("\n".join(lines) + "\n")
    with pytest.raises(IntegrityError):
        load_text_scene(txt)


def test_text_scene_malformed_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("vstr-text 1 4 4\npoint not-a-number\n")
    with pytest.raises(FormatError):
        load_text_scene(p)


def test_text_queries_round_trip(rng, tmp_path):
    qs = make_query_set(rng)
    p = tmp_path / "q.txt"
    save_text_queries(qs, p)
    loaded = load_text_queries(p)
    queries_equal(qs, loaded)
