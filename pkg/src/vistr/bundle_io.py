"""Bit-exact file formats for scene bundles and query sets.

Binary layouts (all little-endian):

``VSTR`` scene bundle
    magic ``VSTR`` | u32 version | u32 embedding_dim | u32 descriptor_dim |
    u64 n_points | u64 n_images |
    points: (u64 id, 3 x f64 position, Df x f32 descriptor) * n |
    images: (u64 id, De x f32 embedding, 4 x f64 quat, 3 x f64 trans,
             u32 intrinsics_id, u64 n_visible, u64 ids...) * m |
    intrinsics: u32 count, (u32 id, 4 x f64 fx fy cx cy, u32 w, u32 h) * c |
    norm: f64 scale, 3 x f64 offset

``VSTQ`` query set
    magic ``VSTQ`` | u32 version | u32 embedding_dim | u32 descriptor_dim |
    intrinsics table (as above) | u64 n_queries |
    per query: u64 id, u32 intrinsics_id, u8 has_gt,
               [4 x f64 quat, 3 x f64 trans if has_gt],
               De x f32 embedding, u64 n_keypoints,
               (f64 u, f64 v, Df x f32 descriptor) * k

A documented plain-text exchange format covers both payloads for
interoperability with external SfM/feature exports; see the README.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FileMissingError, FormatError, IntegrityError, ShapeError
from .geometry import CameraIntrinsics, Pose
from .scene import NormTransform, SceneBundle, compute_norm_transform, make_bundle

BUNDLE_MAGIC = b"VSTR"
QUERY_MAGIC = b"VSTQ"
FORMAT_VERSION = 1

TEXT_SCENE_HEADER = "vstr-text"
TEXT_QUERY_HEADER = "vstr-queries"
TEXT_EMBED_HEADER = "vstr-embeddings"


@dataclass(frozen=True)
class QueryFeatures:
    """Everything extracted from one query image."""

    image_id: int
    intrinsics_id: int
    embedding: np.ndarray  # (De,) float32
    keypoints: np.ndarray  # (k,2) float64 pixels
    descriptors: np.ndarray  # (k,Df) float32, unit norm
    gt_pose: Pose | None = None


@dataclass(frozen=True)
class QuerySet:
    queries: tuple
    intrinsics: dict  # id -> CameraIntrinsics
    embedding_dim: int
    descriptor_dim: int

    def __len__(self):
        return len(self.queries)

    def camera(self, intrinsics_id: int) -> CameraIntrinsics:
        try:
            return self.intrinsics[int(intrinsics_id)]
        except KeyError as exc:
            raise IntegrityError(f"unknown intrinsics id {intrinsics_id}") from exc


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file")
        out = self.data[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def array(self, dtype, count):
        dt = np.dtype(dtype)
        raw = self.take(dt.itemsize * count)
        return np.frombuffer(raw, dtype=dt).copy()

    def done(self):
        if self.off != len(self.data):
            raise FormatError(f"{self.path}: {len(self.data) - self.off} trailing bytes")


def _read_file(path) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise FileMissingError(f"no such file: {p}")
    return p.read_bytes()


def _pack_intrinsics(table: dict) -> bytes:
    parts = [struct.pack("<I", len(table))]
    for iid in sorted(table):
        c = table[iid]
        parts.append(
            struct.pack("<IddddII", iid, c.fx, c.fy, c.cx, c.cy, c.width, c.height)
        )
    return b"".join(parts)


def _unpack_intrinsics(r: _Reader) -> dict:
    (count,) = r.unpack("I")
    table = {}
    for _ in range(count):
        iid, fx, fy, cx, cy, w, h = r.unpack("IddddII")
        table[iid] = CameraIntrinsics(fx, fy, cx, cy, w, h)
    return table


def save_scene_bundle(bundle: SceneBundle, path) -> None:
    n, m = bundle.num_points, bundle.num_images
    de, df = bundle.embedding_dim, bundle.descriptor_dim
    parts = [
        BUNDLE_MAGIC,
        struct.pack("<IIIQQ", FORMAT_VERSION, de, df, n, m),
    ]
    pt_dtype = np.dtype(
        [("id", "<u8"), ("pos", "<f8", (3,)), ("desc", "<f4", (df,))]
    )
    pts = np.empty(n, dtype=pt_dtype)
    pts["id"] = bundle.point_ids
    pts["pos"] = bundle.positions
    pts["desc"] = bundle.descriptors
    parts.append(pts.tobytes())
    for k in range(m):
        vis = bundle.visible[k]
        parts.append(struct.pack("<Q", int(bundle.image_ids[k])))
        parts.append(bundle.embeddings[k].astype("<f4", copy=False).tobytes())
        parts.append(bundle.quats[k].astype("<f8", copy=False).tobytes())
        parts.append(bundle.trans[k].astype("<f8", copy=False).tobytes())
        parts.append(struct.pack("<IQ", int(bundle.intrinsics_ids[k]), vis.shape[0]))
        parts.append(vis.astype("<u8", copy=False).tobytes())
    parts.append(_pack_intrinsics(bundle.intrinsics))
    parts.append(struct.pack("<d", bundle.norm.scale))
    parts.append(bundle.norm.offset.astype("<f8", copy=False).tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_scene_bundle(path) -> SceneBundle:
    r = _Reader(_read_file(path), path)
    if r.take(4) != BUNDLE_MAGIC:
        raise FormatError(f"{path}: bad magic, not a scene bundle")
    version, de, df, n, m = r.unpack("IIIQQ")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported bundle version {version}")
    pt_dtype = np.dtype(
        [("id", "<u8"), ("pos", "<f8", (3,)), ("desc", "<f4", (df,))]
    )
    pts = r.array(pt_dtype, n)
    image_ids = np.empty(m, dtype=np.uint64)
    embeddings = np.empty((m, de), dtype=np.float32)
    quats = np.empty((m, 4), dtype=np.float64)
    trans = np.empty((m, 3), dtype=np.float64)
    intr_ids = np.empty(m, dtype=np.uint32)
    visible = []
    for k in range(m):
        (image_ids[k],) = r.unpack("Q")
        embeddings[k] = r.array("<f4", de)
        quats[k] = r.array("<f8", 4)
        trans[k] = r.array("<f8", 3)
        iid, nvis = r.unpack("IQ")
        intr_ids[k] = iid
        visible.append(r.array("<u8", nvis))
    intrinsics = _unpack_intrinsics(r)
    (scale,) = r.unpack("d")
    offset = r.array("<f8", 3)
    r.done()
    bundle = SceneBundle(
        point_ids=pts["id"].copy(),
        positions=pts["pos"].astype(np.float64),
        descriptors=pts["desc"].copy(),
        image_ids=image_ids,
        embeddings=embeddings,
        quats=quats,
        trans=trans,
        intrinsics_ids=intr_ids,
        visible=tuple(visible),
        intrinsics=intrinsics,
        norm=NormTransform(scale, offset),
        version=version,
    )
    return bundle.validate()


def save_queries(qs: QuerySet, path) -> None:
    de, df = qs.embedding_dim, qs.descriptor_dim
    parts = [
        QUERY_MAGIC,
        struct.pack("<III", FORMAT_VERSION, de, df),
        _pack_intrinsics(qs.intrinsics),
        struct.pack("<Q", len(qs.queries)),
    ]
    for q in qs.queries:
        parts.append(struct.pack("<QIB", q.image_id, q.intrinsics_id, q.gt_pose is not None))
        if q.gt_pose is not None:
            parts.append(q.gt_pose.quat.astype("<f8").tobytes())
            parts.append(q.gt_pose.trans.astype("<f8").tobytes())
        parts.append(q.embedding.astype("<f4", copy=False).tobytes())
        k = q.keypoints.shape[0]
        parts.append(struct.pack("<Q", k))
        kp_dtype = np.dtype([("uv", "<f8", (2,)), ("desc", "<f4", (df,))])
        rows = np.empty(k, dtype=kp_dtype)
        rows["uv"] = q.keypoints
        rows["desc"] = q.descriptors
        parts.append(rows.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_queries(path) -> QuerySet:
    r = _Reader(_read_file(path), path)
    if r.take(4) != QUERY_MAGIC:
        raise FormatError(f"{path}: bad magic, not a query set")
    version, de, df = r.unpack("III")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported query version {version}")
    intrinsics = _unpack_intrinsics(r)
    (count,) = r.unpack("Q")
    queries = []
    kp_dtype = np.dtype([("uv", "<f8", (2,)), ("desc", "<f4", (df,))])
    for _ in range(count):
        qid, iid, has_gt = r.unpack("QIB")
        gt = None
        if has_gt:
            quat = r.array("<f8", 4)
            tr = r.array("<f8", 3)
            gt = Pose(quat, tr)
        emb = r.array("<f4", de)
        (k,) = r.unpack("Q")
        rows = r.array(kp_dtype, k)
        if iid not in intrinsics:
            raise IntegrityError(f"query {qid} references unknown intrinsics {iid}")
        queries.append(
            QueryFeatures(
                image_id=qid,
                intrinsics_id=iid,
                embedding=emb,
                keypoints=rows["uv"].astype(np.float64),
                descriptors=rows["desc"].copy(),
                gt_pose=gt,
            )
        )
    r.done()
    return QuerySet(tuple(queries), intrinsics, de, df)


# ---------------------------------------------------------------------------
# Plain-text exchange format
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return " ".join(_fmt(x) for x in np.asarray(v, dtype=np.float64))


def _lines(path):
    for lineno, raw in enumerate(_read_file(path).decode("utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def _parse_floats(tokens, count, where):
    if len(tokens) != count:
        raise FormatError(f"{where}: expected {count} values, got {len(tokens)}")
    try:
        return np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{where}: bad number ({exc})") from exc


def load_embedding_sidecar(path):
    """Read an embeddings sidecar; returns (dict id -> float32 vector, dim)."""
    rows = {}
    dim = None
    for lineno, toks in _lines(path):
        where = f"{path}:{lineno}"
        if dim is None:
            if len(toks) != 3 or toks[0] != TEXT_EMBED_HEADER:
                raise FormatError(f"{where}: expected '{TEXT_EMBED_HEADER} <version> <dim>'")
            if int(toks[1]) != FORMAT_VERSION:
                raise FormatError(f"{where}: unsupported version {toks[1]}")
            dim = int(toks[2])
            continue
        if toks[0] != "embedding":
            raise FormatError(f"{where}: expected 'embedding' record")
        iid = int(toks[1])
        vec = _parse_floats(toks[2:], dim, where)
        if not np.all(np.isfinite(vec)):
            raise DataError(f"{where}: non-finite embedding")
        if iid in rows:
            raise IntegrityError(f"{where}: duplicate embedding for image {iid}")
        rows[iid] = vec.astype(np.float32)
    if dim is None:
        raise FormatError(f"{path}: missing '{TEXT_EMBED_HEADER}' header")
    return rows, dim


def save_embedding_sidecar(rows: dict, dim: int, path) -> None:
    out = [f"{TEXT_EMBED_HEADER} {FORMAT_VERSION} {dim}"]
    for iid in rows:
        out.append(f"embedding {int(iid)} {_fmt_vec(rows[iid])}")
    Path(path).write_text("\n".join(out) + "\n")


def load_text_scene(path, embeddings_path=None) -> SceneBundle:
    """Parse the text exchange format into a validated bundle.

    Image records may carry ``@`` in place of inline embedding values, in
    which case an embeddings sidecar must supply a record for that image id.
    Descriptors are unit-normalised at ingest.
    """
    sidecar = {}
    if embeddings_path is not None:
        sidecar, _ = load_embedding_sidecar(embeddings_path)
    de = df = None
    point_ids, positions, descriptors = [], [], []
    image_ids, embeddings, quats, trans, intr_ids, visible = [], [], [], [], [], []
    intrinsics = {}
    norm = None
    for lineno, toks in _lines(path):
        where = f"{path}:{lineno}"
        if de is None:
            if len(toks) != 4 or toks[0] != TEXT_SCENE_HEADER:
                raise FormatError(f"{where}: expected '{TEXT_SCENE_HEADER} <version> <De> <Df>'")
            if int(toks[1]) != FORMAT_VERSION:
                raise FormatError(f"{where}: unsupported version {toks[1]}")
            de, df = int(toks[2]), int(toks[3])
            continue
        kind = toks[0]
        if kind == "intrinsics":
            vals = _parse_floats(toks[2:], 6, where)
            intrinsics[int(toks[1])] = CameraIntrinsics(
                vals[0], vals[1], vals[2], vals[3], int(vals[4]), int(vals[5])
            )
        elif kind == "point":
            vals = _parse_floats(toks[2:], 3 + df, where)
            d = vals[3:]
            norm_d = np.linalg.norm(d)
            if norm_d == 0 or not np.isfinite(norm_d):
                raise DataError(f"{where}: descriptor has invalid norm")
            point_ids.append(int(toks[1]))
            positions.append(vals[:3])
            descriptors.append((d / norm_d).astype(np.float32))
        elif kind == "image":
            iid = int(toks[1])
            intr = int(toks[2])
            pose_vals = _parse_floats(toks[3:10], 7, where)
            rest = toks[10:]
            if rest and rest[0] == "@":
                if iid not in sidecar:
                    raise IntegrityError(
                        f"{where}: image {iid} expects a sidecar embedding, none found"
                    )
                emb = sidecar[iid]
                if emb.shape[0] != de:
                    raise ShapeError(
                        f"{where}: sidecar embedding dim {emb.shape[0]} != {de}"
                    )
                rest = rest[1:]
            else:
                emb = _parse_floats(rest[:de], de, where).astype(np.float32)
                rest = rest[de:]
            if not rest:
                raise FormatError(f"{where}: missing visibility count")
            nvis = int(rest[0])
            if len(rest) != 1 + nvis:
                raise FormatError(f"{where}: expected {nvis} visible ids, got {len(rest) - 1}")
            image_ids.append(iid)
            embeddings.append(emb)
            quats.append(pose_vals[:4])
            trans.append(pose_vals[4:])
            intr_ids.append(intr)
            visible.append(np.array([int(t) for t in rest[1:]], dtype=np.uint64))
        elif kind == "norm":
            vals = _parse_floats(toks[1:], 4, where)
            norm = NormTransform(vals[0], vals[1:])
        else:
            raise FormatError(f"{where}: unknown record '{kind}'")
    if de is None:
        raise FormatError(f"{path}: missing '{TEXT_SCENE_HEADER}' header")
    if not point_ids:
        raise FormatError(f"{path}: no point records")
    return make_bundle(
        point_ids,
        positions,
        descriptors,
        image_ids,
        embeddings,
        quats,
        trans,
        intr_ids,
        visible,
        intrinsics,
        norm=norm,
    )


def save_text_scene(bundle: SceneBundle, path) -> None:
    out = [f"{TEXT_SCENE_HEADER} {FORMAT_VERSION} {bundle.embedding_dim} {bundle.descriptor_dim}"]
    for iid in sorted(bundle.intrinsics):
        c = bundle.intrinsics[iid]
        out.append(
            f"intrinsics {iid} {_fmt(c.fx)} {_fmt(c.fy)} {_fmt(c.cx)} {_fmt(c.cy)} {c.width} {c.height}"
        )
    for i in range(bundle.num_points):
        out.append(
            f"point {int(bundle.point_ids[i])} {_fmt_vec(bundle.positions[i])} "
            f"{_fmt_vec(bundle.descriptors[i])}"
        )
    for k in range(bundle.num_images):
        vis = " ".join(str(int(p)) for p in bundle.visible[k])
        out.append(
            f"image {int(bundle.image_ids[k])} {int(bundle.intrinsics_ids[k])} "
            f"{_fmt_vec(bundle.quats[k])} {_fmt_vec(bundle.trans[k])} "
            f"{_fmt_vec(bundle.embeddings[k])} {bundle.visible[k].shape[0]} {vis}"
        )
    out.append(f"norm {_fmt(bundle.norm.scale)} {_fmt_vec(bundle.norm.offset)}")
    Path(path).write_text("\n".join(out) + "\n")


def load_text_queries(path, embeddings_path=None) -> QuerySet:
    sidecar = {}
    if embeddings_path is not None:
        sidecar, _ = load_embedding_sidecar(embeddings_path)
    de = df = None
    intrinsics = {}
    queries = []
    cur = None  # [id, intr_id, embedding, gt, keypoints, descriptors]

    def finish(where):
        if cur is None:
            return
        if cur[2] is None:
            raise FormatError(f"{where}: query {cur[0]} has no embedding")
        if not cur[4]:
            raise FormatError(f"{where}: query {cur[0]} has no keypoints")
        queries.append(
            QueryFeatures(
                image_id=cur[0],
                intrinsics_id=cur[1],
                embedding=cur[2],
                keypoints=np.array(cur[4], dtype=np.float64),
                descriptors=np.array(cur[5], dtype=np.float32),
                gt_pose=cur[3],
            )
        )

    for lineno, toks in _lines(path):
        where = f"{path}:{lineno}"
        if de is None:
            if len(toks) != 4 or toks[0] != TEXT_QUERY_HEADER:
                raise FormatError(f"{where}: expected '{TEXT_QUERY_HEADER} <version> <De> <Df>'")
            if int(toks[1]) != FORMAT_VERSION:
                raise FormatError(f"{where}: unsupported version {toks[1]}")
            de, df = int(toks[2]), int(toks[3])
            continue
        kind = toks[0]
        if kind == "intrinsics":
            vals = _parse_floats(toks[2:], 6, where)
            intrinsics[int(toks[1])] = CameraIntrinsics(
                vals[0], vals[1], vals[2], vals[3], int(vals[4]), int(vals[5])
            )
        elif kind == "query":
            if cur is not None:
                raise FormatError(f"{where}: previous query not closed with 'end'")
            qid = int(toks[1])
            cur = [qid, int(toks[2]), None, None, [], []]
            if qid in sidecar:
                cur[2] = sidecar[qid]
        elif cur is None:
            raise FormatError(f"{where}: '{kind}' outside a query block")
        elif kind == "embedding":
            cur[2] = _parse_floats(toks[1:], de, where).astype(np.float32)
        elif kind == "gt":
            vals = _parse_floats(toks[1:], 7, where)
            cur[3] = Pose(vals[:4], vals[4:])
        elif kind == "keypoint":
            vals = _parse_floats(toks[1:], 2 + df, where)
            d = vals[2:]
            n = np.linalg.norm(d)
            if n == 0 or not np.isfinite(n):
                raise DataError(f"{where}: keypoint descriptor has invalid norm")
            cur[4].append(vals[:2])
            cur[5].append((d / n).astype(np.float32))
        elif kind == "end":
            finish(where)
            cur = None
        else:
            raise FormatError(f"{where}: unknown record '{kind}'")
    if de is None:
        raise FormatError(f"{path}: missing '{TEXT_QUERY_HEADER}' header")
    if cur is not None:
        raise FormatError(f"{path}: unterminated query block")
    for q in queries:
        if q.intrinsics_id not in intrinsics:
            raise IntegrityError(
                f"query {q.image_id} references unknown intrinsics {q.intrinsics_id}"
            )
    return QuerySet(tuple(queries), intrinsics, de, df)


def save_text_queries(qs: QuerySet, path) -> None:
    out = [f"{TEXT_QUERY_HEADER} {FORMAT_VERSION} {qs.embedding_dim} {qs.descriptor_dim}"]
    for iid in sorted(qs.intrinsics):
        c = qs.intrinsics[iid]
        out.append(
            f"intrinsics {iid} {_fmt(c.fx)} {_fmt(c.fy)} {_fmt(c.cx)} {_fmt(c.cy)} {c.width} {c.height}"
        )
    for q in qs.queries:
        out.append(f"query {q.image_id} {q.intrinsics_id}")
        out.append(f"embedding {_fmt_vec(q.embedding)}")
        if q.gt_pose is not None:
            out.append(f"gt {_fmt_vec(q.gt_pose.quat)} {_fmt_vec(q.gt_pose.trans)}")
        for i in range(q.keypoints.shape[0]):
            out.append(f"keypoint {_fmt_vec(q.keypoints[i])} {_fmt_vec(q.descriptors[i])}")
        out.append("end")
    Path(path).write_text("\n".join(out) + "\n")
