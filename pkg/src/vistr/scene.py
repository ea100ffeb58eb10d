"""Scene data model: the SfM map, coordinate normalisation, training pairs.

A :class:`SceneBundle` holds the point cloud (positions + descriptors), the
mapping images (embedding, pose, visibility list) and the affine transform
that maps scene coordinates into the unit cube used by the generative model.
Bundles are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateGeometryError, IntegrityError, ShapeError
from .geometry import CameraIntrinsics, Pose, canonicalize_quat

BUNDLE_VERSION = 1
DESCRIPTOR_NORM_TOL = 1e-4


@dataclass(frozen=True)
class NormTransform:
    """Isotropic affine map p -> scale * p + offset taking the scene into [0,1]^3.

    A single scale for all axes keeps Euclidean distances meaningful after
    inversion, so metric radii survive denormalisation.
    """

    scale: float
    offset: np.ndarray  # (3,)

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise DataError("normalisation scale must be positive and finite")
        off = np.asarray(self.offset, dtype=np.float64).reshape(3).copy()
        if not np.all(np.isfinite(off)):
            raise DataError("normalisation offset is non-finite")
        object.__setattr__(self, "offset", off)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.offset

    def invert(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.offset) / self.scale

    @classmethod
    def identity(cls) -> "NormTransform":
        return cls(1.0, np.zeros(3))


def compute_norm_transform(points: np.ndarray, margin: float = 0.05) -> NormTransform:
    """Fit the isotropic map sending the cloud's bounding box into [margin, 1-margin]^3.

    The widest axis spans exactly [margin, 1-margin]; the box centre maps to
    (0.5, 0.5, 0.5).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeError(f"expected (n,3) points, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DataError("points contain non-finite values")
    if not (0.0 <= margin <= 0.25):
        raise DataError(f"margin must be in [0, 0.25], got {margin}")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = float(np.max(hi - lo))
    if extent <= 0.0:
        raise DegenerateGeometryError("all points identical; extent is zero")
    scale = (1.0 - 2.0 * margin) / extent
    center = (lo + hi) / 2.0
    offset = 0.5 - scale * center
    return NormTransform(scale, offset)


@dataclass(frozen=True)
class SceneBundle:
    """An SfM map plus everything needed to train and localise against it."""

    point_ids: np.ndarray  # (n,) uint64, unique
    positions: np.ndarray  # (n,3) float64, metres
    descriptors: np.ndarray  # (n,Df) float32, unit L2 norm
    image_ids: np.ndarray  # (m,) uint64, unique
    embeddings: np.ndarray  # (m,De) float32
    quats: np.ndarray  # (m,4) float64, world-from-camera, w>=0
    trans: np.ndarray  # (m,3) float64, camera centres
    intrinsics_ids: np.ndarray  # (m,) uint32
    visible: tuple  # per image: uint64 array of point ids
    intrinsics: dict  # id -> CameraIntrinsics
    norm: NormTransform
    version: int = BUNDLE_VERSION
    _point_index: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_points(self) -> int:
        return int(self.point_ids.shape[0])

    @property
    def num_images(self) -> int:
        return int(self.image_ids.shape[0])

    @property
    def embedding_dim(self) -> int:
        return int(self.embeddings.shape[1])

    @property
    def descriptor_dim(self) -> int:
        return int(self.descriptors.shape[1])

    def point_index(self, ids: np.ndarray) -> np.ndarray:
        """Map point ids to row indices; raises on dangling ids."""
        if not self._point_index:
            self._point_index.update(
                (int(pid), i) for i, pid in enumerate(self.point_ids)
            )
        try:
            return np.array([self._point_index[int(pid)] for pid in np.atleast_1d(ids)])
        except KeyError as exc:
            raise IntegrityError(f"unknown point id {exc.args[0]}") from exc

    def pose(self, image_idx: int) -> Pose:
        return Pose(self.quats[image_idx], self.trans[image_idx])

    def camera(self, intrinsics_id: int) -> CameraIntrinsics:
        try:
            return self.intrinsics[int(intrinsics_id)]
        except KeyError as exc:
            raise IntegrityError(f"unknown intrinsics id {intrinsics_id}") from exc

    def validate(self) -> "SceneBundle":
        n, m = self.num_points, self.num_images
        if self.positions.shape != (n, 3):
            raise ShapeError("positions shape mismatch")
        if self.descriptors.shape[0] != n:
            raise ShapeError("descriptor count mismatch")
        if self.embeddings.shape[0] != m or self.quats.shape != (m, 4):
            raise ShapeError("image array shape mismatch")
        if self.trans.shape != (m, 3) or self.intrinsics_ids.shape[0] != m:
            raise ShapeError("image array shape mismatch")
        if len(self.visible) != m:
            raise ShapeError("visibility list count mismatch")
        if len(np.unique(self.point_ids)) != n:
            raise IntegrityError("duplicate point ids")
        if len(np.unique(self.image_ids)) != m:
            raise IntegrityError("duplicate image ids")
        for arr, what in (
            (self.positions, "positions"),
            (self.descriptors, "descriptors"),
            (self.embeddings, "embeddings"),
            (self.quats, "poses"),
            (self.trans, "poses"),
        ):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite values in {what}")
        norms = np.linalg.norm(self.descriptors.astype(np.float64), axis=1)
        if n and np.max(np.abs(norms - 1.0)) > DESCRIPTOR_NORM_TOL:
            raise DataError("descriptors are not unit-normalised")
        qn = np.linalg.norm(self.quats, axis=1)
        if m and np.max(np.abs(qn - 1.0)) > 1e-9:
            raise DataError("pose quaternions are not unit-normalised")
        known = set(int(p) for p in self.point_ids)
        for k, vis in enumerate(self.visible):
            if vis.shape[0] == 0:
                raise IntegrityError(f"image {int(self.image_ids[k])} has empty visibility")
            for pid in vis:
                if int(pid) not in known:
                    raise IntegrityError(
                        f"image {int(self.image_ids[k])} references unknown point {int(pid)}"
                    )
        for iid in self.intrinsics_ids:
            if int(iid) not in self.intrinsics:
                raise IntegrityError(f"unknown intrinsics id {int(iid)}")
        # The declared transform must put the cloud inside the unit cube.
        if n:
            mapped = self.norm.apply(self.positions)
            if mapped.min() < -1e-9 or mapped.max() > 1.0 + 1e-9:
                raise IntegrityError("norm transform does not map points into [0,1]^3")
        return self


def make_bundle(
    point_ids,
    positions,
    descriptors,
    image_ids,
    embeddings,
    quats,
    trans,
    intrinsics_ids,
    visible,
    intrinsics,
    norm=None,
) -> SceneBundle:
    """Assemble and validate a bundle, deriving the norm transform if absent."""
    positions = np.asarray(positions, dtype=np.float64)
    quats = np.asarray(quats, dtype=np.float64)
    if quats.size:
        quats = np.stack([canonicalize_quat(q) for q in quats])
    if norm is None:
        norm = compute_norm_transform(positions)
    bundle = SceneBundle(
        point_ids=np.asarray(point_ids, dtype=np.uint64),
        positions=positions,
        descriptors=np.asarray(descriptors, dtype=np.float32),
        image_ids=np.asarray(image_ids, dtype=np.uint64),
        embeddings=np.asarray(embeddings, dtype=np.float32),
        quats=quats,
        trans=np.asarray(trans, dtype=np.float64),
        intrinsics_ids=np.asarray(intrinsics_ids, dtype=np.uint32),
        visible=tuple(np.asarray(v, dtype=np.uint64) for v in visible),
        intrinsics=dict(intrinsics),
        norm=norm,
    )
    return bundle.validate()


def build_training_pairs(bundle: SceneBundle, seed: int):
    """Flatten per-image visibility into a shuffled (image, point) pair dataset.

    Returns ``(image_indices, points_norm)`` where ``points_norm`` are the
    visible point positions mapped into the unit cube. One pair per
    (image, visible point) incidence; order is a seeded uniform shuffle.
    """
    img_idx = []
    pt_rows = []
    for k in range(bundle.num_images):
        rows = bundle.point_index(bundle.visible[k])
        img_idx.append(np.full(rows.shape[0], k, dtype=np.int64))
        pt_rows.append(rows)
    img_idx = np.concatenate(img_idx) if img_idx else np.empty(0, dtype=np.int64)
    pt_rows = np.concatenate(pt_rows) if pt_rows else np.empty(0, dtype=np.int64)
    rng = np.random.default_rng(seed)
    order = rng.permutation(img_idx.shape[0])
    points_norm = bundle.norm.apply(bundle.positions[pt_rows[order]])
    return img_idx[order], points_norm
