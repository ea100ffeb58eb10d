"""Synthetic scenes with exact ground truth for pipeline evaluation.

A scene is a uniform point cloud in a box, a ring of cameras inside it facing
along the trajectory, frustum-based visibility with optional dropout, smooth
pose-dependent embeddings (random Fourier features of camera position and
viewing direction), canonical unit descriptors per point with per-observation
noise, and pixel keypoints perturbed by sub-pixel noise. Every
``query_stride``-th camera is held out as a query with ground-truth pose.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bundle_io import QueryFeatures
from .errors import DataError
from .geometry import CameraIntrinsics, Pose, matrix_to_quat
from .pnp import reproject
from .scene import SceneBundle, make_bundle


@dataclass(frozen=True)
class SyntheticSceneConfig:
    """Parameters of the generated scene."""

    n_points: int = 5000
    n_cameras: int = 250
    query_stride: int = 5
    extent: float = 10.0
    embedding_dim: int = 64
    descriptor_dim: int = 256
    descriptor_noise: float = 0.05
    embedding_noise: float = 0.02
    keypoint_noise_px: float = 0.5
    fov_deg: float = 70.0
    image_size: int = 640
    dropout: float = 0.1
    pose_jitter: float = 0.0
    seed: int = 0

    def validate(self):
        if self.n_points < 100:
            raise DataError(f"need at least 100 points, got {self.n_points}")
        if self.n_cameras < 10:
            raise DataError(f"need at least 10 cameras, got {self.n_cameras}")
        if self.query_stride < 2:
            raise DataError(f"query_stride must be at least 2, got {self.query_stride}")
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise DataError(f"extent must be positive, got {self.extent}")
        if not (10.0 < self.fov_deg < 170.0):
            raise DataError(f"fov_deg must be in (10, 170), got {self.fov_deg}")
        if self.embedding_dim < 8 or self.descriptor_dim < 8:
            raise DataError("embedding_dim and descriptor_dim must be at least 8")
        if not (0.0 <= self.dropout < 1.0):
            raise DataError(f"dropout must be in [0, 1), got {self.dropout}")
        for name in ("descriptor_noise", "embedding_noise", "keypoint_noise_px",
                     "pose_jitter"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be non-negative")
        if self.image_size < 32:
            raise DataError(f"image_size must be at least 32, got {self.image_size}")


@dataclass(frozen=True)
class SyntheticScene:
    """Generated scene: map, queries, and ground truth for metrics."""

    bundle: SceneBundle
    queries: list  # list of QueryFeatures, ground-truth poses filled in
    query_visible: dict  # query id -> uint64 array of truly visible point ids


class _EmbeddingModel:
    """Smooth pose-to-embedding map: cos(W @ phi + b) random features."""

    def __init__(self, dim: int, extent: float, rng: np.random.Generator):
        self.dim = dim
        self.pos_scale = 4.0 / extent
        self.weights = rng.normal(0.0, 1.0, (dim, 6))
        self.phases = rng.uniform(0.0, 2.0 * math.pi, dim)

    def __call__(self, center: np.ndarray, forward: np.ndarray) -> np.ndarray:
        phi = np.concatenate([center * self.pos_scale, forward])
        return math.sqrt(2.0 / self.dim) * np.cos(self.weights @ phi + self.phases)


def _ring_pose(cfg: SyntheticSceneConfig, i: int, jitter: np.ndarray) -> Pose:
    """Camera i on a circular trajectory, facing along the direction of travel."""
    theta = 2.0 * math.pi * i / cfg.n_cameras
    radius = 0.35 * cfg.extent
    center = np.array([radius * math.cos(theta),
                       radius * math.sin(theta),
                       0.08 * cfg.extent * math.sin(2.0 * theta)]) + jitter
    # forward = tangent of the ring (direction of travel)
    forward = np.array([-math.sin(theta), math.cos(theta), 0.0])
    up = np.array([0.0, 0.0, 1.0])
    y_c = -(up - (up @ forward) * forward)
    y_c = y_c / np.linalg.norm(y_c)
    x_c = np.cross(y_c, forward)
    r_wc = np.stack([x_c, y_c, forward], axis=1)
    return Pose(quat=matrix_to_quat(r_wc), trans=center)


def _visible_indices(points: np.ndarray, pose: Pose, intr: CameraIntrinsics,
                     min_depth: float) -> np.ndarray:
    uv, in_front = reproject(points, pose, intr)
    depth_ok = pose.world_to_camera(points)[:, 2] > min_depth
    with np.errstate(invalid="ignore"):
        in_image = (in_front & depth_ok
                    & (uv[:, 0] >= 0.0) & (uv[:, 0] < intr.width)
                    & (uv[:, 1] >= 0.0) & (uv[:, 1] < intr.height))
    return np.nonzero(in_image)[0]


def generate_synthetic_scene(cfg: SyntheticSceneConfig) -> SyntheticScene:
    """Build a deterministic synthetic scene from the config seed.

    Cameras whose visible set (after dropout) falls below 8 points are
    re-jittered a bounded number of times; if the bound is exhausted the
    config is rejected.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)

    half = 0.5 * cfg.extent
    points = rng.uniform(-half, half, (cfg.n_points, 3))
    canonical = rng.normal(0.0, 1.0, (cfg.n_points, cfg.descriptor_dim))
    canonical /= np.linalg.norm(canonical, axis=1, keepdims=True)

    focal = (cfg.image_size / 2.0) / math.tan(math.radians(cfg.fov_deg) / 2.0)
    intr = CameraIntrinsics(fx=focal, fy=focal,
                            cx=cfg.image_size / 2.0, cy=cfg.image_size / 2.0,
                            width=cfg.image_size, height=cfg.image_size)
    embed = _EmbeddingModel(cfg.embedding_dim, cfg.extent, rng)
    min_depth = 0.02 * cfg.extent

    image_ids, embeddings, quats, trans = [], [], [], []
    intr_ids, visible_lists = [], []
    queries: list[QueryFeatures] = []
    query_visible: dict[int, np.ndarray] = {}

    for i in range(cfg.n_cameras):
        pose = None
        vis = None
        for _ in range(20):
            jitter = np.zeros(3)
            if cfg.pose_jitter > 0:
                jitter = rng.normal(0.0, cfg.pose_jitter, 3)
            candidate = _ring_pose(cfg, i, jitter)
            vis_all = _visible_indices(points, candidate, intr, min_depth)
            if cfg.dropout > 0 and vis_all.shape[0] > 0:
                keep = rng.random(vis_all.shape[0]) >= cfg.dropout
                vis_try = vis_all[keep]
            else:
                vis_try = vis_all
            if vis_try.shape[0] >= 8:
                pose, vis = candidate, vis_try
                break
        if pose is None:
            raise DataError(
                f"camera {i} sees fewer than 8 points after 20 attempts; "
                "increase point count, field of view, or reduce dropout")

        forward = pose.rotation[:, 2]
        emb = embed(pose.trans, forward)
        if cfg.embedding_noise > 0:
            emb = emb + rng.normal(0.0, cfg.embedding_noise, cfg.embedding_dim)

        if (i % cfg.query_stride) == cfg.query_stride - 1:
            uv, _ = reproject(points[vis], pose, intr)
            if cfg.keypoint_noise_px > 0:
                uv = uv + rng.normal(0.0, cfg.keypoint_noise_px, uv.shape)
            desc = canonical[vis]
            if cfg.descriptor_noise > 0:
                desc = desc + rng.normal(0.0, cfg.descriptor_noise, desc.shape)
                desc = desc / np.linalg.norm(desc, axis=1, keepdims=True)
            queries.append(QueryFeatures(
                image_id=i, intrinsics_id=0,
                embedding=emb.astype(np.float32),
                keypoints=uv,
                descriptors=desc.astype(np.float32),
                gt_pose=pose))
            query_visible[i] = vis.astype(np.uint64)
        else:
            image_ids.append(i)
            embeddings.append(emb)
            quats.append(pose.quat)
            trans.append(pose.trans)
            intr_ids.append(0)
            visible_lists.append(vis.astype(np.uint64))

    bundle = make_bundle(
        point_ids=np.arange(cfg.n_points, dtype=np.uint64),
        positions=points,
        descriptors=canonical.astype(np.float32),
        image_ids=np.array(image_ids, dtype=np.uint64),
        embeddings=np.array(embeddings, dtype=np.float32),
        quats=np.array(quats),
        trans=np.array(trans),
        intrinsics_ids=np.array(intr_ids, dtype=np.uint32),
        visible=tuple(visible_lists),
        intrinsics={0: intr})
    return SyntheticScene(bundle=bundle, queries=queries,
                          query_visible=query_visible)
