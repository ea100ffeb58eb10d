"""End-to-end localisation of a single query against a scene.

Chains the four stages — structure generation, submap retrieval, descriptor
matching, robust pose estimation — and reports per-stage wall-clock timings
in microseconds alongside the pose.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .bundle_io import QueryFeatures
from .errors import DataError, InsufficientMatchesError, NoSubmapError, ShapeError
from .geometry import CameraIntrinsics, Pose
from .matching import MatchResult, match_descriptors
from .pnp import RansacConfig, RansacResult, ransac_pnp
from .retrieval import SpatialIndex, Submap, radius_retrieve, sample_structure
from .scene import SceneBundle
from .vae.model import VaeModel


@dataclass(frozen=True)
class RetrievalConfig:
    """Settings for structure generation and submap selection."""

    n_samples: int = 1000
    radius: float = 5.0
    voxel_size: float = 1.0
    seed: int = 0

    def validate(self):
        if self.n_samples < 1:
            raise DataError(f"n_samples must be positive, got {self.n_samples}")
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise DataError(f"radius must be positive, got {self.radius}")
        if not np.isfinite(self.voxel_size) or self.voxel_size <= 0:
            raise DataError(f"voxel_size must be positive, got {self.voxel_size}")


@dataclass(frozen=True)
class StageTimings:
    """Wall-clock duration of each pipeline stage, microseconds."""

    generate_us: float
    retrieve_us: float
    match_us: float
    pose_us: float

    @property
    def total_us(self) -> float:
        return self.generate_us + self.retrieve_us + self.match_us + self.pose_us


@dataclass(frozen=True)
class PoseEstimate:
    """Localisation outcome for one query."""

    query_id: int
    success: bool
    pose: Pose
    num_inliers: int
    num_matches: int
    submap_size: int
    num_iterations: int
    timings: StageTimings
    failure_reason: str = ""
    retrieved_ids: np.ndarray = field(default_factory=lambda: np.empty(0, np.uint64))


def localize(model: VaeModel, bundle: SceneBundle, index: SpatialIndex,
             query: QueryFeatures, intrinsics: CameraIntrinsics,
             retrieval: RetrievalConfig = RetrievalConfig(),
             ransac: RansacConfig = RansacConfig(),
             match_strategy: str = "mutual") -> PoseEstimate:
    """Estimate the camera pose of one query image against the scene.

    A query that yields an empty submap, too few matches, or no RANSAC
    consensus produces a failed estimate (success=False with the reason set)
    rather than an exception; shape mismatches between the model, bundle and
    query still raise.
    """
    retrieval.validate()
    if model.embedding_dim != bundle.embeddings.shape[1]:
        raise ShapeError(
            f"model expects {model.embedding_dim}-d embeddings but bundle "
            f"has {bundle.embeddings.shape[1]}-d")
    if query.embedding.shape[0] != model.embedding_dim:
        raise ShapeError(
            f"query embedding is {query.embedding.shape[0]}-d but model "
            f"expects {model.embedding_dim}-d")
    if query.descriptors.shape[1] != bundle.descriptors.shape[1]:
        raise ShapeError(
            f"query descriptors are {query.descriptors.shape[1]}-d but map "
            f"has {bundle.descriptors.shape[1]}-d")

    t0 = time.perf_counter_ns()
    generated = sample_structure(model, query.embedding, retrieval.n_samples,
                                 retrieval.seed)
    t1 = time.perf_counter_ns()
    submap = radius_retrieve(index, generated, retrieval.radius,
                             retrieval.voxel_size)
    t2 = time.perf_counter_ns()

    def _fail(reason, t_match, t_pose, matches=0):
        timings = StageTimings(generate_us=(t1 - t0) / 1e3,
                               retrieve_us=(t2 - t1) / 1e3,
                               match_us=t_match, pose_us=t_pose)
        return PoseEstimate(query_id=query.image_id, success=False,
                            pose=Pose.identity(), num_inliers=0,
                            num_matches=matches, submap_size=submap.size,
                            num_iterations=0, timings=timings,
                            failure_reason=reason,
                            retrieved_ids=submap.point_ids)

    if submap.size == 0:
        return _fail("empty submap", 0.0, 0.0)

    try:
        matches = match_descriptors(query.descriptors, submap,
                                    strategy=match_strategy)
    except NoSubmapError:
        return _fail("empty submap", 0.0, 0.0)
    t3 = time.perf_counter_ns()

    points_w = submap.positions[matches.submap_indices]
    pixels = query.keypoints[matches.keypoint_indices]
    try:
        result = ransac_pnp(points_w, pixels, intrinsics, ransac)
    except InsufficientMatchesError:
        return _fail("too few matches", (t3 - t2) / 1e3, 0.0, matches.count)
    t4 = time.perf_counter_ns()

    timings = StageTimings(generate_us=(t1 - t0) / 1e3,
                           retrieve_us=(t2 - t1) / 1e3,
                           match_us=(t3 - t2) / 1e3,
                           pose_us=(t4 - t3) / 1e3)
    return PoseEstimate(query_id=query.image_id, success=result.success,
                        pose=result.pose, num_inliers=result.num_inliers,
                        num_matches=matches.count, submap_size=submap.size,
                        num_iterations=result.num_iterations, timings=timings,
                        failure_reason="" if result.success else "no consensus",
                        retrieved_ids=submap.point_ids)
