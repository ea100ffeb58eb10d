"""Submap retrieval: generate structure from the model, thin it out, query the map.

The pipeline is: sample latent vectors from the prior, decode them into
normalised 3D points conditioned on a query embedding, map those points back
to scene coordinates, collapse them onto a voxel grid, and collect every map
point within a fixed radius of any surviving voxel centroid.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError, ShapeError
from .scene import SceneBundle
from .vae.model import VaeModel, decode


@dataclass(frozen=True)
class GeneratedPointSet:
    """Structure points decoded from prior samples, in scene coordinates."""

    points: np.ndarray  # (n, 3) float64
    latents: np.ndarray  # (n, d) float64, the prior draws that produced them
    seed: int = 0

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ShapeError(f"generated points must be (n, 3), got {self.points.shape}")
        if self.latents.shape[0] != self.points.shape[0]:
            raise ShapeError("latents and points must have matching row counts")

    @property
    def count(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class Submap:
    """Map points selected for one query: ids, positions and descriptors."""

    point_ids: np.ndarray  # (k,) uint64, strictly increasing
    positions: np.ndarray  # (k, 3) float64
    descriptors: np.ndarray  # (k, Df) float32

    @property
    def size(self) -> int:
        return int(self.point_ids.shape[0])


def sample_structure(model: VaeModel, embedding: np.ndarray, n_samples: int,
                     seed: int) -> GeneratedPointSet:
    """Decode ``n_samples`` standard-normal latents conditioned on one embedding.

    Decoded points live in the normalised cube; they are mapped back to scene
    coordinates with the inverse of the transform stored on the model.
    """
    if n_samples <= 0:
        raise DataError(f"n_samples must be positive, got {n_samples}")
    embedding = model.check_embedding(np.asarray(embedding, dtype=np.float64).reshape(1, -1))
    rng = np.random.default_rng(seed)
    latents = rng.standard_normal((n_samples, model.latent_dim))
    emb = np.broadcast_to(embedding[0], (n_samples, embedding.shape[1]))
    y_norm = decode(model, emb, latents)
    points = model.norm.invert(y_norm)
    return GeneratedPointSet(points=points, latents=latents, seed=seed)


def voxel_downsample(points: np.ndarray, cell_size: float) -> np.ndarray:
    """Collapse points onto a voxel grid, one centroid per occupied cell.

    Cell membership uses ``floor(p / cell_size)``; the output holds the mean
    of the points in each occupied cell, ordered by lexicographically sorted
    cell index, which makes the result independent of input order up to
    floating-point summation order.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeError(f"points must be (n, 3), got {points.shape}")
    if not np.isfinite(cell_size) or cell_size <= 0:
        raise DataError(f"cell_size must be positive and finite, got {cell_size}")
    if points.shape[0] == 0:
        return points.copy()
    cells = np.floor(points / cell_size).astype(np.int64)
    _, inverse, counts = np.unique(cells, axis=0, return_inverse=True,
                                   return_counts=True)
    sums = np.zeros((counts.shape[0], 3))
    for k in range(3):
        sums[:, k] = np.bincount(inverse, weights=points[:, k],
                                 minlength=counts.shape[0])
    return sums / counts[:, None]


class SpatialIndex:
    """Exact radius-search index over the map points of a scene bundle.

    Wraps a k-d tree; every query returns exactly the set a brute-force scan
    would. Built once per bundle and reused across queries.
    """

    def __init__(self, bundle: SceneBundle, leafsize: int = 16):
        if bundle.positions.shape[0] == 0:
            raise DataError("cannot build a spatial index over an empty map")
        self._bundle = bundle
        self._tree = cKDTree(bundle.positions, leafsize=leafsize,
                             balanced_tree=True, compact_nodes=True)

    @property
    def size(self) -> int:
        return int(self._bundle.positions.shape[0])

    def query_radius(self, centers: np.ndarray, radius: float) -> np.ndarray:
        """Indices of map points within ``radius`` of any center, sorted, unique."""
        centers = np.asarray(centers, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[1] != 3:
            raise ShapeError(f"centers must be (n, 3), got {centers.shape}")
        if not np.isfinite(radius) or radius <= 0:
            raise DataError(f"radius must be positive and finite, got {radius}")
        if centers.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        # per-ball ordering is irrelevant here, the union is deduplicated
        # through a flat mask anyway
        hits = self._tree.query_ball_point(centers, r=radius,
                                           return_sorted=False)
        if not any(len(h) for h in hits):
            return np.empty(0, dtype=np.int64)
        flat = np.concatenate([np.asarray(h, dtype=np.intp) for h in hits])
        mask = np.zeros(self.size, dtype=bool)
        mask[flat] = True
        return np.flatnonzero(mask).astype(np.int64)


def radius_retrieve(index: SpatialIndex, generated: GeneratedPointSet,
                    radius: float, voxel_size: float) -> Submap:
    """Select the submap of map points near the generated structure.

    Generated points are voxel-downsampled first so the number of radius
    queries stays bounded; the union of all within-radius map points is
    returned with duplicates removed and ids in increasing order. An empty
    submap is a valid outcome.
    """
    centers = voxel_downsample(generated.points, voxel_size)
    idx = index.query_radius(centers, radius)
    bundle = index._bundle
    ids = bundle.point_ids[idx]
    order = np.argsort(ids, kind="stable")
    idx = idx[order]
    return Submap(point_ids=bundle.point_ids[idx].copy(),
                  positions=bundle.positions[idx].copy(),
                  descriptors=bundle.descriptors[idx].copy())
