"""2D-3D correspondence search between query descriptors and a submap.

Distances are squared Euclidean over descriptor vectors, computed in float64
via the expansion ||q||^2 + ||s||^2 - 2 q.s so the full distance matrix is a
single matmul.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoSubmapError, ShapeError
from .retrieval import Submap


@dataclass(frozen=True)
class MatchResult:
    """Accepted correspondences between query keypoints and submap points."""

    keypoint_indices: np.ndarray  # (m,) int64 rows into the query keypoints
    submap_indices: np.ndarray  # (m,) int64 rows into the submap
    distances: np.ndarray  # (m,) float64 squared descriptor distances

    @property
    def count(self) -> int:
        return int(self.keypoint_indices.shape[0])


def descriptor_distances(query_desc: np.ndarray, submap_desc: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance matrix, shape (n_query, n_submap)."""
    q = np.asarray(query_desc, dtype=np.float64)
    s = np.asarray(submap_desc, dtype=np.float64)
    if q.ndim != 2 or s.ndim != 2:
        raise ShapeError("descriptor arrays must be 2-D")
    if q.shape[1] != s.shape[1]:
        raise ShapeError(
            f"descriptor widths differ: query {q.shape[1]} vs submap {s.shape[1]}")
    d2 = (np.sum(q * q, axis=1)[:, None] + np.sum(s * s, axis=1)[None, :]
          - 2.0 * (q @ s.T))
    return np.maximum(d2, 0.0)


def match_descriptors(query_desc: np.ndarray, submap: Submap,
                      strategy: str = "mutual", ratio: float = 0.9) -> MatchResult:
    """Match query descriptors against a submap.

    ``mutual`` keeps pairs (i, j) where j is the nearest submap point to
    keypoint i and i is the nearest keypoint to submap point j. ``ratio``
    keeps keypoint i's nearest neighbour j when the nearest distance is below
    ``ratio`` times the second-nearest distance (Euclidean, not squared).
    Results are ordered by keypoint index.
    """
    if submap.size == 0:
        raise NoSubmapError("cannot match against an empty submap")
    if strategy not in ("mutual", "ratio"):
        raise ValueError(f"unknown matching strategy {strategy!r}")
    d2 = descriptor_distances(query_desc, submap.descriptors)
    n_q = d2.shape[0]
    if n_q == 0:
        empty = np.empty(0, dtype=np.int64)
        return MatchResult(empty, empty, np.empty(0))

    nearest = np.argmin(d2, axis=1)
    if strategy == "mutual":
        back = np.argmin(d2, axis=0)
        keep = back[nearest] == np.arange(n_q)
    else:
        if submap.size < 2:
            keep = np.ones(n_q, dtype=bool)
        else:
            part = np.partition(d2, 1, axis=1)
            best = np.sqrt(part[:, 0])
            second = np.sqrt(part[:, 1])
            keep = best < ratio * second
    rows = np.nonzero(keep)[0].astype(np.int64)
    cols = nearest[rows].astype(np.int64)
    return MatchResult(keypoint_indices=rows, submap_indices=cols,
                       distances=d2[rows, cols])
