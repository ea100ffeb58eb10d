"""Pose-error, retrieval, storage, and timing metrics plus report assembly.

Medians are taken over all queries with failures counted as infinite error;
recall thresholds treat failures as misses. Retrieval quality compares the
retrieved submap against the ground-truth visible set of a query (available
for synthetic scenes).
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError
from .geometry import Pose, rotation_angle_deg
from .localize import PoseEstimate
from .scene import SceneBundle

DEFAULT_THRESHOLDS = ((0.25, 2.0), (0.5, 5.0), (5.0, 10.0))


def pose_errors(est: Pose, gt: Pose) -> tuple[float, float]:
    """(centre distance in metres, rotation angle in degrees)."""
    t_err = float(np.linalg.norm(est.center - gt.center))
    r_err = rotation_angle_deg(est.rotation, gt.rotation)
    return t_err, r_err


def recall_at_thresholds(t_errors, r_errors, successes,
                         thresholds=DEFAULT_THRESHOLDS) -> tuple[float, ...]:
    """Fraction of queries within each (metres, degrees) threshold pair.

    A query counts only when it succeeded and both errors are within bounds.
    """
    t = np.asarray(t_errors, dtype=np.float64)
    r = np.asarray(r_errors, dtype=np.float64)
    ok = np.asarray(successes, dtype=bool)
    if t.shape[0] == 0:
        raise UndefinedMetricError("recall over an empty query set is undefined")
    if t.shape != r.shape or t.shape != ok.shape:
        raise UndefinedMetricError("error and success arrays must align")
    out = []
    for t_thr, r_thr in thresholds:
        hit = ok & (t <= t_thr) & (r <= r_thr)
        out.append(float(np.count_nonzero(hit)) / t.shape[0])
    return tuple(out)


def retrieval_metrics(submap_ids: np.ndarray, visible_ids: np.ndarray,
                      map_size: int) -> tuple[float, float, float]:
    """(recall, precision, reduction ratio) of one retrieved submap.

    recall = |submap ∩ visible| / |visible|; precision = same numerator over
    |submap| (0 when the submap is empty); reduction = |submap| / map size.
    """
    visible = np.unique(np.asarray(visible_ids, dtype=np.uint64))
    submap = np.unique(np.asarray(submap_ids, dtype=np.uint64))
    if visible.shape[0] == 0:
        raise UndefinedMetricError("retrieval metrics need a non-empty visible set")
    if map_size <= 0:
        raise UndefinedMetricError("map_size must be positive")
    hits = np.intersect1d(submap, visible, assume_unique=True).shape[0]
    recall = hits / visible.shape[0]
    precision = hits / submap.shape[0] if submap.shape[0] else 0.0
    reduction = submap.shape[0] / map_size
    return float(recall), float(precision), float(reduction)


@dataclass(frozen=True)
class StorageReport:
    """On-disk footprint of the artifacts involved in localisation."""

    checkpoint_bytes: int
    bundle_bytes: int
    point_bytes: int  # id + position + descriptor storage inside the bundle
    image_bytes: int  # embedding + pose + visibility storage inside the bundle

    def lines(self):
        return [
            f"checkpoint        {self.checkpoint_bytes:>12d} B",
            f"bundle file       {self.bundle_bytes:>12d} B",
            f"  map points      {self.point_bytes:>12d} B",
            f"  mapping images  {self.image_bytes:>12d} B",
        ]


def storage_report(checkpoint_path: str, bundle_path: str,
                   bundle: SceneBundle) -> StorageReport:
    """Byte sizes of the checkpoint and bundle, with a per-section breakdown."""
    n, d_f = bundle.descriptors.shape
    m, d_e = bundle.embeddings.shape
    point_bytes = n * (8 + 3 * 8 + d_f * 4)
    image_bytes = sum(8 + d_e * 4 + 4 * 8 + 3 * 8 + 4 + 8 + 8 * v.shape[0]
                      for v in bundle.visible)
    return StorageReport(checkpoint_bytes=os.path.getsize(checkpoint_path),
                         bundle_bytes=os.path.getsize(bundle_path),
                         point_bytes=point_bytes, image_bytes=image_bytes)


def write_baseline_database(path: str, bundle: SceneBundle) -> None:
    """Text database an image-retrieval baseline would keep: one record per
    mapping image (id, embedding, pose). Its size grows linearly with the
    number of mapping images, unlike the fixed-size generator checkpoint."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# baseline-db 1\n")
        for k in range(bundle.embeddings.shape[0]):
            emb = " ".join(repr(float(x)) for x in bundle.embeddings[k])
            q = " ".join(repr(float(x)) for x in bundle.quats[k])
            t = " ".join(repr(float(x)) for x in bundle.trans[k])
            fh.write(f"image {int(bundle.image_ids[k])} {q} {t} {emb}\n")


STAGE_NAMES = ("generate", "retrieve", "match", "pose")


def timing_report(estimates: list[PoseEstimate]) -> dict:
    """Mean per-stage and total wall-clock times in microseconds."""
    if not estimates:
        raise UndefinedMetricError("timing report needs at least one estimate")
    stages = {
        "generate": np.mean([e.timings.generate_us for e in estimates]),
        "retrieve": np.mean([e.timings.retrieve_us for e in estimates]),
        "match": np.mean([e.timings.match_us for e in estimates]),
        "pose": np.mean([e.timings.pose_us for e in estimates]),
    }
    stages["total"] = float(sum(stages.values()))
    return {k: float(v) for k, v in stages.items()}


def render_timing_table(timings: dict) -> str:
    """Fixed-width table of stage means in milliseconds."""
    rows = [("stage", "mean ms")]
    for name in STAGE_NAMES + ("total",):
        rows.append((name, f"{timings[name] / 1e3:.3f}"))
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{a:<{width}}  {b:>10}" for a, b in rows)


@dataclass(frozen=True)
class QueryRecord:
    """Evaluation outcome of a single query."""

    query_id: int
    success: bool
    t_err: float  # metres; inf for failed queries
    r_err: float  # degrees; inf for failed queries
    submap_size: int
    num_inliers: int
    num_matches: int
    retrieval_recall: float
    retrieval_precision: float
    reduction: float
    timings_us: dict

    def to_json(self) -> str:
        payload = {
            "query_id": self.query_id,
            "success": self.success,
            "t_err_m": None if math.isinf(self.t_err) else self.t_err,
            "r_err_deg": None if math.isinf(self.r_err) else self.r_err,
            "submap_size": self.submap_size,
            "num_inliers": self.num_inliers,
            "num_matches": self.num_matches,
            "retrieval_recall": self.retrieval_recall,
            "retrieval_precision": self.retrieval_precision,
            "reduction": self.reduction,
        }
        return json.dumps(payload, sort_keys=True)


@dataclass(frozen=True)
class EvalReport:
    """Aggregate evaluation over a query set."""

    records: tuple
    median_t_err: float
    median_r_err: float
    recalls: tuple
    thresholds: tuple
    mean_retrieval_recall: float
    mean_retrieval_precision: float
    mean_reduction: float
    timings: dict

    def render(self) -> str:
        n_ok = sum(1 for r in self.records if r.success)
        lines = [
            f"queries             {len(self.records)}",
            f"successful          {n_ok}",
            f"median t error      {_fmt_err(self.median_t_err, 'm')}",
            f"median R error      {_fmt_err(self.median_r_err, 'deg')}",
        ]
        for (t_thr, r_thr), rec in zip(self.thresholds, self.recalls):
            lines.append(f"recall @ ({t_thr} m, {r_thr} deg)"
                         f"{'':<4}{rec:.3f}")
        lines += [
            f"retrieval recall    {self.mean_retrieval_recall:.3f}",
            f"retrieval precision {self.mean_retrieval_precision:.3f}",
            f"reduction ratio     {self.mean_reduction:.3f}",
            "",
            render_timing_table(self.timings),
        ]
        return "\n".join(lines)


def _fmt_err(x: float, unit: str) -> str:
    return "inf" if math.isinf(x) else f"{x:.4f} {unit}"


def build_eval_report(estimates: list[PoseEstimate], gt_poses: dict,
                      query_visible: dict, map_size: int,
                      thresholds=DEFAULT_THRESHOLDS) -> EvalReport:
    """Join pose estimates with ground truth into a full report.

    ``gt_poses`` maps query id to ground-truth Pose; ``query_visible`` maps
    query id to the truly visible point ids (may be empty for real scenes, in
    which case retrieval quality is reported as NaN).
    """
    if not estimates:
        raise UndefinedMetricError("evaluation needs at least one query")
    records = []
    t_errs, r_errs, oks = [], [], []
    for est in sorted(estimates, key=lambda e: e.query_id):
        gt = gt_poses.get(est.query_id)
        if gt is None:
            raise UndefinedMetricError(
                f"query {est.query_id} has no ground-truth pose")
        if est.success:
            t_err, r_err = pose_errors(est.pose, gt)
        else:
            t_err, r_err = math.inf, math.inf
        vis = query_visible.get(est.query_id)
        if vis is not None and len(vis) > 0:
            recall, precision, reduction = retrieval_metrics(
                est.retrieved_ids, vis, map_size)
        else:
            recall = precision = reduction = math.nan
        records.append(QueryRecord(
            query_id=est.query_id, success=est.success, t_err=t_err,
            r_err=r_err, submap_size=est.submap_size,
            num_inliers=est.num_inliers, num_matches=est.num_matches,
            retrieval_recall=recall, retrieval_precision=precision,
            reduction=reduction,
            timings_us={
                "generate": est.timings.generate_us,
                "retrieve": est.timings.retrieve_us,
                "match": est.timings.match_us,
                "pose": est.timings.pose_us,
            }))
        t_errs.append(t_err)
        r_errs.append(r_err)
        oks.append(est.success)

    recalls = recall_at_thresholds(t_errs, r_errs, oks, thresholds)
    rec_vals = [r.retrieval_recall for r in records
                if not math.isnan(r.retrieval_recall)]
    prec_vals = [r.retrieval_precision for r in records
                 if not math.isnan(r.retrieval_precision)]
    red_vals = [r.reduction for r in records if not math.isnan(r.reduction)]
    return EvalReport(
        records=tuple(records),
        median_t_err=float(np.median(t_errs)),
        median_r_err=float(np.median(r_errs)),
        recalls=recalls,
        thresholds=tuple(thresholds),
        mean_retrieval_recall=float(np.mean(rec_vals)) if rec_vals else math.nan,
        mean_retrieval_precision=float(np.mean(prec_vals)) if prec_vals else math.nan,
        mean_reduction=float(np.mean(red_vals)) if red_vals else math.nan,
        timings=timing_report(estimates))


def write_error_cdf(path: str, t_errors) -> None:
    """Two-column text file: sorted translation error vs cumulative fraction."""
    t = np.sort(np.asarray(t_errors, dtype=np.float64))
    n = t.shape[0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# t_err_m cumulative_fraction\n")
        for i, val in enumerate(t):
            frac = (i + 1) / n
            fh.write(f"{'inf' if math.isinf(val) else repr(float(val))} {frac}\n")
