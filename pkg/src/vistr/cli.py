"""Command-line entry point: one executable for the whole workflow.

Subcommands: ``import`` (text exchange to binary bundle), ``gen-scene``
(synthetic scene with ground truth), ``train`` (fit the generator),
``retrieve`` (inspect one query's submap), ``localize`` (pose records for a
query set), ``eval`` (metrics report from pose records), ``bench`` (stage
timing table).

Argument parsing happens before numpy is imported anywhere, so the
``--threads`` flag can pin the BLAS thread pools; this is what makes runs
reproducible for a fixed parallelism degree. The ``VISTR_LOG`` environment
variable (error|warn|info|debug) sets log verbosity on stderr.

All deterministic outputs (bundles, checkpoints, pose records, reports) are
byte-stable for a fixed seed and thread count. Measured wall-clock timings
are inherently run-dependent, so they are emitted only to stdout or to
explicitly requested timing sidecars, never into the deterministic files.
"""

import argparse
import json
import logging
import os
import sys

log = logging.getLogger("vistr")

_THREAD_ENV = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
               "NUMEXPR_NUM_THREADS")


def _setup_logging():
    level_name = os.environ.get("VISTR_LOG", "info").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        print(f"error: config: VISTR_LOG must be one of {sorted(levels)}, "
              f"got {level_name!r}", file=sys.stderr)
        raise SystemExit(2)
    logging.basicConfig(stream=sys.stderr, level=levels[level_name],
                        format="%(levelname)s %(name)s: %(message)s")


def _apply_threads(n: int):
    for var in _THREAD_ENV:
        os.environ[var] = str(n)


# ---------------------------------------------------------------------------
# run-config file handling

TRAIN_KEYS = ("iterations", "batch_images", "points_per_image", "mc_samples",
              "max_lr", "latent_dim", "hidden_width", "n_hidden", "lift_dim",
              "warmup_frac", "div_factor", "final_div", "kl_warmup_start",
              "kl_period", "kl_beta_before_warmup", "emb_noise_var",
              "sigma_init", "seed", "log_every")
RETRIEVAL_KEYS = ("n_samples", "radius", "voxel_size", "seed")
RANSAC_KEYS = ("threshold_px", "max_iterations", "confidence", "min_matches",
               "seed")
SCENE_KEYS = ("n_points", "n_cameras", "query_stride", "extent",
              "embedding_dim", "descriptor_dim", "descriptor_noise",
              "embedding_noise", "keypoint_noise_px", "fov_deg", "image_size",
              "dropout", "pose_jitter", "seed")
_SECTION_KEYS = {"train": TRAIN_KEYS, "retrieval": RETRIEVAL_KEYS,
                 "ransac": RANSAC_KEYS, "scene": SCENE_KEYS}


def load_run_config(path: str | None) -> dict:
    """Parse the JSON run-config file and reject unknown sections or keys."""
    from .errors import ConfigError, FileMissingError

    if path is None:
        return {}
    if not os.path.exists(path):
        raise FileMissingError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    for section, content in raw.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(content, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key in content:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section {section!r}")
    return raw


def _merge(section: dict, flags: dict, keys) -> dict:
    """flag > file > dataclass default; flags use None for 'not given'."""
    out = dict(section)
    for key in keys:
        if flags.get(key) is not None:
            out[key] = flags[key]
    return out


def _build_train_config(args) -> "TrainConfig":
    from .vae import TrainConfig

    cfg = load_run_config(args.config).get("train", {})
    flags = {k: getattr(args, k, None) for k in TRAIN_KEYS}
    return TrainConfig(**_merge(cfg, flags, TRAIN_KEYS))


def _build_retrieval_config(args) -> "RetrievalConfig":
    from .localize import RetrievalConfig

    cfg = load_run_config(args.config).get("retrieval", {})
    flags = {"n_samples": getattr(args, "samples", None),
             "radius": getattr(args, "radius", None),
             "voxel_size": getattr(args, "voxel", None),
             "seed": getattr(args, "retrieval_seed", None)}
    return RetrievalConfig(**_merge(cfg, flags, RETRIEVAL_KEYS))


def _build_ransac_config(args) -> "RansacConfig":
    from .pnp import RansacConfig

    cfg = load_run_config(args.config).get("ransac", {})
    flags = {"threshold_px": getattr(args, "threshold", None),
             "max_iterations": getattr(args, "ransac_iterations", None),
             "confidence": getattr(args, "confidence", None),
             "min_matches": getattr(args, "min_matches", None),
             "seed": getattr(args, "ransac_seed", None)}
    return RansacConfig(**_merge(cfg, flags, RANSAC_KEYS))


def _build_scene_config(args) -> "SyntheticSceneConfig":
    from .synthetic import SyntheticSceneConfig

    cfg = load_run_config(args.config).get("scene", {})
    flags = {"n_points": args.points, "n_cameras": args.cameras,
             "query_stride": args.query_stride, "extent": args.extent,
             "embedding_dim": args.embedding_dim,
             "descriptor_dim": args.descriptor_dim,
             "descriptor_noise": args.descriptor_noise,
             "embedding_noise": args.embedding_noise,
             "keypoint_noise_px": args.keypoint_noise,
             "fov_deg": args.fov, "image_size": args.image_size,
             "dropout": args.dropout, "pose_jitter": args.pose_jitter,
             "seed": args.seed}
    return SyntheticSceneConfig(**_merge(cfg, flags, SCENE_KEYS))


# ---------------------------------------------------------------------------
# deterministic record files

POSES_HEADER = "# vistr-poses 1"
TIMINGS_HEADER = "# vistr-timings 1"
VISIBILITY_HEADER = "# vistr-visibility 1"


def write_pose_records(path: str, estimates) -> None:
    """Pose records, one block per query, no timing fields (deterministic)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(POSES_HEADER + "\n")
        for est in estimates:
            q = est.pose.quat
            t = est.pose.trans
            reason = est.failure_reason.replace(" ", "_") if est.failure_reason else "-"
            fh.write("pose {} {} {} {} {} {} {} {} {} {} {} {} {} {}\n".format(
                est.query_id, int(est.success),
                repr(float(q[0])), repr(float(q[1])),
                repr(float(q[2])), repr(float(q[3])),
                repr(float(t[0])), repr(float(t[1])), repr(float(t[2])),
                est.num_inliers, est.num_matches, est.submap_size,
                est.num_iterations, reason))
            ids = " ".join(str(int(i)) for i in est.retrieved_ids)
            fh.write(f"retrieved {est.query_id} {est.retrieved_ids.shape[0]}"
                     + (" " + ids if ids else "") + "\n")


def read_pose_records(path: str):
    """Parse pose records into (records list, retrieved-ids dict)."""
    import numpy as np

    from .errors import FileMissingError, FormatError
    from .geometry import Pose

    if not os.path.exists(path):
        raise FileMissingError(f"pose records not found: {path}")
    records = []
    retrieved = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != POSES_HEADER:
            raise FormatError(f"bad pose-record header: {header!r}")
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "pose":
                if len(parts) != 15:
                    raise FormatError(f"malformed pose record: {line.strip()!r}")
                records.append({
                    "query_id": int(parts[1]),
                    "success": parts[2] == "1",
                    "pose": Pose(quat=np.array([float(x) for x in parts[3:7]]),
                                 trans=np.array([float(x) for x in parts[7:10]])),
                    "num_inliers": int(parts[10]),
                    "num_matches": int(parts[11]),
                    "submap_size": int(parts[12]),
                    "num_iterations": int(parts[13]),
                    "failure_reason": "" if parts[14] == "-" else parts[14],
                })
            elif parts[0] == "retrieved":
                count = int(parts[2])
                ids = np.array([int(x) for x in parts[3:]], dtype=np.uint64)
                if ids.shape[0] != count:
                    raise FormatError(f"retrieved-id count mismatch for query {parts[1]}")
                retrieved[int(parts[1])] = ids
            else:
                raise FormatError(f"unknown pose-record line type {parts[0]!r}")
    return records, retrieved


def write_timing_records(path: str, estimates) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TIMINGS_HEADER + "\n")
        for est in estimates:
            t = est.timings
            fh.write(f"timing {est.query_id} {repr(float(t.generate_us))} "
                     f"{repr(float(t.retrieve_us))} {repr(float(t.match_us))} "
                     f"{repr(float(t.pose_us))}\n")


def write_visibility(path: str, query_visible: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(VISIBILITY_HEADER + "\n")
        for qid in sorted(query_visible):
            ids = query_visible[qid]
            fh.write(f"visible {qid} {len(ids)} "
                     + " ".join(str(int(i)) for i in ids) + "\n")


def read_visibility(path: str) -> dict:
    import numpy as np

    from .errors import FileMissingError, FormatError

    if not os.path.exists(path):
        raise FileMissingError(f"visibility file not found: {path}")
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != VISIBILITY_HEADER:
            raise FormatError(f"bad visibility header: {header!r}")
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] != "visible":
                raise FormatError(f"unknown visibility line type {parts[0]!r}")
            count = int(parts[2])
            ids = np.array([int(x) for x in parts[3:]], dtype=np.uint64)
            if ids.shape[0] != count:
                raise FormatError(f"visibility count mismatch for query {parts[1]}")
            out[int(parts[1])] = ids
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_import(args) -> int:
    from .bundle_io import load_text_scene, save_scene_bundle

    bundle = load_text_scene(args.input, embeddings_path=args.embeddings)
    save_scene_bundle(bundle, args.out)
    log.info("imported %d points, %d images -> %s",
             bundle.positions.shape[0], bundle.embeddings.shape[0], args.out)
    print(f"imported {bundle.positions.shape[0]} points, "
          f"{bundle.embeddings.shape[0]} images -> {args.out}")
    return 0


def cmd_gen_scene(args) -> int:
    from .bundle_io import QuerySet, save_queries, save_scene_bundle
    from .synthetic import generate_synthetic_scene

    cfg = _build_scene_config(args)
    scene = generate_synthetic_scene(cfg)
    save_scene_bundle(scene.bundle, args.out_bundle)
    save_queries(QuerySet(queries=tuple(scene.queries),
                          intrinsics=scene.bundle.intrinsics,
                          embedding_dim=scene.bundle.embeddings.shape[1],
                          descriptor_dim=scene.bundle.descriptors.shape[1]),
                 args.out_queries)
    if args.out_visibility:
        write_visibility(args.out_visibility, scene.query_visible)
    print(f"scene: {scene.bundle.positions.shape[0]} points, "
          f"{scene.bundle.embeddings.shape[0]} mapping images, "
          f"{len(scene.queries)} queries")
    return 0


def cmd_train(args) -> int:
    from .bundle_io import load_scene_bundle
    from .vae import train

    bundle = load_scene_bundle(args.bundle)
    cfg = _build_train_config(args)
    log.info("training on %d images for %d iterations",
             bundle.embeddings.shape[0], cfg.iterations)
    model, records = train(bundle, cfg, checkpoint_path=args.out,
                           log_path=args.log)
    last = records[-1]
    print(f"trained {cfg.iterations} iterations; final loss {last.loss:.6f} "
          f"(recon {last.recon:.6f}, kl {last.kl:.6f}) -> {args.out}")
    return 0


def cmd_retrieve(args) -> int:
    import numpy as np

    from .bundle_io import load_queries, load_scene_bundle
    from .metrics import retrieval_metrics
    from .retrieval import SpatialIndex, radius_retrieve, sample_structure
    from .vae import load_model

    bundle = load_scene_bundle(args.bundle)
    model = load_model(args.model)
    queries = load_queries(args.queries)
    retrieval = _build_retrieval_config(args)
    wanted = [q for q in queries.queries if q.image_id == args.query_id]
    if not wanted:
        from .errors import IntegrityError
        raise IntegrityError(f"query id {args.query_id} not in {args.queries}")
    query = wanted[0]

    generated = sample_structure(model, query.embedding.astype(np.float64),
                                 retrieval.n_samples, retrieval.seed)
    index = SpatialIndex(bundle)
    submap = radius_retrieve(index, generated, retrieval.radius,
                             retrieval.voxel_size)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# vistr-submap 1 query {query.image_id} size {submap.size}\n")
        for pid, pos in zip(submap.point_ids, submap.positions):
            fh.write(f"point {int(pid)} {repr(pos[0])} {repr(pos[1])} "
                     f"{repr(pos[2])}\n")
    print(f"query {query.image_id}: submap {submap.size} of "
          f"{bundle.positions.shape[0]} points "
          f"(samples={retrieval.n_samples}, radius={retrieval.radius})")
    if args.visibility:
        vis = read_visibility(args.visibility).get(args.query_id)
        if vis is not None and len(vis):
            rec, prec, red = retrieval_metrics(submap.point_ids, vis,
                                               bundle.positions.shape[0])
            print(f"recall {rec:.4f} precision {prec:.4f} reduction {red:.4f}")
    return 0


def _run_localisation(args):
    """Shared by localize/bench: load artifacts, localise every query."""
    import numpy as np

    from .bundle_io import load_queries, load_scene_bundle
    from .localize import localize
    from .retrieval import SpatialIndex
    from .vae import load_model

    bundle = load_scene_bundle(args.bundle)
    model = load_model(args.model)
    queries = load_queries(args.queries)
    retrieval = _build_retrieval_config(args)
    ransac = _build_ransac_config(args)
    index = SpatialIndex(bundle)
    estimates = []
    for query in queries.queries:
        intr = queries.intrinsics[query.intrinsics_id]
        est = localize(model, bundle, index, query, intr,
                       retrieval=retrieval, ransac=ransac)
        log.debug("query %d: success=%s inliers=%d submap=%d",
                  est.query_id, est.success, est.num_inliers, est.submap_size)
        estimates.append(est)
    return bundle, queries, estimates


def cmd_localize(args) -> int:
    from .metrics import render_timing_table, timing_report

    bundle, queries, estimates = _run_localisation(args)
    write_pose_records(args.out, estimates)
    if args.timings_out:
        write_timing_records(args.timings_out, estimates)
    n_ok = sum(1 for e in estimates if e.success)
    print(f"localised {n_ok}/{len(estimates)} queries -> {args.out}")
    print(render_timing_table(timing_report(estimates)))
    return 0


def cmd_eval(args) -> int:
    import math

    import numpy as np

    from .bundle_io import load_queries, load_scene_bundle
    from .errors import DataError
    from .localize import PoseEstimate, StageTimings
    from .metrics import build_eval_report, write_error_cdf

    records, retrieved = read_pose_records(args.records)
    queries = load_queries(args.queries)
    bundle = load_scene_bundle(args.bundle)
    gt_poses = {q.image_id: q.gt_pose for q in queries.queries
                if q.gt_pose is not None}
    if not gt_poses:
        raise DataError("query set has no ground-truth poses to evaluate against")
    visibility = read_visibility(args.visibility) if args.visibility else {}

    timings = {}
    if args.timings:
        with open(args.timings, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != TIMINGS_HEADER:
                from .errors import FormatError
                raise FormatError(f"bad timings header: {header!r}")
            for line in fh:
                parts = line.split()
                if parts and parts[0] == "timing":
                    timings[int(parts[1])] = [float(x) for x in parts[2:6]]

    estimates = []
    for rec in records:
        t = timings.get(rec["query_id"], [0.0, 0.0, 0.0, 0.0])
        estimates.append(PoseEstimate(
            query_id=rec["query_id"], success=rec["success"], pose=rec["pose"],
            num_inliers=rec["num_inliers"], num_matches=rec["num_matches"],
            submap_size=rec["submap_size"],
            num_iterations=rec["num_iterations"],
            timings=StageTimings(*t),
            failure_reason=rec["failure_reason"],
            retrieved_ids=retrieved.get(rec["query_id"],
                                        np.empty(0, np.uint64))))
    report = build_eval_report(estimates, gt_poses, visibility,
                               map_size=bundle.positions.shape[0])
    text = report.render()
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.jsonl_out:
        with open(args.jsonl_out, "w", encoding="utf-8") as fh:
            for record in report.records:
                fh.write(record.to_json() + "\n")
    if args.cdf_out:
        write_error_cdf(args.cdf_out, [r.t_err for r in report.records])
    print(text)
    return 0


def cmd_bench(args) -> int:
    from .metrics import render_timing_table, storage_report, timing_report

    bundle, queries, estimates = _run_localisation(args)
    repeats = max(0, args.repeat - 1)
    for _ in range(repeats):
        _, _, more = _run_localisation(args)
        estimates.extend(more)
    timings = timing_report(estimates)
    print(render_timing_table(timings))
    if args.model and args.bundle:
        rep = storage_report(args.model, args.bundle, bundle)
        print()
        for line in rep.lines():
            print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(render_timing_table(timings) + "\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flag(p):
    p.add_argument("--config", default=None, help="JSON run-config file; "
                   "flags override file values, file overrides defaults")


def _add_retrieval_flags(p):
    p.add_argument("--samples", type=int, default=None,
                   help="generated structure samples per query (default 1000)")
    p.add_argument("--radius", type=float, default=None,
                   help="submap radius in metres (default 5.0)")
    p.add_argument("--voxel", type=float, default=None,
                   help="voxel size for downsampling generated points (default 1.0)")
    p.add_argument("--retrieval-seed", type=int, default=None,
                   help="seed for prior sampling (default 0)")


def _add_ransac_flags(p):
    p.add_argument("--threshold", type=float, default=None,
                   help="inlier reprojection threshold in pixels (default 12)")
    p.add_argument("--ransac-iterations", type=int, default=None,
                   help="maximum hypothesis count (default 10000)")
    p.add_argument("--confidence", type=float, default=None,
                   help="stopping confidence (default 0.9999)")
    p.add_argument("--min-matches", type=int, default=None,
                   help="minimum correspondences/inliers for success (default 12)")
    p.add_argument("--ransac-seed", type=int, default=None,
                   help="seed for hypothesis sampling (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vistr",
        description="Scene-specific structure generation for visual relocalisation")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS/OpenMP thread count (default: all cores); "
                        "outputs are reproducible per fixed thread count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", help="convert a text exchange scene to a binary bundle")
    p.add_argument("--input", required=True, help="text exchange file")
    p.add_argument("--out", required=True, help="output bundle path")
    p.add_argument("--embeddings", default=None,
                   help="embedding sidecar for '@' references in the input")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("gen-scene", help="generate a synthetic scene with ground truth")
    _add_config_flag(p)
    p.add_argument("--out-bundle", required=True)
    p.add_argument("--out-queries", required=True)
    p.add_argument("--out-visibility", default=None,
                   help="ground-truth visible point ids per query")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--cameras", type=int, default=None)
    p.add_argument("--query-stride", type=int, default=None)
    p.add_argument("--extent", type=float, default=None)
    p.add_argument("--embedding-dim", type=int, default=None)
    p.add_argument("--descriptor-dim", type=int, default=None)
    p.add_argument("--descriptor-noise", type=float, default=None)
    p.add_argument("--embedding-noise", type=float, default=None)
    p.add_argument("--keypoint-noise", type=float, default=None)
    p.add_argument("--fov", type=float, default=None)
    p.add_argument("--image-size", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--pose-jitter", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("train", help="train the structure generator on a bundle")
    _add_config_flag(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log", default=None, help="training-log output path")
    for key in TRAIN_KEYS:
        p.add_argument("--" + key.replace("_", "-"), dest=key,
                       type=float if key in ("max_lr", "warmup_frac",
                                             "div_factor", "final_div",
                                             "emb_noise_var", "sigma_init",
                                             "kl_beta_before_warmup")
                       else int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("retrieve", help="dump the retrieved submap for one query")
    _add_config_flag(p)
    p.add_argument("--model", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--query-id", type=int, required=True)
    p.add_argument("--out", required=True, help="submap dump path")
    p.add_argument("--visibility", default=None,
                   help="ground-truth visibility file for metrics")
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("localize", help="estimate poses for a query set")
    _add_config_flag(p)
    p.add_argument("--model", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True, help="pose-record output path")
    p.add_argument("--timings-out", default=None,
                   help="per-query stage timings (measured, run-dependent)")
    _add_retrieval_flags(p)
    _add_ransac_flags(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("eval", help="metrics report from pose records")
    p.add_argument("--records", required=True, help="pose records from localize")
    p.add_argument("--queries", required=True, help="query set with ground truth")
    p.add_argument("--bundle", required=True)
    p.add_argument("--visibility", default=None)
    p.add_argument("--timings", default=None,
                   help="timing sidecar from localize --timings-out")
    p.add_argument("--report-out", default=None)
    p.add_argument("--jsonl-out", default=None)
    p.add_argument("--cdf-out", default=None,
                   help="two-column translation-error CDF output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="stage timing table over a query set")
    _add_config_flag(p)
    p.add_argument("--model", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--repeat", type=int, default=1,
                   help="number of passes over the query set")
    p.add_argument("--out", default=None, help="timing table output path")
    _add_retrieval_flags(p)
    _add_ransac_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads else os.cpu_count() or 1
    _apply_threads(threads)
    _setup_logging()

    from .errors import VistrError

    try:
        return args.func(args)
    except VistrError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: FileMissingError: {exc}", file=sys.stderr)
        return 10
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
