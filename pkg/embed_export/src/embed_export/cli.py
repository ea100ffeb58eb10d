"""Command-line entry point: embed-export <manifest> [overrides]."""

import argparse
import dataclasses
import logging
import os
import sys

from .errors import ExportToolError, ManifestError

LOG_LEVELS = ("debug", "info", "warning", "error")


def _setup_logging() -> None:
    name = os.environ.get("EMBED_EXPORT_LOG", "warning").lower()
    if name not in LOG_LEVELS:
        print(f"error: EMBED_EXPORT_LOG must be one of {', '.join(LOG_LEVELS)}, "
              f"got '{name}'", file=sys.stderr)
        raise SystemExit(2)
    logging.basicConfig(level=getattr(logging, name.upper()),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Run a vision-transformer backbone over the images "
                    "listed in a manifest and write their class-token "
                    "embeddings as a vstr-embeddings text file.")
    parser.add_argument("manifest", help="export manifest file")
    parser.add_argument("--output", default=None,
                        help="override the manifest output path")
    parser.add_argument("--weights", default=None,
                        help="override the manifest weights path")
    parser.add_argument("--random-init", action="store_true",
                        help="use seeded random backbone weights instead of "
                             "a weights file (pipeline testing)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for --random-init (default 0)")
    parser.add_argument("--batch-size", type=int, default=8,
                        help="images per forward pass (default 8); record "
                             "order is unaffected")
    parser.add_argument("--threads", type=int, default=None,
                        help="CPU threads for inference (default: library "
                             "default); fix for reproducible outputs")
    return parser


def run(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.random_init and args.weights:
        raise ManifestError("--random-init and --weights are mutually exclusive")

    import torch

    if args.threads is not None:
        if args.threads < 1:
            raise ManifestError(f"--threads must be >= 1, got {args.threads}")
        torch.set_num_threads(args.threads)

    from .export import export_embeddings
    from .manifest import load_manifest

    manifest = load_manifest(args.manifest)
    overrides = {}
    if args.output is not None:
        overrides["output"] = os.path.abspath(args.output)
    if args.weights is not None:
        overrides["weights"] = os.path.abspath(args.weights)
    if args.random_init:
        overrides["weights"] = ""
    if overrides:
        manifest = dataclasses.replace(manifest, **overrides)

    result = export_embeddings(
        manifest,
        batch_size=args.batch_size,
        random_init_seed=args.seed if args.random_init else None)
    print(f"exported {len(result.written_ids)} embeddings "
          f"({len(result.skipped)} skipped) -> {result.output}")
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except ExportToolError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
