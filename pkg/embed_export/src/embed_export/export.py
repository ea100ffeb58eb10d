"""Run a backbone over manifest images and write the embeddings text file.

The output is the ``vstr-embeddings`` text exchange format: a version
header followed by one ``embedding <id> <dim values>`` record per image,
in manifest order.  Vectors are written raw (no normalisation); consumers
decide how to scale them.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .backbones import build_backbone, default_preprocess, make_preprocessor
from .errors import ExportError
from .manifest import ExportManifest

log = logging.getLogger("embed_export")

OUTPUT_HEADER = "vstr-embeddings"
OUTPUT_VERSION = 1


@dataclass(frozen=True)
class ExportResult:
    output: str
    written_ids: tuple
    skipped: tuple  # of (id, path, reason)


def _load_images(entries, preprocessor):
    """Read and preprocess a chunk; unreadable files are skipped with a warning."""
    from PIL import Image

    tensors, kept, skipped = [], [], []
    for iid, path in entries:
        try:
            with Image.open(path) as img:
                tensors.append(preprocessor(img.convert("RGB")))
        except (OSError, ValueError) as exc:
            log.warning("skipping image %d (%s): %s", iid, path, exc)
            skipped.append((iid, path, str(exc)))
            continue
        kept.append(iid)
    return tensors, kept, skipped


def _fmt_vec(vec) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(vec, dtype=np.float64))


def export_embeddings(manifest: ExportManifest, batch_size: int = 8,
                      random_init_seed=None) -> ExportResult:
    """Embed every readable manifest image and write the output file.

    Images are processed in chunks of ``batch_size`` but records always
    follow manifest order.  Raises ExportError if no image could be read.
    """
    import torch

    if batch_size < 1:
        raise ExportError(f"batch_size must be >= 1, got {batch_size}")
    manifest.validate()
    model = build_backbone(manifest.backbone, manifest.weights,
                           random_init_seed)
    preprocessor = make_preprocessor(manifest.backbone)

    rows = []  # (id, float32 vector), manifest order
    skipped_all = []
    with torch.no_grad():
        for start in range(0, len(manifest.images), batch_size):
            chunk = manifest.images[start:start + batch_size]
            tensors, kept, skipped = _load_images(chunk, preprocessor)
            skipped_all.extend(skipped)
            if not tensors:
                continue
            out = model(torch.stack(tensors))
            emb = out.to(torch.float32).cpu().numpy()
            if emb.ndim != 2 or emb.shape[1] != manifest.dim:
                raise ExportError(
                    f"backbone returned shape {tuple(emb.shape)}, "
                    f"expected (*, {manifest.dim})")
            rows.extend(zip(kept, emb))
    if not rows:
        raise ExportError(
            f"no readable images among {len(manifest.images)} manifest entries")

    lines = [f"{OUTPUT_HEADER} {OUTPUT_VERSION} {manifest.dim}",
             f"# backbone {manifest.backbone} "
             f"preprocess {default_preprocess(manifest.backbone)}"]
    for iid, vec in rows:
        lines.append(f"embedding {iid} {_fmt_vec(vec)}")
    with open(manifest.output, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    log.info("wrote %d embeddings (%d skipped) -> %s",
             len(rows), len(skipped_all), manifest.output)
    return ExportResult(output=manifest.output,
                        written_ids=tuple(iid for iid, _ in rows),
                        skipped=tuple(skipped_all))
