"""Line-oriented export manifest: which images, which backbone, where to write.

Format (``#`` comments and blank lines are skipped)::

    embed-manifest 1
    backbone vit-b16
    dim 768
    output embeddings.txt
    weights vit_b16.pth          # optional; omit to require --random-init
    detector none                # optional; only "none" is available
    preprocess imagenet-224      # optional; defaults to the backbone standard
    image 0 frames/000.png
    image 1 frames/001.png

Relative image/output/weights paths resolve against the manifest's directory.
"""

import os
from dataclasses import dataclass

from .errors import FileMissingError, ManifestError

MANIFEST_HEADER = "embed-manifest"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ExportManifest:
    """Validated description of one export run."""

    backbone: str
    dim: int
    output: str
    images: tuple  # of (id, path) pairs, in file order
    weights: str = ""
    detector: str = "none"
    preprocess: str = ""

    def validate(self) -> None:
        from .backbones import BACKBONES, default_preprocess

        if self.backbone not in BACKBONES:
            known = ", ".join(sorted(BACKBONES))
            raise ManifestError(
                f"unknown backbone '{self.backbone}' (available: {known})")
        declared = BACKBONES[self.backbone].dim
        if self.dim != declared:
            raise ManifestError(
                f"dim {self.dim} does not match backbone "
                f"'{self.backbone}' output dim {declared}")
        if self.detector != "none":
            raise ManifestError(
                f"detector '{self.detector}' not available; this exporter "
                f"writes embeddings only")
        if self.preprocess and self.preprocess != default_preprocess(self.backbone):
            raise ManifestError(
                f"unknown preprocess '{self.preprocess}' for backbone "
                f"'{self.backbone}'")
        if not self.output:
            raise ManifestError("no output path given")
        if not self.images:
            raise ManifestError("no image records")
        ids = [iid for iid, _ in self.images]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ManifestError(f"duplicate image ids: {dup}")
        if any(iid < 0 for iid in ids):
            raise ManifestError("image ids must be non-negative")


_SCALAR_KEYS = ("backbone", "dim", "output", "weights", "detector", "preprocess")


def load_manifest(path) -> ExportManifest:
    """Parse and validate a manifest file."""
    if not os.path.exists(path):
        raise FileMissingError(f"manifest not found: {path}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    fields: dict = {"images": []}
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            toks = raw.split("#", 1)[0].split()
            if not toks:
                continue
            where = f"{path}:{lineno}"
            if not header_seen:
                if len(toks) != 2 or toks[0] != MANIFEST_HEADER:
                    raise ManifestError(
                        f"{where}: expected '{MANIFEST_HEADER} <version>'")
                if toks[1] != str(MANIFEST_VERSION):
                    raise ManifestError(
                        f"{where}: unsupported version {toks[1]}")
                header_seen = True
                continue
            key = toks[0]
            if key == "image":
                if len(toks) != 3:
                    raise ManifestError(f"{where}: expected 'image <id> <path>'")
                try:
                    iid = int(toks[1])
                except ValueError:
                    raise ManifestError(f"{where}: bad image id '{toks[1]}'")
                fields["images"].append((iid, resolve(toks[2])))
            elif key in _SCALAR_KEYS:
                if len(toks) != 2:
                    raise ManifestError(f"{where}: expected '{key} <value>'")
                if key in fields:
                    raise ManifestError(f"{where}: repeated key '{key}'")
                fields[key] = toks[1]
            else:
                raise ManifestError(f"{where}: unknown key '{key}'")
    if not header_seen:
        raise ManifestError(f"{path}: missing '{MANIFEST_HEADER}' header")
    for required in ("backbone", "dim", "output"):
        if required not in fields:
            raise ManifestError(f"{path}: missing '{required}' line")
    try:
        dim = int(fields["dim"])
    except ValueError:
        raise ManifestError(f"{path}: bad dim '{fields['dim']}'")
    manifest = ExportManifest(
        backbone=fields["backbone"],
        dim=dim,
        output=resolve(fields["output"]),
        images=tuple(fields["images"]),
        weights=resolve(fields["weights"]) if fields.get("weights") else "",
        detector=fields.get("detector", "none"),
        preprocess=fields.get("preprocess", ""),
    )
    manifest.validate()
    return manifest
