"""Image-to-embedding export tool feeding the vstr text exchange format."""

from .backbones import BACKBONES, build_backbone, make_preprocessor
from .errors import (ExportError, ExportToolError, FileMissingError,
                     ManifestError)
from .export import ExportResult, export_embeddings
from .manifest import ExportManifest, load_manifest

__all__ = [
    "BACKBONES",
    "ExportError",
    "ExportManifest",
    "ExportResult",
    "ExportToolError",
    "FileMissingError",
    "ManifestError",
    "build_backbone",
    "export_embeddings",
    "load_manifest",
    "make_preprocessor",
]
