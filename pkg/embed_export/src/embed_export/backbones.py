"""Backbone registry: identifier -> model constructor, output dim, preprocessing.

Every backbone exposes the representation used for whole-image embeddings
(the class token for vision transformers) as its forward output, in eval
mode, on CPU.
"""

from dataclasses import dataclass

from .errors import FileMissingError, ManifestError


@dataclass(frozen=True)
class BackboneSpec:
    dim: int
    preprocess: str


BACKBONES = {
    "vit-b16": BackboneSpec(dim=768, preprocess="imagenet-224"),
}


def default_preprocess(backbone: str) -> str:
    return BACKBONES[backbone].preprocess


def _build_vit_b16(weights_path, random_init_seed):
    import torch
    from torchvision.models import vit_b_16

    if random_init_seed is not None:
        torch.manual_seed(int(random_init_seed))
    model = vit_b_16(weights=None)
    if weights_path:
        import os

        if not os.path.exists(weights_path):
            raise FileMissingError(f"weights not found: {weights_path}")
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        missing, unexpected = model.load_state_dict(state, strict=False)
        # the classifier head is discarded below, so only complain about
        # mismatches in the encoder itself
        bad = [k for k in list(missing) + list(unexpected)
               if not k.startswith("heads.")]
        if bad:
            raise ManifestError(
                f"weights file does not match backbone 'vit-b16' "
                f"(first mismatch: {bad[0]})")
    model.heads = torch.nn.Identity()
    model.eval()
    return model


_BUILDERS = {"vit-b16": _build_vit_b16}


def build_backbone(name: str, weights_path: str = "",
                   random_init_seed=None):
    """Construct an eval-mode backbone returning (B, dim) embeddings.

    Either a local weights file or an explicit random-init seed must be
    supplied; silent random weights would be indistinguishable from a
    trained model in the output file.
    """
    if name not in _BUILDERS:
        known = ", ".join(sorted(_BUILDERS))
        raise ManifestError(f"unknown backbone '{name}' (available: {known})")
    if not weights_path and random_init_seed is None:
        raise ManifestError(
            "no weights available: give a weights path or request "
            "seeded random initialisation")
    return _BUILDERS[name](weights_path, random_init_seed)


def make_preprocessor(backbone: str):
    """Return a callable PIL.Image -> (3, H, W) float tensor for the backbone."""
    from torchvision import transforms

    name = default_preprocess(backbone)
    if name == "imagenet-224":
        return transforms.Compose([
            transforms.Resize(256, antialias=True),
            transforms.CenterCrop(224),
            transforms.ToTensor(),
            transforms.Normalize(mean=[0.485, 0.456, 0.406],
                                 std=[0.229, 0.224, 0.225]),
        ])
    raise ManifestError(f"unknown preprocess '{name}'")
