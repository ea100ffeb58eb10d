import os

# single-threaded math everywhere so embedding values are reproducible
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np
import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """Five small RGB images with distinct content, plus one grayscale."""
    from PIL import Image

    root = tmp_path_factory.mktemp("frames")
    rng = np.random.default_rng(42)
    for i in range(5):
        arr = rng.integers(0, 256, size=(96, 128, 3), dtype=np.uint8)
        Image.fromarray(arr, "RGB").save(root / f"{i:03d}.png")
    gray = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
    Image.fromarray(gray, "L").save(root / "gray.png")
    return root


def write_manifest(path, body):
    path.write_text("embed-manifest 1\n" + body)
    return path


@pytest.fixture()
def make_manifest(tmp_path):
    def _make(body, name="manifest.txt"):
        return write_manifest(tmp_path / name, body)
    return _make
