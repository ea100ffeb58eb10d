"""Shared helpers for the test modules in this directory."""

import numpy as np

from vistr.geometry import CameraIntrinsics, matrix_to_quat, rodrigues
from vistr.scene import make_bundle


def random_rotation(rng):
    return rodrigues(rng.normal(0.0, 1.0, 3))


def random_unit_quat(rng):
    return matrix_to_quat(random_rotation(rng))


def default_intrinsics():
    return CameraIntrinsics(fx=500.0, fy=480.0, cx=320.0, cy=240.0,
                            width=640, height=480)


def build_random_bundle(rng, n_points=40, n_images=6, emb_dim=16, desc_dim=8,
                        extent=10.0):
    """Hand-rolled valid bundle, independent of the synthetic scene module."""
    positions = rng.uniform(-extent / 2, extent / 2, (n_points, 3))
    descriptors = rng.normal(0, 1, (n_points, desc_dim))
    descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)
    quats = np.stack([random_unit_quat(rng) for _ in range(n_images)])
    trans = rng.uniform(-extent / 2, extent / 2, (n_images, 3))
    visible = tuple(
        np.sort(rng.choice(n_points, size=rng.integers(5, n_points // 2),
                           replace=False)).astype(np.uint64)
        for _ in range(n_images))
    return make_bundle(
        point_ids=np.arange(n_points, dtype=np.uint64),
        positions=positions,
        descriptors=descriptors.astype(np.float32),
        image_ids=np.arange(n_images, dtype=np.uint64),
        embeddings=rng.normal(0, 1, (n_images, emb_dim)).astype(np.float32),
        quats=quats,
        trans=trans,
        intrinsics_ids=np.zeros(n_images, dtype=np.uint32),
        visible=visible,
        intrinsics={0: default_intrinsics()})
