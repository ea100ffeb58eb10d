"""Scene-conditional VAE: parameter containers, forward passes, checkpoints.

Both networks are MLPs with LeakyReLU hidden layers and a learned projection
of the input added to the third layer's pre-activation. The encoder consumes
[embedding | lifted 3D point] and emits a diagonal Gaussian over the latent;
the decoder consumes [embedding | lifted latent] and emits a 3D point in the
normalised cube. A learnable 3x3 output covariance is carried as its Cholesky
factor (off-diagonal entries plus log-diagonal, so positive-definiteness is
structural).

All parameters and arithmetic are float64. Checkpoints therefore store the
parameter blob as f64 so that save/load round trips are bit-exact.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FileMissingError, FormatError, ShapeError
from ..scene import NormTransform

log = logging.getLogger("vistr.vae")

CHECKPOINT_MAGIC = b"VSTM"
CHECKPOINT_VERSION = 1

LOGVAR_CLAMP = 20.0
LOGDIAG_CLAMP = 10.0
DEFAULT_SLOPE = 0.01


@dataclass
class MlpTrunk:
    """Hidden stack of an MLP: weights, biases, residual input projection."""

    weights: list  # weights[k]: (width, in_k) float64
    biases: list  # biases[k]: (width,)
    res_proj: np.ndarray  # (width, input_dim), added to layer `res_layer` pre-act
    res_layer: int = 2  # 0-based; the third hidden layer
    slope: float = DEFAULT_SLOPE

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def width(self) -> int:
        return self.weights[0].shape[0]

    def forward(self, x0: np.ndarray, cache: list | None = None) -> np.ndarray:
        """Forward pass over a batch (B, input_dim) -> (B, width).

        When ``cache`` is given, pre-activations and activations are appended
        for the backward pass.
        """
        x = x0
        if cache is not None:
            cache.append(x0)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            u = x @ w.T + b
            if k == self.res_layer:
                u = u + x0 @ self.res_proj.T
            x = np.where(u > 0.0, u, self.slope * u)
            if cache is not None:
                cache.append(u)
        return x

    def backward(self, cache: list, d_out: np.ndarray, grads: dict, prefix: str) -> np.ndarray:
        """Reverse pass; fills ``grads[prefix + ...]`` and returns d(input)."""
        x0 = cache[0]
        n_layers = len(self.weights)
        # Activations must be recomputed from cached pre-activations.
        acts = [x0]
        for k in range(n_layers):
            u = cache[1 + k]
            acts.append(np.where(u > 0.0, u, self.slope * u))
        dx = d_out
        dx0 = np.zeros_like(x0)
        for k in range(n_layers - 1, -1, -1):
            u = cache[1 + k]
            du = dx * np.where(u > 0.0, 1.0, self.slope)
            grads[f"{prefix}w{k}"] = du.T @ acts[k]
            grads[f"{prefix}b{k}"] = du.sum(axis=0)
            if k == self.res_layer:
                grads[f"{prefix}p"] = du.T @ x0
                dx0 += du @ self.res_proj
            dx = du @ self.weights[k]
        return dx0 + dx

    def param_items(self, prefix: str):
        for k in range(len(self.weights)):
            yield f"{prefix}w{k}", self.weights[k]
            yield f"{prefix}b{k}", self.biases[k]
        yield f"{prefix}p", self.res_proj


@dataclass
class VaeModel:
    """All learnable state of one scene's generative retrieval model."""

    embedding_dim: int
    latent_dim: int
    hidden_width: int
    n_hidden: int
    lift_dim: int
    lift_point_w: np.ndarray  # (lift_dim, 3)
    lift_point_b: np.ndarray
    encoder: MlpTrunk
    enc_mu_w: np.ndarray  # (d, width)
    enc_mu_b: np.ndarray
    enc_lv_w: np.ndarray
    enc_lv_b: np.ndarray
    lift_latent_w: np.ndarray  # (lift_dim, d)
    lift_latent_b: np.ndarray
    decoder: MlpTrunk
    dec_out_w: np.ndarray  # (3, width)
    dec_out_b: np.ndarray
    chol_off: np.ndarray  # (3,) = (L10, L20, L21)
    chol_log_diag: np.ndarray  # (3,) log of L's diagonal
    norm: NormTransform
    train_config_echo: dict = field(default_factory=dict)

    def param_items(self):
        """Canonical (name, array) order: checkpoint blob, Adam state, grads."""
        yield "lift_point_w", self.lift_point_w
        yield "lift_point_b", self.lift_point_b
        yield from self.encoder.param_items("enc_")
        yield "enc_mu_w", self.enc_mu_w
        yield "enc_mu_b", self.enc_mu_b
        yield "enc_lv_w", self.enc_lv_w
        yield "enc_lv_b", self.enc_lv_b
        yield "lift_latent_w", self.lift_latent_w
        yield "lift_latent_b", self.lift_latent_b
        yield from self.decoder.param_items("dec_")
        yield "dec_out_w", self.dec_out_w
        yield "dec_out_b", self.dec_out_b
        yield "chol_off", self.chol_off
        yield "chol_log_diag", self.chol_log_diag

    def params(self) -> dict:
        return dict(self.param_items())

    def num_params(self) -> int:
        return sum(a.size for _, a in self.param_items())

    def copy_params(self) -> dict:
        return {name: arr.copy() for name, arr in self.param_items()}

    def load_params(self, snapshot: dict) -> None:
        for name, arr in self.param_items():
            arr[...] = snapshot[name]

    def check_embedding(self, emb: np.ndarray) -> np.ndarray:
        emb = np.atleast_2d(np.asarray(emb, dtype=np.float64))
        if emb.shape[1] != self.embedding_dim:
            raise ShapeError(
                f"embedding dim {emb.shape[1]} does not match model ({self.embedding_dim})"
            )
        return emb


def encode(model: VaeModel, emb: np.ndarray, y: np.ndarray, cache: list | None = None):
    """Posterior parameters for (embedding, normalised point) rows.

    Returns (mean, log_var), each (B, d); log_var is clamped to +-20.
    """
    emb = model.check_embedding(emb)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if y.shape != (emb.shape[0], 3):
        raise ShapeError(f"expected points of shape ({emb.shape[0]}, 3), got {y.shape}")
    if y.size and (y.min() < -1e-6 or y.max() > 1.0 + 1e-6):
        log.warning("encode() received points outside the unit cube "
                    "(min %.4f, max %.4f); expected normalised coordinates",
                    y.min(), y.max())
    lift = y @ model.lift_point_w.T + model.lift_point_b
    x0 = np.concatenate([emb, lift], axis=1)
    h = model.encoder.forward(x0, cache)
    mu = h @ model.enc_mu_w.T + model.enc_mu_b
    lv_raw = h @ model.enc_lv_w.T + model.enc_lv_b
    lv = np.clip(lv_raw, -LOGVAR_CLAMP, LOGVAR_CLAMP)
    if cache is not None:
        cache.append(h)
        cache.append(lv_raw)
    return mu, lv


def decode(model: VaeModel, emb: np.ndarray, z: np.ndarray, cache: list | None = None):
    """Decoder forward: (B, d) latents to (B, 3) points in the unit cube."""
    emb = model.check_embedding(emb)
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape != (emb.shape[0], model.latent_dim):
        raise ShapeError(
            f"expected latents of shape ({emb.shape[0]}, {model.latent_dim}), got {z.shape}"
        )
    lift = z @ model.lift_latent_w.T + model.lift_latent_b
    x0 = np.concatenate([emb, lift], axis=1)
    h = model.decoder.forward(x0, cache)
    if cache is not None:
        cache.append(h)
    return h @ model.dec_out_w.T + model.dec_out_b


def _he(rng, out_dim, in_dim):
    return rng.normal(0.0, np.sqrt(2.0 / in_dim), size=(out_dim, in_dim))


def _xavier(rng, out_dim, in_dim):
    return rng.normal(0.0, np.sqrt(1.0 / in_dim), size=(out_dim, in_dim))


def init_model(
    embedding_dim: int,
    norm: NormTransform,
    rng: np.random.Generator,
    latent_dim: int = 4,
    hidden_width: int = 512,
    n_hidden: int = 5,
    lift_dim: int = 64,
    sigma_init: float = 0.1,
) -> VaeModel:
    """Random initialisation; draw order follows the canonical parameter order."""

    def trunk(input_dim):
        weights, biases = [], []
        for k in range(n_hidden):
            fan_in = input_dim if k == 0 else hidden_width
            weights.append(_he(rng, hidden_width, fan_in))
            biases.append(np.zeros(hidden_width))
        res = _xavier(rng, hidden_width, input_dim)
        return MlpTrunk(weights, biases, res, res_layer=min(2, n_hidden - 1))

    input_dim = embedding_dim + lift_dim
    lift_point_w = _he(rng, lift_dim, 3)
    lift_point_b = np.zeros(lift_dim)
    enc = trunk(input_dim)
    enc_mu_w = _xavier(rng, latent_dim, hidden_width)
    enc_mu_b = np.zeros(latent_dim)
    enc_lv_w = _xavier(rng, latent_dim, hidden_width)
    enc_lv_b = np.zeros(latent_dim)
    lift_latent_w = _he(rng, lift_dim, latent_dim)
    lift_latent_b = np.zeros(lift_dim)
    dec = trunk(input_dim)
    dec_out_w = _xavier(rng, 3, hidden_width)
    dec_out_b = np.zeros(3)
    return VaeModel(
        embedding_dim=embedding_dim,
        latent_dim=latent_dim,
        hidden_width=hidden_width,
        n_hidden=n_hidden,
        lift_dim=lift_dim,
        lift_point_w=lift_point_w,
        lift_point_b=lift_point_b,
        encoder=enc,
        enc_mu_w=enc_mu_w,
        enc_mu_b=enc_mu_b,
        enc_lv_w=enc_lv_w,
        enc_lv_b=enc_lv_b,
        lift_latent_w=lift_latent_w,
        lift_latent_b=lift_latent_b,
        decoder=dec,
        dec_out_w=dec_out_w,
        dec_out_b=dec_out_b,
        chol_off=np.zeros(3),
        chol_log_diag=np.full(3, 0.5 * np.log(sigma_init)),
        norm=norm,
    )


def save_model(model: VaeModel, path) -> None:
    """Write a ``VSTM`` checkpoint: dims, shape table, f64 blob, norm, config echo."""
    items = list(model.param_items())
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack(
            "<IIIIII",
            CHECKPOINT_VERSION,
            model.latent_dim,
            model.embedding_dim,
            model.hidden_width,
            model.n_hidden,
            model.lift_dim,
        ),
        struct.pack("<I", len(items)),
    ]
    for _, arr in items:
        shape = arr.shape if arr.ndim else (1,)
        parts.append(struct.pack("<I", len(shape)))
        parts.append(struct.pack(f"<{len(shape)}I", *shape))
    for _, arr in items:
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    parts.append(struct.pack("<d", model.norm.scale))
    parts.append(model.norm.offset.astype("<f8").tobytes())
    echo = json.dumps(model.train_config_echo, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(echo)))
    parts.append(echo)
    Path(path).write_bytes(b"".join(parts))


def load_model(path) -> VaeModel:
    p = Path(path)
    if not p.is_file():
        raise FileMissingError(f"no such file: {p}")
    data = p.read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic, not a model checkpoint")
    off = 4
    version, d, de, width, n_hidden, lift_dim = struct.unpack_from("<IIIIII", data, off)
    off += 24
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (n_arrays,) = struct.unpack_from("<I", data, off)
    off += 4
    shapes = []
    for _ in range(n_arrays):
        (ndim,) = struct.unpack_from("<I", data, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        shapes.append(shape)
    # Rebuild the skeleton, then overwrite arrays from the blob in order.
    model = init_model(
        embedding_dim=de,
        norm=NormTransform.identity(),
        rng=np.random.default_rng(0),
        latent_dim=d,
        hidden_width=width,
        n_hidden=n_hidden,
        lift_dim=lift_dim,
    )
    items = list(model.param_items())
    if len(items) != n_arrays:
        raise FormatError(f"{path}: shape table has {n_arrays} arrays, expected {len(items)}")
    for (name, arr), shape in zip(items, shapes):
        want = arr.shape if arr.ndim else (1,)
        if tuple(shape) != tuple(want):
            raise FormatError(f"{path}: array {name} has shape {shape}, expected {want}")
        count = int(np.prod(shape))
        vals = np.frombuffer(data, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
        arr[...] = vals.reshape(arr.shape)
    (scale,) = struct.unpack_from("<d", data, off)
    off += 8
    offset = np.frombuffer(data, dtype="<f8", count=3, offset=off).copy()
    off += 24
    (echo_len,) = struct.unpack_from("<I", data, off)
    off += 4
    echo = json.loads(data[off : off + echo_len].decode("utf-8")) if echo_len else {}
    off += echo_len
    if off != len(data):
        raise FormatError(f"{path}: {len(data) - off} trailing bytes")
    model.norm = NormTransform(scale, offset)
    model.train_config_echo = echo
    return model
