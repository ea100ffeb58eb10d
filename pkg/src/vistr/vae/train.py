"""Training loop: per-step pair sampling, embedding augmentation, Adam updates.

Each step draws ``batch_images`` mapping images with replacement, then
``points_per_image`` visible points per image (without replacement when the
image has at least that many, otherwise with replacement). Conditioning
embeddings get fresh Gaussian noise every step. The run is deterministic for
a fixed seed and thread configuration: all randomness flows from one
generator in a fixed draw order.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, TrainingDivergedError
from ..scene import SceneBundle
from .adam import Adam
from .model import VaeModel, init_model, save_model
from .objective import elbo_loss
from .schedules import kl_weight_schedule, lr_schedule

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    iterations: int = 100_000
    batch_images: int = 128
    points_per_image: int = 50
    mc_samples: int = 50
    max_lr: float = 1e-3
    latent_dim: int = 4
    kl_warmup_start: int = 20_000
    kl_period: int = 2_000
    emb_noise_var: float = 1.0
    sigma_init: float = 0.1
    seed: int = 0
    # Architecture (defaults follow the published recipe).
    hidden_width: int = 512
    n_hidden: int = 5
    lift_dim: int = 64
    # One-cycle internals.
    warmup_frac: float = 0.3
    div_factor: float = 25.0
    final_div: float = 1e4
    # Bookkeeping.
    log_every: int = 100
    kl_beta_before_warmup: float = 0.0

    def validate(self) -> "TrainConfig":
        positives = [
            ("iterations", self.iterations),
            ("batch_images", self.batch_images),
            ("points_per_image", self.points_per_image),
            ("mc_samples", self.mc_samples),
            ("max_lr", self.max_lr),
            ("latent_dim", self.latent_dim),
            ("kl_period", self.kl_period),
            ("sigma_init", self.sigma_init),
            ("hidden_width", self.hidden_width),
            ("n_hidden", self.n_hidden),
            ("lift_dim", self.lift_dim),
            ("log_every", self.log_every),
        ]
        for name, val in positives:
            if not val > 0:
                raise DataError(f"TrainConfig.{name} must be positive, got {val}")
        if self.emb_noise_var < 0 or self.kl_warmup_start < 0:
            raise DataError("noise variance and warm-up start must be non-negative")
        if not 0.0 < self.warmup_frac < 1.0:
            raise DataError("warmup_frac must be in (0,1)")
        return self


@dataclass
class TrainLogRecord:
    iteration: int
    loss: float
    recon: float
    kl: float
    beta: float
    lr: float

    def line(self) -> str:
        return (
            f"{self.iteration},{self.loss:.8f},{self.recon:.8f},"
            f"{self.kl:.8f},{self.beta:.6f},{self.lr:.8e}"
        )


LOG_HEADER = "# iter,loss,recon,kl,beta,lr"


def write_training_log(records, path) -> None:
    lines = [LOG_HEADER] + [r.line() for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def train(
    bundle: SceneBundle,
    cfg: TrainConfig,
    checkpoint_path=None,
    log_path=None,
):
    """Fit the scene model; returns (model, log records).

    On divergence (non-finite loss) the parameters are rolled back to the
    last logged snapshot; if ``checkpoint_path`` is given that state is
    written there before :class:`TrainingDivergedError` is raised.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    model = init_model(
        embedding_dim=bundle.embedding_dim,
        norm=bundle.norm,
        rng=rng,
        latent_dim=cfg.latent_dim,
        hidden_width=cfg.hidden_width,
        n_hidden=cfg.n_hidden,
        lift_dim=cfg.lift_dim,
        sigma_init=cfg.sigma_init,
    )
    model.train_config_echo = asdict(cfg)

    # Normalised positions of each image's visible points, resolved once.
    per_image_points = [
        bundle.norm.apply(bundle.positions[bundle.point_index(v)]) for v in bundle.visible
    ]
    embeddings = bundle.embeddings.astype(np.float64)
    noise_std = float(np.sqrt(cfg.emb_noise_var))
    n_images = bundle.num_images
    ppi = cfg.points_per_image

    params = model.params()
    opt = Adam(params)
    records: list[TrainLogRecord] = []
    snapshot = model.copy_params()
    snapshot_iter = 0

    def fail(iteration, message):
        model.load_params(snapshot)
        if checkpoint_path is not None:
            save_model(model, checkpoint_path)
        if log_path is not None:
            write_training_log(records, log_path)
        raise TrainingDivergedError(
            f"{message} at iteration {iteration}; "
            f"rolled back to iteration {snapshot_iter}",
            iteration=iteration,
        )

    for iteration in range(cfg.iterations):
        lr = lr_schedule(iteration, cfg)
        beta = kl_weight_schedule(iteration, cfg)

        img_idx = rng.integers(0, n_images, size=cfg.batch_images)
        y_rows = []
        for k in img_idx:
            pts = per_image_points[k]
            replace = pts.shape[0] < ppi
            rows = rng.choice(pts.shape[0], size=ppi, replace=replace)
            y_rows.append(pts[rows])
        y = np.concatenate(y_rows, axis=0)
        emb = np.repeat(embeddings[img_idx], ppi, axis=0)
        if noise_std > 0:
            emb = emb + rng.normal(0.0, noise_std, size=emb.shape)
        eps = rng.standard_normal((emb.shape[0], cfg.mc_samples, cfg.latent_dim))

        try:
            loss, parts, grads = elbo_loss(model, emb, y, eps, beta)
        except TrainingDivergedError as exc:
            fail(iteration, str(exc))
        if not np.isfinite(loss):
            fail(iteration, "non-finite loss")

        opt.step(params, grads, lr)
        # Keep the covariance factor in a numerically safe band.
        np.clip(model.chol_log_diag, -10.0, 10.0, out=model.chol_log_diag)

        if iteration % cfg.log_every == 0:
            records.append(
                TrainLogRecord(iteration, float(loss), parts["recon"], parts["kl"], beta, lr)
            )
            snapshot = model.copy_params()
            snapshot_iter = iteration
            logger.debug(
                "iter %d loss %.5f recon %.5f kl %.5f beta %.3f lr %.2e",
                iteration, loss, parts["recon"], parts["kl"], beta, lr,
            )

    if checkpoint_path is not None:
        save_model(model, checkpoint_path)
    if log_path is not None:
        write_training_log(records, log_path)
    return model, records
