"""Training objective: Gaussian reconstruction log-likelihood, KL, full ELBO.

The loss for a batch of (embedding, point) pairs with M latent samples is

    mean_n [ -(1/M) sum_j log p(y_n | z_nj, x_n) + beta * KL(q_n || N(0, I)) ]

with the reconstruction likelihood an anisotropic Gaussian whose 3x3
covariance is learned through its Cholesky factor. Gradients for every
parameter group are derived by hand (reverse mode through the decoder,
reparameterisation, encoder, lift layers and the Cholesky factor); the
covariance receives gradient only from the reconstruction term.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError, ShapeError, TrainingDivergedError
from .model import LOGVAR_CLAMP, VaeModel, decode, encode

_LOG_2PI = float(np.log(2.0 * np.pi))


def reparameterise(mean: np.ndarray, log_var: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """z = mean + exp(log_var / 2) * eps, elementwise over matching shapes."""
    mean = np.asarray(mean, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if mean.shape != log_var.shape or eps.shape[-1] != mean.shape[-1]:
        raise ShapeError("reparameterise: mean/log_var/eps dims disagree")
    return mean + np.exp(0.5 * log_var) * eps


def kl_to_standard_normal(mean: np.ndarray, log_var: np.ndarray) -> float | np.ndarray:
    """KL(N(mean, diag(exp(log_var))) || N(0, I)), closed form, >= 0.

    Accepts a single (d,) Gaussian or a batch (B, d); returns scalar or (B,).
    """
    mean = np.asarray(mean, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    kl = -0.5 * np.sum(1.0 + log_var - mean**2 - np.exp(log_var), axis=-1)
    return float(kl) if kl.ndim == 0 else kl


def _chol_parts(chol_sigma: np.ndarray):
    L = np.asarray(chol_sigma, dtype=np.float64)
    if L.shape != (3, 3):
        raise ShapeError(f"expected 3x3 Cholesky factor, got {L.shape}")
    if np.any(np.triu(L, 1) != 0.0):
        raise DataError("Cholesky factor must be lower-triangular")
    diag = np.diag(L)
    if np.any(diag <= 0.0):
        raise DataError("Cholesky factor needs a strictly positive diagonal")
    return L, diag


def chol_matrix(model: VaeModel) -> np.ndarray:
    """Assemble L from the stored off-diagonal and log-diagonal parameters."""
    d = np.exp(model.chol_log_diag)
    o = model.chol_off
    return np.array(
        [[d[0], 0.0, 0.0], [o[0], d[1], 0.0], [o[1], o[2], d[2]]], dtype=np.float64
    )


def _forward_solve(L, diag, r):
    """Solve L w = r for rows r (B,3) by forward substitution."""
    w0 = r[:, 0] / diag[0]
    w1 = (r[:, 1] - L[1, 0] * w0) / diag[1]
    w2 = (r[:, 2] - L[2, 0] * w0 - L[2, 1] * w1) / diag[2]
    return np.stack([w0, w1, w2], axis=1)


def _back_solve(L, diag, w):
    """Solve L^T u = w for rows w (B,3) by back substitution."""
    u2 = w[:, 2] / diag[2]
    u1 = (w[:, 1] - L[2, 1] * u2) / diag[1]
    u0 = (w[:, 0] - L[1, 0] * u1 - L[2, 0] * u2) / diag[0]
    return np.stack([u0, u1, u2], axis=1)


def reconstruction_loglik(y: np.ndarray, y_hat: np.ndarray, chol_sigma: np.ndarray):
    """Gaussian log-likelihood of y under N(y_hat, L L^T).

    log det is read off the factor's diagonal and the quadratic form is
    evaluated with two triangular solves; the covariance is never inverted.
    Accepts single points (3,) or batches (B, 3).
    """
    L, diag = _chol_parts(chol_sigma)
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    y_hat = np.atleast_2d(np.asarray(y_hat, dtype=np.float64))
    if y.shape != y_hat.shape or y.shape[1] != 3:
        raise ShapeError("reconstruction_loglik: y and y_hat must be (B,3)")
    r = y - y_hat
    w = _forward_solve(L, diag, r)
    log_det = 2.0 * np.sum(np.log(diag))
    ll = -0.5 * (3.0 * _LOG_2PI + log_det + np.sum(w * w, axis=1))
    return float(ll[0]) if single else ll


def elbo_loss(
    model: VaeModel,
    emb: np.ndarray,
    y: np.ndarray,
    eps: np.ndarray,
    beta: float,
):
    """Negative ELBO over a batch, with gradients for every parameter.

    Args:
        emb: (B, De) conditioning embeddings (already augmented by the caller).
        y: (B, 3) target points in the normalised cube.
        eps: (B, M, d) standard-normal draws for the reparameterisation.
        beta: KL weight in [0, 1].

    Returns:
        (loss, parts, grads) where parts carries the reconstruction and KL
        terms and grads maps canonical parameter names to arrays.
    """
    emb = np.asarray(emb, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if emb.ndim != 2 or y.ndim != 2 or eps.ndim != 3:
        raise ShapeError("elbo_loss: emb (B,De), y (B,3), eps (B,M,d) required")
    b = emb.shape[0]
    if b == 0:
        raise ShapeError("elbo_loss: empty batch")
    m = eps.shape[1]
    d = model.latent_dim
    if eps.shape != (b, m, d) or y.shape != (b, 3):
        raise ShapeError("elbo_loss: batch shapes disagree")
    if not (0.0 <= beta <= 1.0):
        raise DataError(f"beta must be in [0,1], got {beta}")

    # ---- forward ----
    enc_cache: list = []
    mu, lv = encode(model, emb, y, cache=enc_cache)
    lv_raw = enc_cache[-1]
    h_enc = enc_cache[-2]
    sig = np.exp(0.5 * lv)
    z = mu[:, None, :] + sig[:, None, :] * eps  # (B, M, d)
    z_flat = z.reshape(b * m, d)
    emb_rep = np.repeat(emb, m, axis=0)
    dec_cache: list = []
    y_hat = decode(model, emb_rep, z_flat, cache=dec_cache)
    h_dec = dec_cache[-1]

    L = chol_matrix(model)
    diag = np.exp(model.chol_log_diag)
    r = np.repeat(y, m, axis=0) - y_hat  # (B*M, 3)
    w = _forward_solve(L, diag, r)
    log_det = 2.0 * np.sum(model.chol_log_diag)
    loglik = -0.5 * (3.0 * _LOG_2PI + log_det + np.sum(w * w, axis=1))  # (B*M,)
    recon_term = float(-np.mean(loglik))
    kl_rows = kl_to_standard_normal(mu, lv)
    kl_term = float(np.mean(kl_rows))
    loss = recon_term + beta * kl_term

    if not np.isfinite(recon_term):
        raise TrainingDivergedError("non-finite reconstruction term in ELBO")
    if not np.isfinite(kl_term):
        raise TrainingDivergedError("non-finite KL term in ELBO")

    # ---- backward ----
    grads: dict = {}
    c = 1.0 / (b * m)
    u = _back_solve(L, diag, w)  # Sigma^{-1} r, rows (B*M, 3)

    # Cholesky factor: log-det contributes 1 per log-diagonal entry; the
    # quadratic form contributes -c * tril(U^T U L).
    s_mat = u.T @ u  # sum_n u u^T
    dL = -c * (s_mat @ L)
    grads["chol_off"] = np.array([dL[1, 0], dL[2, 0], dL[2, 1]])
    grads["chol_log_diag"] = np.array([dL[0, 0], dL[1, 1], dL[2, 2]]) * diag + 1.0

    # Decoder head and trunk.
    d_yhat = -c * u  # d loss / d y_hat
    grads["dec_out_w"] = d_yhat.T @ h_dec
    grads["dec_out_b"] = d_yhat.sum(axis=0)
    d_hdec = d_yhat @ model.dec_out_w
    d_x0d = model.decoder.backward(dec_cache[: model.n_hidden + 1], d_hdec, grads, "dec_")
    d_liftz = d_x0d[:, model.embedding_dim :]
    grads["lift_latent_w"] = d_liftz.T @ z_flat
    grads["lift_latent_b"] = d_liftz.sum(axis=0)
    dz = (d_liftz @ model.lift_latent_w).reshape(b, m, d)

    # Through the reparameterisation, plus the KL head.
    d_mu = dz.sum(axis=1)
    d_lv = 0.5 * sig * np.sum(dz * eps, axis=1)
    d_mu += (beta / b) * mu
    d_lv += (beta / b) * (-0.5) * (1.0 - np.exp(lv))
    # Clamp on the raw log-variance: zero gradient outside the active range.
    d_lv = d_lv * (np.abs(lv_raw) < LOGVAR_CLAMP)

    # Encoder heads and trunk.
    grads["enc_mu_w"] = d_mu.T @ h_enc
    grads["enc_mu_b"] = d_mu.sum(axis=0)
    grads["enc_lv_w"] = d_lv.T @ h_enc
    grads["enc_lv_b"] = d_lv.sum(axis=0)
    d_henc = d_mu @ model.enc_mu_w + d_lv @ model.enc_lv_w
    d_x0e = model.encoder.backward(enc_cache[: model.n_hidden + 1], d_henc, grads, "enc_")
    d_liftp = d_x0e[:, model.embedding_dim :]
    grads["lift_point_w"] = d_liftp.T @ y
    grads["lift_point_b"] = d_liftp.sum(axis=0)

    parts = {"recon": recon_term, "kl": kl_term}
    return loss, parts, grads
