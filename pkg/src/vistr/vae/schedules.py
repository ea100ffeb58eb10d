"""Learning-rate and KL-weight schedules.

One-cycle learning rate: cosine warm-up from max_lr/div_factor to max_lr over
the first warmup_frac of the run, then cosine annealing down to
max_lr/final_div. Peak value is exactly max_lr at the warm-up boundary.

KL weight: zero until the warm-up start, then a cyclical 0 -> 1 ramp: within
each period the weight rises linearly over the first half and holds at 1 for
the second half.
"""

from __future__ import annotations

import numpy as np


def lr_schedule(iteration: int, cfg) -> float:
    if not 0 <= iteration < cfg.iterations:
        raise ValueError(f"iteration {iteration} outside [0, {cfg.iterations})")
    peak = max(1, int(round(cfg.warmup_frac * cfg.iterations)))
    start = cfg.max_lr / cfg.div_factor
    final = cfg.max_lr / cfg.final_div
    if iteration == peak:
        return float(cfg.max_lr)
    if iteration < peak:
        t = iteration / peak
        return start + (cfg.max_lr - start) * 0.5 * (1.0 - np.cos(np.pi * t))
    t = (iteration - peak) / max(1, cfg.iterations - 1 - peak)
    return final + (cfg.max_lr - final) * 0.5 * (1.0 + np.cos(np.pi * min(t, 1.0)))


def kl_weight_schedule(iteration: int, cfg) -> float:
    if iteration < 0:
        raise ValueError("iteration must be non-negative")
    if iteration < cfg.kl_warmup_start:
        return float(cfg.kl_beta_before_warmup)
    phase = (iteration - cfg.kl_warmup_start) % cfg.kl_period
    half = cfg.kl_period / 2.0
    return min(1.0, phase / half)
