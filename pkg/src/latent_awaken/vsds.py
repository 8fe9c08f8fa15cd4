"""Score-distillation refinement of clean video latents.

Instead of sampling, the latent itself is treated as the optimization
variable: a single Gaussian noise tensor is drawn once per path, the latent
is repeatedly pushed to decreasing noise levels t = T, T-1, ..., tau, and at
each level the gap between the denoiser's prediction and that fixed noise is
applied as a weighted gradient step on the clean latent.  Because the noise
is sampled only once, a perfect prediction leaves the latent exactly
unchanged (the procedure is a fixed-point iteration around the model's
idea of a plausible video).

``dual_path_refine`` runs the procedure independently on the real-image
latent and on a synthetic proxy latent, each path conditioned on its own
first frame, so the two refined results stay anchored to their respective
images and can be fused downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .diffusion import Condition, Denoiser, FrameLatent, NoiseSchedule, VideoLatent, forward_noise
from .rng import as_stream


class CurveKind(Enum):
    """Shape of the per-iteration update-weight curve."""

    LINEAR_DECREASING = "LD"
    STEPWISE_DECREASING = "SD"
    STEPWISE_INCREASING = "SI"
    LINEAR_INCREASING = "LI"
    CONSTANT = "constant"


_CURVE_ALIASES = {
    "ld": CurveKind.LINEAR_DECREASING,
    "lineardecreasing": CurveKind.LINEAR_DECREASING,
    "sd": CurveKind.STEPWISE_DECREASING,
    "stepwisedecreasing": CurveKind.STEPWISE_DECREASING,
    "si": CurveKind.STEPWISE_INCREASING,
    "stepwiseincreasing": CurveKind.STEPWISE_INCREASING,
    "li": CurveKind.LINEAR_INCREASING,
    "linearincreasing": CurveKind.LINEAR_INCREASING,
    "constant": CurveKind.CONSTANT,
    "const": CurveKind.CONSTANT,
}


def parse_curve_kind(name: str) -> CurveKind:
    key = name.strip().lower().replace("_", "").replace("-", "")
    if key not in _CURVE_ALIASES:
        raise ValueError(f"unknown weight curve {name!r}; known: LD, SD, SI, LI, constant")
    return _CURVE_ALIASES[key]


@dataclass(frozen=True)
class WeightCurve:
    """Update-weight profile over the refinement iterations.

    Stepwise curves hold ``w_hi`` on one half of the iterations and ``w_lo``
    on the other; linear curves interpolate between the two ends; constant
    stays at ``w_lo`` throughout.
    """

    kind: CurveKind = CurveKind.STEPWISE_DECREASING
    w_hi: float = 2.0
    w_lo: float = 1.0

    def __post_init__(self):
        if not (self.w_hi >= self.w_lo > 0.0):
            raise ValueError(f"need w_hi >= w_lo > 0, got w_hi={self.w_hi}, w_lo={self.w_lo}")


def alpha_at(curve: WeightCurve, i: int, n: int) -> float:
    """Update weight at iteration ``i`` of ``n`` (0-based)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= i < n:
        raise ValueError(f"iteration {i} outside [0, {n})")
    kind, hi, lo = curve.kind, curve.w_hi, curve.w_lo
    if kind is CurveKind.CONSTANT:
        return lo
    if kind is CurveKind.STEPWISE_DECREASING:
        return hi if i < n / 2 else lo
    if kind is CurveKind.STEPWISE_INCREASING:
        return lo if i < n / 2 else hi
    frac = i / (n - 1) if n > 1 else 0.0
    if kind is CurveKind.LINEAR_DECREASING:
        return hi + (lo - hi) * frac
    return lo + (hi - lo) * frac  # LINEAR_INCREASING


@dataclass(frozen=True)
class VsdsConfig:
    """Refinement hyper-parameters.

    ``p`` sets the stopping level tau = round(T * p); ``omega_mode`` chooses
    the noise-level weighting of the gradient (constant 1 or 1 - alpha_bar);
    ``shared_noise`` makes both paths of a dual refinement reuse one noise
    draw instead of drawing independently.
    """

    p: float = 0.6
    curve: WeightCurve = WeightCurve()
    omega_mode: str = "one_minus_alpha_bar"
    seed: int = 42
    shared_noise: bool = False

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {self.p}")
        if self.omega_mode not in ("one", "one_minus_alpha_bar"):
            raise ValueError(f"unknown omega_mode {self.omega_mode!r}")


def tau_step(steps: int, p: float) -> int:
    """Stopping step tau = round-half-up(T * p), clamped to at least 1."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    return max(1, int(np.floor(steps * p + 0.5)))


def update_count(steps: int, p: float) -> int:
    """Number of refinement iterations: one per level in [tau, T]."""
    return steps - tau_step(steps, p) + 1


class RefinementDiverged(RuntimeError):
    """Raised when a refinement update stops being finite."""


def _omega(sched: NoiseSchedule, t: int, mode: str) -> float:
    return 1.0 if mode == "one" else 1.0 - sched.alpha_bar(t)


def _refine(
    z0: np.ndarray,
    cond: Condition,
    denoiser: Denoiser,
    sched: NoiseSchedule,
    cfg: VsdsConfig,
    eps: np.ndarray,
) -> np.ndarray:
    steps = sched.steps
    tau = tau_step(steps, cfg.p)
    n = steps - tau + 1
    z = z0.copy()
    for i, t in enumerate(range(steps, tau - 1, -1)):
        z_t = forward_noise(VideoLatent(z), t, eps, sched)
        pred = denoiser.predict_noise(z_t, cond, t)
        grad = _omega(sched, t, cfg.omega_mode) * (pred.frames - eps)
        z = z - alpha_at(cfg.curve, i, n) * grad
        if not np.isfinite(z).all():
            raise RefinementDiverged(f"non-finite latent at refinement step t={t}")
    return z


def vsds_refine(
    z0: VideoLatent,
    cond: Condition,
    denoiser: Denoiser,
    sched: NoiseSchedule,
    cfg: VsdsConfig = VsdsConfig(),
    rng: int | np.random.Generator | None = None,
) -> VideoLatent:
    """Refine one clean latent; draws exactly one noise tensor from ``rng``."""
    gen = as_stream(rng, cfg.seed, "vsds/real")
    eps = gen.standard_normal(z0.shape)
    return VideoLatent(_refine(z0.frames, cond, denoiser, sched, cfg, eps))


def dual_path_refine(
    real_static: VideoLatent,
    proxy_static: VideoLatent,
    cond: Condition,
    denoiser: Denoiser,
    sched: NoiseSchedule,
    cfg: VsdsConfig = VsdsConfig(),
    rng_real: int | np.random.Generator | None = None,
    rng_proxy: int | np.random.Generator | None = None,
) -> tuple[VideoLatent, VideoLatent]:
    """Refine the real and proxy latents independently.

    The real path uses ``cond`` as given; the proxy path swaps in the proxy's
    own first frame as conditioning image (same motion label), so each path
    is anchored to its own source.  With ``cfg.shared_noise`` both paths see
    the same single noise draw; otherwise the real path draws first, then the
    proxy path, each exactly once.
    """
    if real_static.shape != proxy_static.shape:
        raise ValueError(f"path shape mismatch: {real_static.shape} vs {proxy_static.shape}")
    proxy_cond = Condition(FrameLatent(proxy_static.frames[0]), cond.motion_label)

    if cfg.shared_noise:
        gen = as_stream(rng_real, cfg.seed, "vsds/shared")
        eps_real = eps_proxy = gen.standard_normal(real_static.shape)
    else:
        gen_real = as_stream(rng_real, cfg.seed, "vsds/real")
        gen_proxy = as_stream(rng_proxy, cfg.seed, "vsds/proxy")
        eps_real = gen_real.standard_normal(real_static.shape)
        eps_proxy = gen_proxy.standard_normal(proxy_static.shape)

    refined_real = _refine(real_static.frames, cond, denoiser, sched, cfg, eps_real)
    refined_proxy = _refine(proxy_static.frames, proxy_cond, denoiser, sched, cfg, eps_proxy)
    return VideoLatent(refined_real), VideoLatent(refined_proxy)
