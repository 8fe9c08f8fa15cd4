"""A tiny trainable video denoiser and the procedural dataset it learns from.

The dataset renders single-shape videos (wrapped Gaussian blobs or soft
squares) on a toroidal grid, moving according to a small motion vocabulary.
The denoiser is a two-layer tanh MLP applied per frame — each frame sees its
own noised latent plus the conditioning image, a sinusoidal timestep
embedding and a one-hot motion label — followed by a learned L x L temporal
mixing matrix that lets frames exchange information.  Gradients are derived
by hand and optimized with plain SGD; no autograd framework is involved.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .diffusion import Condition, FrameLatent, NoiseSchedule, VideoLatent
from .numerics import read_ltn1, write_ltn1
from .rng import as_stream, stream

MOTION_LABELS = ("static", "right", "left", "up", "down", "grow")

# (dx, dy) in grid cells per unit velocity; y grows downward.
DIRECTIONS = {
    "right": (1.0, 0.0),
    "left": (-1.0, 0.0),
    "up": (0.0, -1.0),
    "down": (0.0, 1.0),
}


def label_id(name: str) -> int:
    try:
        return MOTION_LABELS.index(name)
    except ValueError:
        raise ValueError(f"unknown motion label {name!r}; known: {MOTION_LABELS}") from None


# ---------------------------------------------------------------------------
# Procedural dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetParams:
    """Knobs for the procedural video generator."""

    channels: int = 1
    height: int = 16
    width: int = 16
    frames: int = 16
    shapes: tuple[str, ...] = ("blob", "square")
    labels: tuple[str, ...] = MOTION_LABELS
    velocities: tuple[float, ...] = (1.0,)
    blob_sigma: tuple[float, float] = (1.6, 2.6)
    square_half: tuple[int, ...] = (1, 2)
    grow_rate: float = 0.06

    def __post_init__(self):
        if self.frames < 1 or self.height < 2 or self.width < 2 or self.channels < 1:
            raise ValueError("degenerate grid dimensions")
        for s in self.shapes:
            if s not in ("blob", "square"):
                raise ValueError(f"unknown shape kind {s!r}")
        for name in self.labels:
            label_id(name)
        if not self.velocities or any(v <= 0 for v in self.velocities):
            raise ValueError("velocities must be positive")
        if self.grow_rate <= 0:
            raise ValueError("grow_rate must be positive")


@dataclass(frozen=True, eq=False)
class VideoSample:
    video: VideoLatent
    cond: Condition
    label: str
    shape_kind: str
    velocity: float
    start: tuple[float, float]
    size: float


@dataclass(frozen=True, eq=False)
class MotionDataset:
    samples: tuple[VideoSample, ...]
    params: DatasetParams

    def __len__(self) -> int:
        return len(self.samples)


def _wrapped_delta(coords: np.ndarray, center: float, period: int) -> np.ndarray:
    """Signed toroidal distance from ``center`` to each coordinate."""
    return (coords - center + period / 2.0) % period - period / 2.0


def render_pattern(kind: str, cx: float, cy: float, size: float, height: int, width: int) -> np.ndarray:
    """Render one shape as an (H, W) intensity field in [0, 1].

    Patterns wrap toroidally and are symmetric about their (possibly
    fractional) center, so the intensity centroid equals the center exactly.
    """
    dx = _wrapped_delta(np.arange(width, dtype=np.float64)[None, :], cx, width)
    dy = _wrapped_delta(np.arange(height, dtype=np.float64)[:, None], cy, height)
    if kind == "blob":
        return np.exp(-(dx**2 + dy**2) / (2.0 * size**2))
    if kind == "square":
        # Soft box: full intensity inside the half-width, linear 1-px skirt.
        cov_x = np.clip(size + 0.5 - np.abs(dx), 0.0, 1.0)
        cov_y = np.clip(size + 0.5 - np.abs(dy), 0.0, 1.0)
        return cov_x * cov_y
    raise ValueError(f"unknown shape kind {kind!r}")


def render_video(
    label: str,
    start: tuple[float, float],
    velocity: float,
    kind: str,
    size: float,
    params: DatasetParams,
) -> VideoLatent:
    """Render the procedural video for one (label, trajectory) combination.

    Translation labels move the shape ``velocity`` cells per frame along the
    label's axis (toroidal wrap); ``static`` keeps it fixed; ``grow`` scales
    the size by ``1 + grow_rate * l``.  Intensities in [0, 1] map to latents
    in [-1, 1].
    """
    if label not in params.labels and label not in MOTION_LABELS:
        raise ValueError(f"unknown motion label {label!r}")
    cx0, cy0 = start
    frames = np.empty((params.frames, params.channels, params.height, params.width))
    for l in range(params.frames):
        if label in DIRECTIONS:
            ux, uy = DIRECTIONS[label]
            cx = (cx0 + l * velocity * ux) % params.width
            cy = (cy0 + l * velocity * uy) % params.height
            size_l = size
        elif label == "grow":
            cx, cy = cx0, cy0
            size_l = size * (1.0 + params.grow_rate * l)
        else:  # static
            cx, cy = cx0, cy0
            size_l = size
        field01 = render_pattern(kind, cx, cy, size_l, params.height, params.width)
        frames[l] = 2.0 * field01 - 1.0
    return VideoLatent(frames)


def generate_dataset(
    n: int,
    params: DatasetParams = DatasetParams(),
    seed: int | np.random.Generator = 0,
) -> MotionDataset:
    """Draw ``n`` labelled videos; the condition of each is its own first frame."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, "dataset")
    samples = []
    for _ in range(n):
        label = params.labels[rng.integers(len(params.labels))]
        kind = params.shapes[rng.integers(len(params.shapes))]
        velocity = float(params.velocities[rng.integers(len(params.velocities))])
        if kind == "blob":
            lo, hi = params.blob_sigma
            size = float(rng.uniform(lo, hi))
        else:
            size = float(params.square_half[rng.integers(len(params.square_half))])
        start = (float(rng.uniform(0, params.width)), float(rng.uniform(0, params.height)))
        video = render_video(label, start, velocity, kind, size, params)
        cond = Condition(video.frame(0), label_id(label))
        samples.append(VideoSample(video, cond, label, kind, velocity, start, size))
    return MotionDataset(tuple(samples), params)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


def time_embedding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal embedding of a diffusion step, dim/2 sin + dim/2 cos."""
    if dim % 2 != 0 or dim < 2:
        raise ValueError("embedding dim must be even and >= 2")
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = t * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


class ToyDenoiser:
    """Per-frame tanh MLP with a learned temporal mixing matrix.

    Per frame l the input row is [flat z_t frame | flat cond image | t-embed
    | one-hot label]; hidden H1 = tanh(X W1 + b1); per-frame output
    Y = H1 W2 + b2; the final prediction mixes frames: OUT = M Y.  W2 starts
    at zero so an untrained model predicts exactly zero noise, and M starts
    at identity so early training is frame-local.
    """

    def __init__(
        self,
        frames: int = 16,
        channels: int = 1,
        height: int = 16,
        width: int = 16,
        hidden: int = 128,
        t_embed: int = 16,
        n_labels: int = len(MOTION_LABELS),
        seed: int = 0,
    ):
        if min(frames, channels, height, width, hidden, n_labels) < 1:
            raise ValueError("all model dimensions must be >= 1")
        self.frames = frames
        self.channels = channels
        self.height = height
        self.width = width
        self.hidden = hidden
        self.t_embed = t_embed
        self.n_labels = n_labels
        self.frame_dim = channels * height * width
        self.in_dim = 2 * self.frame_dim + t_embed + n_labels

        rng = stream(seed, "denoiser-init")
        self.w1 = rng.standard_normal((self.in_dim, hidden)) / np.sqrt(self.in_dim)
        self.b1 = np.zeros(hidden)
        self.w2 = np.zeros((hidden, self.frame_dim))
        self.b2 = np.zeros(self.frame_dim)
        self.mix = np.eye(frames)

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays, keyed by layer name."""
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2, "mix": self.mix}

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    @property
    def video_shape(self) -> tuple[int, int, int, int]:
        return (self.frames, self.channels, self.height, self.width)

    def _check_cond(self, cond: Condition) -> None:
        if cond.image.shape != (self.channels, self.height, self.width):
            raise ValueError(f"condition image shape {cond.image.shape} != {(self.channels, self.height, self.width)}")
        if cond.motion_label >= self.n_labels:
            raise ValueError(f"motion_label {cond.motion_label} out of range (< {self.n_labels})")

    def _input_rows(self, z_flat: np.ndarray, cond: Condition, t: int) -> np.ndarray:
        """Assemble the (L, in_dim) input block for one video."""
        L = self.frames
        cond_flat = np.broadcast_to(cond.image.grid.reshape(1, -1), (L, self.frame_dim))
        temb = np.broadcast_to(time_embedding(t, self.t_embed), (L, self.t_embed))
        onehot = np.zeros((L, self.n_labels))
        onehot[:, cond.motion_label] = 1.0
        return np.concatenate([z_flat, cond_flat, temb, onehot], axis=1)

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """x: (..., L, in_dim) -> (out, h1, y), out mixed across frames."""
        h1 = np.tanh(x @ self.w1 + self.b1)
        y = h1 @ self.w2 + self.b2
        out = np.einsum("lm,...mf->...lf", self.mix, y)
        return out, h1, y

    def predict_noise(self, z_t: VideoLatent, cond: Condition, t: int) -> VideoLatent:
        if z_t.shape != self.video_shape:
            raise ValueError(f"latent shape {z_t.shape} != model shape {self.video_shape}")
        self._check_cond(cond)
        if t < 1:
            raise ValueError(f"t must be >= 1, got {t}")
        x = self._input_rows(z_t.frames.reshape(self.frames, -1), cond, t)
        out, _, _ = self._forward(x)
        return VideoLatent(out.reshape(self.video_shape))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class TrainingDiverged(RuntimeError):
    """Raised when a loss or parameter stops being finite during training."""


@dataclass
class TrainResult:
    losses: np.ndarray  # per-epoch mean per-sample loss
    final_loss: float


def _batch_loss_and_grads(
    model: ToyDenoiser,
    x: np.ndarray,  # (B, L, in_dim)
    eps_flat: np.ndarray,  # (B, L, frame_dim)
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean-squared-error loss over a batch and its exact parameter gradients.

    The scalar objective is the mean over every output element; the reported
    per-sample loss elsewhere is this value times L * frame_dim.
    """
    out, h1, y = model._forward(x)
    resid = out - eps_flat
    n_elem = resid.size
    loss = float((resid**2).sum() / n_elem)

    g = 2.0 * resid / n_elem  # dJ/d(out)
    d_mix = np.einsum("blf,bmf->lm", g, y)
    dy = np.einsum("ml,bmf->blf", model.mix, g)
    d_w2 = np.einsum("blh,blf->hf", h1, dy)
    d_b2 = dy.sum(axis=(0, 1))
    dh1 = dy @ model.w2.T
    da = dh1 * (1.0 - h1**2)
    d_w1 = np.einsum("bld,blh->dh", x, da)
    d_b1 = da.sum(axis=(0, 1))
    return loss, {"w1": d_w1, "b1": d_b1, "w2": d_w2, "b2": d_b2, "mix": d_mix}


def _stack_inputs(
    model: ToyDenoiser,
    dataset: MotionDataset,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pre-flatten the dataset into (videos, cond images, label one-hots)."""
    n = len(dataset)
    z0 = np.stack([s.video.frames.reshape(model.frames, -1) for s in dataset.samples])
    cond_img = np.stack([s.cond.image.grid.reshape(-1) for s in dataset.samples])
    onehot = np.zeros((n, model.n_labels))
    for i, s in enumerate(dataset.samples):
        model._check_cond(s.cond)
        onehot[i, s.cond.motion_label] = 1.0
    return z0, cond_img, onehot


def _assemble_batch(
    model: ToyDenoiser,
    z0: np.ndarray,
    cond_img: np.ndarray,
    onehot: np.ndarray,
    ts: np.ndarray,
    eps: np.ndarray,
    sched: NoiseSchedule,
) -> np.ndarray:
    """Noise each sample to its own step t and assemble (B, L, in_dim) inputs."""
    ab = sched.alpha_bars[ts - 1][:, None, None]
    z_t = np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps
    b, L = z0.shape[0], model.frames
    cond_block = np.broadcast_to(cond_img[:, None, :], (b, L, model.frame_dim))
    temb = np.stack([time_embedding(int(t), model.t_embed) for t in ts])
    temb_block = np.broadcast_to(temb[:, None, :], (b, L, model.t_embed))
    onehot_block = np.broadcast_to(onehot[:, None, :], (b, L, model.n_labels))
    return np.concatenate([z_t, cond_block, temb_block, onehot_block], axis=2)


def train(
    model: ToyDenoiser,
    dataset: MotionDataset,
    sched: NoiseSchedule,
    epochs: int = 10,
    lr: float = 0.5,
    seed: int = 0,
    batch_size: int = 8,
) -> tuple[ToyDenoiser, TrainResult]:
    """SGD on noise prediction: for random (sample, t, eps) predict eps.

    Returns the same model object (updated in place) plus the per-epoch loss
    curve, where loss is the mean per-sample sum of squared errors.
    """
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch_size must be >= 1")
    rng = as_stream(None, seed, "train")
    z0_all, cond_all, onehot_all = _stack_inputs(model, dataset)
    n = len(dataset)
    per_sample_scale = model.frames * model.frame_dim
    params = model.parameters()
    losses = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            ts = rng.integers(1, sched.steps + 1, size=idx.size)
            eps = rng.standard_normal((idx.size, model.frames, model.frame_dim))
            x = _assemble_batch(model, z0_all[idx], cond_all[idx], onehot_all[idx], ts, eps, sched)
            loss, grads = _batch_loss_and_grads(model, x, eps)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}")
            for name, p in params.items():
                p -= lr * grads[name]
                if not np.isfinite(p).all():
                    raise TrainingDiverged(f"non-finite parameter {name!r} at epoch {epoch + 1}")
            epoch_loss += loss * idx.size
        losses.append(epoch_loss / n * per_sample_scale)
    curve = np.asarray(losses)
    return model, TrainResult(curve, float(curve[-1]))


def evaluate_loss(
    model: ToyDenoiser,
    dataset: MotionDataset,
    sched: NoiseSchedule,
    seed: int = 0,
    rounds: int = 4,
) -> float:
    """Mean per-sample noise-prediction loss over fresh (t, eps) draws."""
    rng = stream(seed, "eval")
    z0_all, cond_all, onehot_all = _stack_inputs(model, dataset)
    n = len(dataset)
    total = 0.0
    for _ in range(rounds):
        ts = rng.integers(1, sched.steps + 1, size=n)
        eps = rng.standard_normal((n, model.frames, model.frame_dim))
        x = _assemble_batch(model, z0_all, cond_all, onehot_all, ts, eps, sched)
        loss, _ = _batch_loss_and_grads(model, x, eps)
        total += loss
    return total / rounds * model.frames * model.frame_dim


def gradient_check(
    model: ToyDenoiser,
    dataset: MotionDataset,
    sched: NoiseSchedule,
    n_coords: int = 20,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Compare analytic gradients against central differences.

    Probes ``n_coords`` randomly chosen parameter coordinates on a single
    fixed batch and returns the worst relative error.
    """
    rng = stream(seed, "gradcheck")
    z0_all, cond_all, onehot_all = _stack_inputs(model, dataset)
    idx = rng.permutation(len(dataset))[: min(4, len(dataset))]
    ts = rng.integers(1, sched.steps + 1, size=idx.size)
    eps = rng.standard_normal((idx.size, model.frames, model.frame_dim))
    x = _assemble_batch(model, z0_all[idx], cond_all[idx], onehot_all[idx], ts, eps, sched)
    _, grads = _batch_loss_and_grads(model, x, eps)

    params = model.parameters()
    names = sorted(params)
    worst = 0.0
    for _ in range(n_coords):
        name = names[rng.integers(len(names))]
        p = params[name]
        flat_i = int(rng.integers(p.size))
        orig = p.flat[flat_i]
        p.flat[flat_i] = orig + step
        lp, _ = _batch_loss_and_grads(model, x, eps)
        p.flat[flat_i] = orig - step
        lm, _ = _batch_loss_and_grads(model, x, eps)
        p.flat[flat_i] = orig
        numeric = (lp - lm) / (2.0 * step)
        analytic = grads[name].flat[flat_i]
        denom = max(abs(numeric) + abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def schedule_digest(sched: NoiseSchedule) -> str:
    import hashlib

    return hashlib.sha256(sched.betas.tobytes()).hexdigest()[:16]


def save_checkpoint(
    model: ToyDenoiser,
    ckpt_dir,
    dataset_params: DatasetParams | None = None,
    sched: NoiseSchedule | None = None,
    extra: dict | None = None,
) -> Path:
    """Write one LTN1 file per layer plus a JSON manifest; returns the dir."""
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    layers = {}
    for name, p in model.parameters().items():
        write_ltn1(ckpt_dir / f"{name}.ltn1", p)
        layers[name] = list(p.shape)
    manifest = {
        "format": "toydenoiser-v1",
        "frames": model.frames,
        "channels": model.channels,
        "height": model.height,
        "width": model.width,
        "hidden": model.hidden,
        "t_embed": model.t_embed,
        "n_labels": model.n_labels,
        "labels": list(MOTION_LABELS[: model.n_labels]),
        "layers": layers,
        "dataset": asdict(dataset_params) if dataset_params else None,
        "schedule_digest": schedule_digest(sched) if sched else None,
    }
    if extra:
        manifest.update(extra)
    (ckpt_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ckpt_dir


def load_checkpoint(ckpt_dir) -> tuple[ToyDenoiser, dict]:
    """Rebuild a ToyDenoiser from ``save_checkpoint`` output."""
    ckpt_dir = Path(ckpt_dir)
    manifest_path = ckpt_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in checkpoint dir: {ckpt_dir}")
    manifest = json.loads(manifest_path.read_text())
    model = ToyDenoiser(
        frames=manifest["frames"],
        channels=manifest["channels"],
        height=manifest["height"],
        width=manifest["width"],
        hidden=manifest["hidden"],
        t_embed=manifest["t_embed"],
        n_labels=manifest["n_labels"],
    )
    params = model.parameters()
    for name, shape in manifest["layers"].items():
        arr = read_ltn1(ckpt_dir / f"{name}.ltn1")
        if list(arr.shape) != shape or name not in params:
            raise ValueError(f"checkpoint layer {name!r} has shape {arr.shape}, manifest says {shape}")
        params[name][...] = arr
    return model, manifest
