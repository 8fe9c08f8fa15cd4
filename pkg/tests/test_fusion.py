"""Frame-indexed fusion: mixing schedule, slerp geometry, uniform baseline."""

import numpy as np
import pytest

from latent_awaken.diffusion import VideoLatent
from latent_awaken.fusion import (
    AngleScope,
    FusionConfig,
    FusionMode,
    beta_schedule,
    fuse,
    slerp_fuse,
    uniform_fuse,
)
from latent_awaken.rng import stream

PER_FRAME = FusionConfig(angle_scope=AngleScope.PER_FRAME)
FRAME_SHAPE = (1, 4, 4)
DIM = 16


def video_from_vectors(*vecs):
    return VideoLatent(np.stack([np.asarray(v, dtype=np.float64).reshape(FRAME_SHAPE) for v in vecs]))


def tiled_video(vec, frames=3):
    return video_from_vectors(*([vec] * frames))


def unit_pair(gen, theta):
    """Two unit vectors with an exact angle theta between them."""
    u = gen.standard_normal(DIM)
    u /= np.linalg.norm(u)
    w = gen.standard_normal(DIM)
    w -= (w @ u) * u
    w /= np.linalg.norm(w)
    return u, np.cos(theta) * u + np.sin(theta) * w


def random_video(seed, frames=5, scale=1.0):
    return VideoLatent(stream(seed, "fusion-test").standard_normal((frames, *FRAME_SHAPE)) * scale)


# ---------------------------------------------------------------------------
# mixing schedule
# ---------------------------------------------------------------------------


def test_beta_schedule_values():
    b = beta_schedule(16)
    assert b[0] == 0.0
    assert b[-1] == 1.0
    assert abs(b[5] - 1.0 / 3.0) < 1e-15
    assert np.array_equal(beta_schedule(2), [0.0, 1.0])
    assert np.array_equal(beta_schedule(1), [0.0])
    with pytest.raises(ValueError):
        beta_schedule(0)


# ---------------------------------------------------------------------------
# slerp properties
# ---------------------------------------------------------------------------


def test_slerp_equal_inputs_is_identity():
    v = random_video(1)
    for cfg in (FusionConfig(), PER_FRAME):
        out = slerp_fuse(v, v, cfg)
        assert np.array_equal(out.frames, v.frames)


def test_slerp_endpoints_exact():
    zr, zs = random_video(2), random_video(3)
    for cfg in (FusionConfig(), PER_FRAME):
        out = slerp_fuse(zr, zs, cfg)
        assert np.abs(out.frames[0] - zr.frames[0]).max() <= 1e-12
        assert np.abs(out.frames[-1] - zs.frames[-1]).max() <= 1e-12


def test_slerp_orthogonal_midframe():
    # Unit orthogonal endpoints: the middle of the arc is (u+v)/sqrt(2),
    # still on the unit sphere.
    u = np.zeros(DIM)
    u[0] = 1.0
    v = np.zeros(DIM)
    v[3] = 1.0
    for cfg in (FusionConfig(), PER_FRAME):
        out = slerp_fuse(tiled_video(u), tiled_video(v), cfg)
        mid = out.frames[1].ravel()
        assert np.abs(mid - (u + v) / np.sqrt(2.0)).max() < 1e-12
        assert abs(np.linalg.norm(mid) - 1.0) < 1e-12


def test_slerp_preserves_norm_of_equal_norm_frames():
    gen = stream(4, "fusion-test")
    for theta in (0.3, 1.2, 2.4):
        u, v = unit_pair(gen, theta)
        zr, zs = tiled_video(2.5 * u, frames=7), tiled_video(2.5 * v, frames=7)
        for cfg in (FusionConfig(), PER_FRAME):
            out = slerp_fuse(zr, zs, cfg)
            norms = np.linalg.norm(out.frames.reshape(7, -1), axis=1)
            assert np.abs(norms - 2.5).max() <= 1e-9


def test_slerp_norm_dominates_lerp():
    # The arc stays on the sphere while the chord cuts inside it, so for
    # equal-norm inputs every slerp frame is at least as long as the lerp one.
    gen = stream(5, "fusion-test")
    for _ in range(100):
        theta = gen.uniform(0.1, 3.0)
        u, v = unit_pair(gen, theta)
        zr, zs = tiled_video(u), tiled_video(v)
        arc = slerp_fuse(zr, zs, PER_FRAME).frames.reshape(3, -1)
        chord = uniform_fuse(zr, zs).frames.reshape(3, -1)
        arc_norms = np.linalg.norm(arc, axis=1)
        chord_norms = np.linalg.norm(chord, axis=1)
        assert (arc_norms >= chord_norms - 1e-12).all()
        assert arc_norms[1] > chord_norms[1]


def test_slerp_reversal_symmetry():
    # For frame-constant inputs, swapping them and reading the frames
    # backwards walks the same arc (beta and 1 - beta trade places).
    gen = stream(6, "fusion-test")
    u, v = unit_pair(gen, 1.1)
    zr, zs = tiled_video(1.3 * u, frames=5), tiled_video(0.8 * v, frames=5)
    for cfg in (FusionConfig(), PER_FRAME):
        fwd = slerp_fuse(zr, zs, cfg)
        rev = slerp_fuse(zs, zr, cfg)
        assert np.abs(fwd.frames - rev.frames[::-1]).max() <= 1e-12


def test_slerp_rejects_antipodal():
    zr = random_video(8)
    zs = VideoLatent(-zr.frames)
    for cfg in (FusionConfig(), PER_FRAME):
        with pytest.raises(ValueError, match="antipodal"):
            slerp_fuse(zr, zs, cfg)


def test_slerp_rejects_zero_norm():
    zero = VideoLatent(np.zeros((3, *FRAME_SHAPE)))
    v = random_video(9, frames=3)
    with pytest.raises(ValueError, match="cannot measure global"):
        slerp_fuse(zero, v, FusionConfig())
    # only one frame is zero: per-frame mode names it
    partial = v.frames.copy()
    partial[1] = 0.0
    with pytest.raises(ValueError, match="frame 1"):
        slerp_fuse(VideoLatent(partial), v, PER_FRAME)


# ---------------------------------------------------------------------------
# uniform baseline and dispatch
# ---------------------------------------------------------------------------


def test_uniform_fuse_examples():
    a = np.zeros(DIM)
    a[0] = 2.0
    b = np.zeros(DIM)
    b[1] = 2.0
    out = uniform_fuse(tiled_video(a), tiled_video(b))
    mid = out.frames[1].ravel()
    assert mid[0] == 1.0 and mid[1] == 1.0
    assert np.array_equal(out.frames[0].ravel(), a)
    assert np.array_equal(out.frames[-1].ravel(), b)

    v = random_video(10)
    assert np.array_equal(uniform_fuse(v, v).frames, v.frames)


def test_shape_mismatch_rejected():
    a = random_video(11, frames=3)
    b = VideoLatent(np.zeros((4, *FRAME_SHAPE)))
    with pytest.raises(ValueError, match="shape mismatch"):
        slerp_fuse(a, b)
    with pytest.raises(ValueError, match="shape mismatch"):
        uniform_fuse(a, b)


def test_fusion_config_validation():
    with pytest.raises(ValueError):
        FusionConfig(epsilon_theta=0.0)
    with pytest.raises(ValueError):
        FusionConfig(epsilon_theta=-1e-9)


def test_fuse_dispatches_on_mode():
    zr, zs = random_video(12), random_video(13)
    by_slerp = fuse(zr, zs, FusionConfig(mode=FusionMode.SLERP))
    by_uniform = fuse(zr, zs, FusionConfig(mode=FusionMode.UNIFORM))
    assert np.array_equal(by_slerp.frames, slerp_fuse(zr, zs).frames)
    assert np.array_equal(by_uniform.frames, uniform_fuse(zr, zs).frames)
    assert not np.array_equal(by_slerp.frames, by_uniform.frames)
