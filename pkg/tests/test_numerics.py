import numpy as np
import pytest

from latent_awaken.numerics import (
    angle_between,
    dot,
    norm,
    principal_axis_stats,
    read_ltn1,
    sqrtm_psd,
    write_ltn1,
)
from latent_awaken.rng import stream


def test_dot_orthogonal_is_zero():
    assert dot(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_dot_with_self_is_squared_norm():
    x = stream(0, "dot").standard_normal(17)
    assert dot(x, x) == pytest.approx(norm(x) ** 2, rel=1e-12)


def test_dot_hand_sum():
    assert dot(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0])) == 32.0


def test_dot_symmetric_and_bilinear():
    g = stream(1, "dot")
    a, b, c = g.standard_normal((3, 40))
    assert dot(a, b) == pytest.approx(dot(b, a), rel=1e-12)
    lhs = dot(2.5 * a + b, c)
    assert lhs == pytest.approx(2.5 * dot(a, c) + dot(b, c), rel=1e-10)


def test_dot_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        dot(np.zeros(3), np.zeros(4))


def test_angle_identical_vectors():
    v = np.array([0.3, -1.2, 0.5])
    assert angle_between(v, v) == pytest.approx(0.0, abs=1e-7)


def test_angle_orthogonal_and_antipodal():
    e0 = np.array([1.0, 0.0])
    e1 = np.array([0.0, 1.0])
    assert angle_between(e0, e1) == pytest.approx(np.pi / 2, abs=1e-12)
    assert angle_between(e0, -e0) == pytest.approx(np.pi, abs=1e-12)


def test_angle_scale_invariant():
    g = stream(2, "angle")
    for _ in range(20):
        v = g.standard_normal(9)
        k = float(g.uniform(0.01, 100.0))
        assert angle_between(v, k * v) == pytest.approx(0.0, abs=1e-6)


def test_angle_rejects_zero_norm():
    with pytest.raises(ValueError):
        angle_between(np.zeros(4), np.ones(4))


def test_principal_axis_collinear_points():
    ts = np.linspace(-2.0, 3.0, 11)
    pts = np.outer(ts, np.array([1.0, 2.0, -0.5]))
    ratio, proj = principal_axis_stats(pts)
    assert ratio == pytest.approx(1.0, abs=1e-12)
    # Projections recover the 1-d parameterization up to sign and offset.
    order = np.argsort(proj)
    assert np.array_equal(order, np.arange(11)) or np.array_equal(order, np.arange(11)[::-1])


def test_principal_axis_isotropic_cloud():
    # 10k standard-normal points in 2-d: the leading axis holds about half
    # the variance, with O(1/sqrt(n)) fluctuation.
    pts = stream(3, "iso").standard_normal((10_000, 2))
    ratio, _ = principal_axis_stats(pts)
    assert abs(ratio - 0.5) < 0.03


def test_principal_axis_repeated_point_degenerate():
    pts = np.full((5, 3), 0.7)
    ratio, proj = principal_axis_stats(pts)
    assert ratio == 0.0
    assert np.array_equal(proj, np.zeros(5))


def test_principal_axis_rotation_invariant():
    g = stream(4, "rot")
    pts = g.standard_normal((60, 6)) * np.array([3.0, 2.0, 1.0, 0.5, 0.2, 0.1])
    q, _ = np.linalg.qr(g.standard_normal((6, 6)))
    r0, _ = principal_axis_stats(pts)
    r1, _ = principal_axis_stats(pts @ q.T)
    assert r1 == pytest.approx(r0, abs=1e-9)


def test_principal_axis_needs_two_points():
    with pytest.raises(ValueError):
        principal_axis_stats(np.ones((1, 4)))


def test_sqrtm_psd_squares_back():
    g = stream(5, "sqrtm")
    a = g.standard_normal((6, 6))
    m = a @ a.T + 0.1 * np.eye(6)
    s = sqrtm_psd(m)
    assert np.allclose(s @ s, m, atol=1e-10)
    assert np.allclose(s, s.T, atol=1e-12)


def test_sqrtm_psd_rejects_asymmetric():
    m = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        sqrtm_psd(m)


def test_sqrtm_psd_rejects_negative_definite():
    with pytest.raises(ValueError):
        sqrtm_psd(np.diag([1.0, -0.5]))


def test_ltn1_round_trip_bit_identical(tmp_path):
    g = stream(6, "ltn1")
    arr = g.standard_normal((3, 4, 5))
    path = tmp_path / "t.ltn1"
    write_ltn1(path, arr)
    back = read_ltn1(path)
    assert back.shape == (3, 4, 5)
    assert back.tobytes() == arr.tobytes()


def test_ltn1_bad_magic_names_file(tmp_path):
    path = tmp_path / "bad.ltn1"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="bad.ltn1"):
        read_ltn1(path)


def test_ltn1_truncated_payload(tmp_path):
    path = tmp_path / "cut.ltn1"
    write_ltn1(path, np.ones((4, 4)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-9])
    with pytest.raises(ValueError):
        read_ltn1(path)


def test_ltn1_rejects_non_finite(tmp_path):
    with pytest.raises(ValueError):
        write_ltn1(tmp_path / "nan.ltn1", np.array([1.0, np.nan]))
