import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from panoforge import geometry as g
from panoforge.deblurmetrics import psnr


def random_h(rng, persp=1e-3):
    h = np.eye(3) + rng.normal(0, 0.1, (3, 3))
    h[0, 2], h[1, 2] = rng.uniform(-20, 20, 2)
    h[2, :2] = rng.uniform(-persp, persp, 2)
    h[2, 2] = 1.0
    return h


def test_normalization_invariants(rng):
    for _ in range(20):
        h = g.normalize_homography(random_h(rng) * rng.uniform(-5, 5))
        assert np.linalg.norm(h) == pytest.approx(1.0)
        assert h.flat[np.argmax(np.abs(h))] > 0
        assert abs(np.linalg.det(h)) > 1e-12


def test_normalization_rejects_singular():
    with pytest.raises(ValueError):
        g.normalize_homography(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        g.normalize_homography(np.ones((3, 3)))


def test_transfer_examples():
    assert g.transfer(np.eye(3), 7, -3) == (7.0, -3.0)
    assert g.transfer(g.translation(5, 2), 0, 0) == (5.0, 2.0)


def test_transfer_matches_homogeneous_oracle(rng):
    for _ in range(50):
        h = random_h(rng)
        x, y = rng.uniform(-100, 100, 2)
        v = h @ np.array([x, y, 1.0])
        got = g.transfer(h, x, y)
        assert got == pytest.approx((v[0] / v[2], v[1] / v[2]), rel=1e-12, abs=1e-9)


def test_point_at_infinity():
    h = np.array([[1.0, 0, 0], [0, 1, 0], [1, 0, 0]])
    with pytest.raises(g.PointAtInfinityError):
        g.transfer(h, 0.0, 5.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compose_equals_sequential_transfer(seed):
    rng = np.random.default_rng(seed)
    h1, h2 = random_h(rng), random_h(rng)
    x, y = rng.uniform(-50, 50, 2)
    a = g.transfer(g.compose(h1, h2), x, y)
    b = g.transfer(h1, *g.transfer(h2, x, y))
    assert a == pytest.approx(b, abs=1e-9)


def test_dlt_unit_square_identity():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    h = g.estimate_homography_dlt(sq, sq)
    np.testing.assert_allclose(h, g.identity(), atol=1e-10)


def test_dlt_scaled_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    h = g.estimate_homography_dlt(sq, 2 * sq)
    np.testing.assert_allclose(h, g.normalize_homography(np.diag([2.0, 2.0, 1.0])), atol=1e-10)


@pytest.mark.parametrize("n", [4, 10, 20, 100])
def test_dlt_exact_on_noiseless_points(rng, n):
    for _ in range(10):
        h = random_h(rng)
        pa = rng.uniform(0, 640, (n, 2))
        pb = g.transfer_points(h, pa)
        assert g.relative_error(g.estimate_homography_dlt(pa, pb), h) <= 1e-8


def test_dlt_degenerate_inputs():
    line = np.array([[0, 0], [1, 1], [2, 2], [3, 3]], float)
    with pytest.raises(g.DegenerateConfigurationError):
        g.estimate_homography_dlt(line, line)
    with pytest.raises(g.DegenerateConfigurationError):
        g.estimate_homography_dlt(line[:3], line[:3])
    same = np.zeros((5, 2))
    with pytest.raises(g.DegenerateConfigurationError):
        g.estimate_homography_dlt(same, same)


def test_warp_identity(texture):
    img = texture(60, 80)
    out, alpha = g.warp_image(img, np.eye(3), (0, 0, 80, 60))
    assert alpha.all()
    np.testing.assert_allclose(out, img / 255.0, atol=1e-6)


def test_warp_translation(texture):
    img = texture(60, 80)
    out, alpha = g.warp_image(img, g.translation(10, 0), (0, 0, 80, 60))
    np.testing.assert_allclose(out[:, 10:], img[:, :70] / 255.0, atol=1e-6)
    assert not alpha[:, :10].any() and alpha[:, 10:].all()


def test_warp_alpha_is_exact_inverse_region(rng):
    img = np.full((30, 40), 200, np.uint8)
    h = random_h(rng, 1e-3)
    out, alpha = g.warp_image(img, h, (-20, -20, 90, 80))
    hinv = np.linalg.inv(h)
    gx, gy = np.meshgrid(np.arange(-20, 70.0), np.arange(-20, 60.0))
    w = hinv[2, 0] * gx + hinv[2, 1] * gy + hinv[2, 2]
    sx = (hinv[0, 0] * gx + hinv[0, 1] * gy + hinv[0, 2]) / w
    sy = (hinv[1, 0] * gx + hinv[1, 1] * gy + hinv[1, 2]) / w
    expect = (sx >= 0) & (sx <= 39) & (sy >= 0) & (sy <= 29)
    np.testing.assert_array_equal(alpha, expect)
    assert np.all(out[~alpha] == 0)


def test_warp_roundtrip_psnr():
    yy, xx = np.mgrid[0:200, 0:260]
    smooth = 127 + 60 * np.sin(xx / 23.0) * np.cos(yy / 31.0) + 0.2 * xx
    smooth = ndimage.gaussian_filter(smooth, 2)
    img = np.clip(np.rint(smooth), 0, 255).astype(np.uint8)
    h = np.array([[0.97, 0.08, 6.0], [-0.06, 1.02, -4.0], [2e-5, -1e-5, 1.0]])
    fwd, a1 = g.warp_image(img, h, (0, 0, 260, 200))
    back, a2 = g.warp_image(np.rint(fwd * 255).astype(np.uint8), np.linalg.inv(h), (0, 0, 260, 200))
    # doubly valid: the back-warp sample must land where the forward warp was valid
    valid = a2 & ndimage.binary_erosion(
        g.warp_image(a1.astype(np.uint8) * 255, np.linalg.inv(h), (0, 0, 260, 200))[0] > 0.999, iterations=2)
    got = np.rint(back[valid] * 255)
    assert valid.sum() > 20000
    assert psnr(got, img[valid].astype(float)) >= 40.0


def test_homography_file_roundtrip(tmp_path, rng):
    h = g.normalize_homography(random_h(rng))
    g.write_homography(tmp_path / "H", h)
    np.testing.assert_allclose(g.read_homography(tmp_path / "H"), h, atol=1e-12)
    (tmp_path / "bad").write_text("1 2 3")
    with pytest.raises(ValueError):
        g.read_homography(tmp_path / "bad")
