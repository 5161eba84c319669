import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from panoforge import imagecore as ic


def test_grayscale_examples():
    assert np.all(ic.to_grayscale(np.zeros((2, 2, 3), np.uint8)) == 0.0)
    assert ic.to_grayscale(np.full((1, 1, 3), 255, np.uint8))[0, 0] == pytest.approx(1.0, abs=1e-6)
    red = np.array([[[255, 0, 0]]], np.uint8)
    assert ic.to_grayscale(red)[0, 0] == pytest.approx(0.299, abs=1e-6)


def test_grayscale_single_channel_scales():
    g = np.array([[0, 51, 255]], np.uint8)
    np.testing.assert_allclose(ic.to_grayscale(g), [[0, 0.2, 1.0]], atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9), st.just(3))))
def test_grayscale_range(img):
    g = ic.to_grayscale(img)
    assert g.shape == img.shape[:2]
    assert g.min() >= 0.0 and g.max() <= 1.0


def test_validation_rejects_bad_arrays():
    with pytest.raises(TypeError):
        ic.validate_u8(np.zeros((2, 2), np.float32))
    with pytest.raises(ValueError):
        ic.validate_f32(np.array([[np.nan]], np.float32))
    with pytest.raises(ValueError):
        ic.validate_u8(np.zeros((0, 3), np.uint8))


def test_pyramid_single_level_is_input(rng):
    img = rng.random((64, 64)).astype(np.float32)
    pyr = ic.build_pyramid(img, 1, 1.2)
    assert len(pyr) == 1
    np.testing.assert_array_equal(pyr[0], img)


def test_pyramid_dimensions_factor_two(rng):
    pyr = ic.build_pyramid(rng.random((64, 64)).astype(np.float32), 3, 2.0)
    assert [lvl.shape for lvl in pyr.levels] == [(64, 64), (32, 32), (16, 16)]


def test_pyramid_level_shapes_follow_floor():
    pyr = ic.build_pyramid(np.zeros((480, 640), np.float32), 8, 1.2)
    for k, lvl in enumerate(pyr.levels):
        assert lvl.shape == (int(480 / 1.2**k), int(640 / 1.2**k))


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1), st.integers(1, 4), st.floats(1.1, 2.0))
def test_pyramid_constant_stays_constant(value, levels, factor):
    img = np.full((80, 90), value, np.float32)
    pyr = ic.build_pyramid(img, levels, factor)
    for lvl in pyr.levels:
        assert np.abs(lvl - np.float32(value)).max() < 1e-6


def test_pyramid_rejects_tiny_levels():
    with pytest.raises(ValueError):
        ic.build_pyramid(np.zeros((16, 16), np.float32), 3, 2.0)
    with pytest.raises(ValueError):
        ic.build_pyramid(np.zeros((16, 16), np.float32), 1, 1.0)


def test_pyramid_coordinate_mapping_roundtrip():
    pyr = ic.build_pyramid(np.zeros((100, 120), np.float32), 3, 1.5)
    x, y = pyr.to_level0(2, 10.0, 7.0)
    bx, by = pyr.from_level0(2, x, y)
    assert bx == pytest.approx(10.0) and by == pytest.approx(7.0)


def test_p6_roundtrip_bytes(tmp_path, rng):
    img = rng.integers(0, 256, (3, 3, 3), dtype=np.uint8)
    p = tmp_path / "a.ppm"
    ic.write_image(p, img)
    data = p.read_bytes()
    back = ic.read_image(p)
    np.testing.assert_array_equal(back, img)
    ic.write_image(tmp_path / "b.ppm", back)
    assert (tmp_path / "b.ppm").read_bytes() == data


def test_p5_header_decoding():
    img = ic.decode_pnm(b"P5 2 2 255\n" + bytes([1, 2, 3, 4]))
    assert img.shape == (2, 2)
    np.testing.assert_array_equal(img, [[1, 2], [3, 4]])


def test_p5_with_comments():
    img = ic.decode_pnm(b"P5\n# made by hand\n2 1\n# depth\n255\n" + bytes([9, 8]))
    np.testing.assert_array_equal(img, [[9, 8]])


def test_error_kinds_are_distinct():
    with pytest.raises(ic.TruncatedFileError):
        ic.decode_pnm(b"P5 2 2 255\n" + bytes([1, 2]))
    with pytest.raises(ic.UnsupportedFormatError):
        ic.decode_pnm(b"P2 2 2 255\n1 2 3 4")
    with pytest.raises(ic.UnsupportedFormatError):
        ic.decode_pnm(b"P5 2 2 65535\n" + bytes(8))
    with pytest.raises(ic.DimensionOverflowError):
        ic.decode_pnm(b"P5 100000 100000 255\n")
    for a, b in [(ic.TruncatedFileError, ic.UnsupportedFormatError), (ic.TruncatedFileError, ic.DimensionOverflowError)]:
        assert not issubclass(a, b) and not issubclass(b, a)


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.uint8, st.one_of(
    st.tuples(st.integers(1, 12), st.integers(1, 12)),
    st.tuples(st.integers(1, 12), st.integers(1, 12), st.just(3)),
)))
def test_pnm_roundtrip_property(img):
    np.testing.assert_array_equal(ic.decode_pnm(ic.encode_pnm(img)), img)


def test_png_roundtrip(tmp_path, rng):
    for img in (rng.integers(0, 256, (5, 7), dtype=np.uint8), rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)):
        p = tmp_path / "x.png"
        ic.write_image(p, img)
        np.testing.assert_array_equal(ic.read_image(p), img)


def test_unknown_format(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"hello world")
    with pytest.raises(ic.UnsupportedFormatError):
        ic.read_image(p)
    with pytest.raises(ic.UnsupportedFormatError):
        ic.write_image(tmp_path / "x.jpg", np.zeros((2, 2), np.uint8))
