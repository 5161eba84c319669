"""Image containers, color conversion, pyramids and PGM/PPM/PNG I/O.

Images are plain numpy arrays: ``uint8`` for stored pixels and ``float32`` in
``[0, 1]`` for processing. Shape is ``(H, W)`` for gray and ``(H, W, 3)`` for
RGB, row-major and channel-interleaved.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

GRAY_WEIGHTS = (0.299, 0.587, 0.114)
MIN_LEVEL_SIZE = 8
# Refuse headers that claim absurd rasters rather than attempting the allocation.
MAX_PIXELS = 1 << 28


class ImageFormatError(ValueError):
    """Base class for image decoding failures."""


class UnsupportedFormatError(ImageFormatError):
    pass


class TruncatedFileError(ImageFormatError):
    pass


class DimensionOverflowError(ImageFormatError):
    pass


def validate_u8(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise TypeError(f"expected uint8 image, got {img.dtype}")
    _check_shape(img)
    return img


def validate_f32(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    _check_shape(img)
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains NaN or Inf samples")
    return img


def _check_shape(img: np.ndarray) -> None:
    if img.ndim == 3:
        if img.shape[2] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {img.shape[2]}")
    elif img.ndim != 2:
        raise ValueError(f"expected 2-D or 3-D image array, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be at least 1x1")


def to_float(img: np.ndarray) -> np.ndarray:
    """uint8 -> float32 in [0, 1]; float input is returned as float32."""
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img.astype(np.float32) / np.float32(255.0)
    return img.astype(np.float32, copy=False)


def to_u8(img: np.ndarray) -> np.ndarray:
    """float [0, 1] -> uint8 with rounding and clipping."""
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of a uint8 image, as float32 in [0, 1].

    One-channel input is passed through, scaled by 1/255.
    """
    img = validate_u8(img)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        return (img.astype(np.float64) / 255.0).astype(np.float32)
    r, g, b = (img[:, :, k].astype(np.float64) for k in range(3))
    gray = (GRAY_WEIGHTS[0] * r + GRAY_WEIGHTS[1] * g + GRAY_WEIGHTS[2] * b) / 255.0
    return np.clip(gray, 0.0, 1.0).astype(np.float32)


def gray_u8(img: np.ndarray) -> np.ndarray:
    """Grayscale conversion kept in 8-bit (rounded)."""
    img = validate_u8(img)
    if img.ndim == 2:
        return img
    if img.shape[2] == 1:
        return img[:, :, 0]
    return to_u8(to_grayscale(img))


@dataclass(frozen=True)
class Pyramid:
    levels: tuple
    scale_factor: float

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.levels[k]

    def scale(self, k: int) -> tuple[float, float]:
        """(sx, sy) such that level-0 coordinate = (level-k coordinate + 0.5) * s - 0.5."""
        h0, w0 = self.levels[0].shape[:2]
        hk, wk = self.levels[k].shape[:2]
        return w0 / wk, h0 / hk

    def to_level0(self, k: int, x, y):
        sx, sy = self.scale(k)
        return (np.asarray(x) + 0.5) * sx - 0.5, (np.asarray(y) + 0.5) * sy - 0.5

    def from_level0(self, k: int, x, y):
        sx, sy = self.scale(k)
        return (np.asarray(x) + 0.5) / sx - 0.5, (np.asarray(y) + 0.5) / sy - 0.5


def level_shape(shape: tuple[int, int], scale_factor: float, k: int) -> tuple[int, int]:
    f = scale_factor**k
    return int(math.floor(shape[0] / f + 1e-9)), int(math.floor(shape[1] / f + 1e-9))


def resample_bilinear(img: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resize using pixel-centre alignment, edge-clamped."""
    h, w = img.shape[:2]
    oh, ow = out_shape
    ys = (np.arange(oh) + 0.5) * (h / oh) - 0.5
    xs = (np.arange(ow) + 0.5) * (w / ow) - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    a = img[y0][:, x0]
    b = img[y0][:, x1]
    c = img[y1][:, x0]
    d = img[y1][:, x1]
    top = a + (b - a) * fx
    bot = c + (d - c) * fx
    return (top + (bot - top) * fy).astype(img.dtype, copy=False)


def build_pyramid(img: np.ndarray, levels: int, scale_factor: float) -> Pyramid:
    """Gaussian pyramid with non-integer scale steps.

    Level k has shape ``floor(shape0 / scale_factor**k)``; each level is the
    previous one blurred with sigma = 0.8*sqrt(s^2 - 1) and bilinearly resampled.
    """
    img = validate_f32(to_float(img))
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if scale_factor <= 1:
        raise ValueError("scale_factor must be > 1")
    smallest = level_shape(img.shape[:2], scale_factor, levels - 1)
    if min(smallest) < MIN_LEVEL_SIZE:
        raise ValueError(
            f"level {levels - 1} would be {smallest[1]}x{smallest[0]}, below "
            f"{MIN_LEVEL_SIZE}x{MIN_LEVEL_SIZE}"
        )
    sigma = 0.8 * math.sqrt(scale_factor**2 - 1.0)
    out = [img]
    for k in range(1, levels):
        prev = out[-1].astype(np.float64)
        spatial = (sigma, sigma) + ((0,) if prev.ndim == 3 else ())
        blurred = ndimage.gaussian_filter(prev, spatial, mode="nearest")
        shape = level_shape(img.shape[:2], scale_factor, k)
        out.append(resample_bilinear(blurred, shape).astype(np.float32))
    return Pyramid(tuple(out), float(scale_factor))


# --- file I/O -----------------------------------------------------------------

_PNM_MAGIC = {b"P5": 1, b"P6": 3}


def _pnm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace-separated header tokens, skipping # comments."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise TruncatedFileError("truncated header")
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    if i >= n:
        raise TruncatedFileError("truncated header")
    return tokens, i + 1


def decode_pnm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in _PNM_MAGIC:
        raise UnsupportedFormatError(f"not a binary PGM/PPM file (magic {magic!r})")
    channels = _PNM_MAGIC[magic]
    tokens, offset = _pnm_tokens(data[2:], 3)
    offset += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"malformed header tokens {tokens!r}") from None
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}")
    if width * height * channels > MAX_PIXELS:
        raise DimensionOverflowError(f"{width}x{height}x{channels} exceeds {MAX_PIXELS} samples")
    if not 1 <= maxval <= 255:
        raise UnsupportedFormatError(f"maxval {maxval} not supported (8-bit only)")
    size = width * height * channels
    raster = data[offset : offset + size]
    if len(raster) < size:
        raise TruncatedFileError(f"expected {size} raster bytes, found {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8).copy()
    return arr.reshape(height, width) if channels == 1 else arr.reshape(height, width, 3)


def encode_pnm(img: np.ndarray) -> bytes:
    img = validate_u8(img)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    magic = b"P5" if img.ndim == 2 else b"P6"
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def read_image(path) -> np.ndarray:
    """Load PGM/PPM (native) or PNG (via Pillow) as a uint8 array."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] in _PNM_MAGIC:
        return decode_pnm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    if data[:1] == b"P" and data[1:2].isdigit():
        raise UnsupportedFormatError(f"{path}: only binary P5/P6 netpbm is supported")
    raise UnsupportedFormatError(f"{path}: unrecognised image format")


def _read_png(path: str) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "I;16", "I", "1"):
                if im.mode != "L":
                    raise UnsupportedFormatError(f"{path}: PNG mode {im.mode} is not 8-bit")
                return np.asarray(im, dtype=np.uint8).copy()
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except OSError as exc:
        raise TruncatedFileError(f"{path}: {exc}") from exc


def write_image(path, img: np.ndarray) -> None:
    """Write by extension: .pgm/.ppm/.pnm natively, .png via Pillow."""
    path = os.fspath(path)
    img = validate_u8(img)
    ext = os.path.splitext(path)[1].lower()
    if ext in (".pgm", ".ppm", ".pnm"):
        if ext == ".pgm" and img.ndim == 3 and img.shape[2] == 3:
            raise ValueError("cannot write a 3-channel image as PGM")
        with open(path, "wb") as fh:
            fh.write(encode_pnm(img))
    elif ext == ".png":
        from PIL import Image

        arr = img[:, :, 0] if img.ndim == 3 and img.shape[2] == 1 else img
        Image.fromarray(np.ascontiguousarray(arr)).save(path, format="PNG")
    else:
        raise UnsupportedFormatError(f"cannot write extension {ext!r}")
