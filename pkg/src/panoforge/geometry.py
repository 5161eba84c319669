"""Planar homographies: normalization, point transfer, normalized DLT, warping.

A homography is a ``(3, 3)`` float64 array mapping homogeneous points
``[x, y, 1]`` of a source image to a target image.
"""
from __future__ import annotations

import os

import numpy as np

from .imagecore import to_float

DET_EPS = 1e-12
W_EPS = 1e-12
DEGENERATE_RTOL = 1e-8


class DegenerateConfigurationError(ValueError):
    pass


class PointAtInfinityError(ValueError):
    pass


def normalize_homography(h) -> np.ndarray:
    """Scale to unit Frobenius norm with the largest-magnitude entry positive."""
    h = np.asarray(h, dtype=np.float64).reshape(3, 3)
    norm = np.linalg.norm(h)
    if not np.isfinite(norm) or norm == 0:
        raise ValueError("homography has zero or non-finite norm")
    h = h / norm
    k = np.argmax(np.abs(h))
    if h.flat[k] < 0:
        h = -h
    if abs(np.linalg.det(h)) <= DET_EPS:
        raise ValueError("homography is singular")
    return h


def identity() -> np.ndarray:
    return normalize_homography(np.eye(3))


def translation(tx: float, ty: float) -> np.ndarray:
    return np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])


def compose(h1, h2) -> np.ndarray:
    """Homography applying ``h2`` first, then ``h1``."""
    return normalize_homography(np.asarray(h1) @ np.asarray(h2))


def invert(h) -> np.ndarray:
    return normalize_homography(np.linalg.inv(np.asarray(h, dtype=np.float64)))


def transfer(h, x, y):
    """Map points through ``h``; accepts scalars or arrays.

    Raises PointAtInfinityError if any point maps to |w'| <= 1e-12.
    """
    h = np.asarray(h, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
    if np.any(np.abs(w) <= W_EPS):
        raise PointAtInfinityError("point maps to infinity")
    xo = (h[0, 0] * x + h[0, 1] * y + h[0, 2]) / w
    yo = (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / w
    if xo.ndim == 0:
        return float(xo), float(yo)
    return xo, yo


def transfer_points(h, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    x, y = transfer(h, pts[:, 0], pts[:, 1])
    return np.stack([np.atleast_1d(x), np.atleast_1d(y)], axis=1)


def _hartley(pts: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin, mean distance sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if d <= 0:
        raise DegenerateConfigurationError("all points coincide")
    s = np.sqrt(2.0) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def estimate_homography_dlt(points_a, points_b) -> np.ndarray:
    """Least-squares homography mapping ``points_a`` onto ``points_b``.

    Both point sets are Hartley-normalized; the solution is the right singular
    vector of the 2n x 9 design matrix with the smallest singular value.
    """
    pa = np.asarray(points_a, dtype=np.float64).reshape(-1, 2)
    pb = np.asarray(points_b, dtype=np.float64).reshape(-1, 2)
    if len(pa) != len(pb):
        raise ValueError("point sets differ in length")
    if len(pa) < 4:
        raise DegenerateConfigurationError(f"need >= 4 correspondences, got {len(pa)}")
    ta = _hartley(pa)
    tb = _hartley(pb)
    a = pa @ ta[:2, :2].T + ta[:2, 2]
    b = pb @ tb[:2, :2].T + tb[:2, 2]
    n = len(a)
    x, y = a[:, 0], a[:, 1]
    u, v = b[:, 0], b[:, 1]
    zeros = np.zeros(n)
    ones = np.ones(n)
    design = np.empty((2 * n, 9))
    design[0::2] = np.stack([-x, -y, -ones, zeros, zeros, zeros, u * x, u * y, u], axis=1)
    design[1::2] = np.stack([zeros, zeros, zeros, -x, -y, -ones, v * x, v * y, v], axis=1)
    _, s, vt = np.linalg.svd(design, full_matrices=True)
    # pad to 9 singular values (n == 4 gives 8 rows)
    sv = np.zeros(9)
    sv[: len(s)] = s
    if sv[7] <= DEGENERATE_RTOL * sv[0]:
        raise DegenerateConfigurationError("correspondences do not determine a unique homography")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(tb) @ hn @ ta
    try:
        return normalize_homography(h)
    except ValueError as exc:
        raise DegenerateConfigurationError(str(exc)) from exc


def relative_error(h_est, h_true) -> float:
    """Frobenius distance between normalized homographies."""
    return float(np.linalg.norm(normalize_homography(h_est) - normalize_homography(h_true)))


def warp_image(img, h, out_bounds) -> tuple[np.ndarray, np.ndarray]:
    """Resample ``img`` onto a target canvas via ``h`` (source -> target).

    ``out_bounds`` is ``(x0, y0, width, height)`` in target coordinates. Returns
    the float32 canvas and a boolean alpha mask; alpha is exactly the set of
    pixels whose inverse-mapped position lies in ``[0, w-1] x [0, h-1]``.
    Masked-out pixels are 0.
    """
    src = to_float(img)
    x0, y0, width, height = (int(v) for v in out_bounds)
    hinv = np.linalg.inv(np.asarray(h, dtype=np.float64))
    xs = np.arange(x0, x0 + width, dtype=np.float64)
    ys = np.arange(y0, y0 + height, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    w = hinv[2, 0] * gx + hinv[2, 1] * gy + hinv[2, 2]
    ok_w = np.abs(w) > W_EPS
    w = np.where(ok_w, w, 1.0)
    sx = (hinv[0, 0] * gx + hinv[0, 1] * gy + hinv[0, 2]) / w
    sy = (hinv[1, 0] * gx + hinv[1, 1] * gy + hinv[1, 2]) / w
    hs, ws = src.shape[:2]
    alpha = ok_w & (sx >= 0) & (sx <= ws - 1) & (sy >= 0) & (sy <= hs - 1)
    out = bilinear_sample(src, np.where(alpha, sx, 0.0), np.where(alpha, sy, 0.0))
    if out.ndim == 3:
        out[~alpha] = 0.0
    else:
        out = np.where(alpha, out, 0.0)
    return out.astype(np.float32), alpha


def bilinear_sample(img: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Bilinear lookup at in-range float coordinates (caller guarantees range)."""
    hs, ws = img.shape[:2]
    x0 = np.clip(np.floor(sx).astype(np.intp), 0, max(ws - 2, 0))
    y0 = np.clip(np.floor(sy).astype(np.intp), 0, max(hs - 2, 0))
    x1 = np.minimum(x0 + 1, ws - 1)
    y1 = np.minimum(y0 + 1, hs - 1)
    fx = sx - x0
    fy = sy - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    src = img.astype(np.float64, copy=False)
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def warped_corners(h, width: int, height: int) -> np.ndarray:
    corners = np.array([[0, 0], [width - 1, 0], [width - 1, height - 1], [0, height - 1]], float)
    return transfer_points(h, corners)


def read_homography(path) -> np.ndarray:
    """Nine whitespace-separated decimals, row-major."""
    with open(os.fspath(path), "r", encoding="ascii") as fh:
        values = [float(t) for t in fh.read().split()]
    if len(values) != 9:
        raise ValueError(f"{path}: expected 9 numbers, found {len(values)}")
    return normalize_homography(np.array(values).reshape(3, 3))


def write_homography(path, h) -> None:
    h = np.asarray(h, dtype=np.float64).reshape(3, 3)
    with open(os.fspath(path), "w", encoding="ascii") as fh:
        for row in h:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
