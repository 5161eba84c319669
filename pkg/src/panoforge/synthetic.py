"""Procedural test imagery: textured scenes, homography warp sequences and
overlapping crops with known geometry. Everything is seeded."""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .geometry import bilinear_sample, normalize_homography
from .regeval import EvalSequence


def texture(height: int, width: int, seed: int = 0, color: bool = False) -> np.ndarray:
    """Natural-looking uint8 scene: multi-scale noise plus random blobs and boxes."""
    rng = np.random.default_rng(seed)
    base = np.zeros((height, width))
    for sigma, weight in ((1.5, 0.35), (4.0, 0.6), (12.0, 1.0), (40.0, 1.2)):
        layer = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma, mode="reflect")
        base += weight * layer / (layer.std() + 1e-12)
    yy, xx = np.mgrid[0:height, 0:width]
    n_shapes = int(height * width / 2500)
    for _ in range(n_shapes):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        size = rng.uniform(4, 30)
        val = rng.normal(0, 1.6)
        if rng.random() < 0.5:
            m = (np.abs(xx - cx) < size) & (np.abs(yy - cy) < size * rng.uniform(0.4, 1.0))
        else:
            m = (xx - cx) ** 2 + (yy - cy) ** 2 < size**2
        base[m] += val
    base = ndimage.gaussian_filter(base, 0.7)
    lo, hi = np.percentile(base, [1, 99])
    gray = np.clip((base - lo) / (hi - lo), 0, 1)
    if not color:
        return np.rint(gray * 255).astype(np.uint8)
    tint = [ndimage.gaussian_filter(rng.standard_normal((height, width)), 30) for _ in range(3)]
    rgb = np.stack([np.clip(gray * (0.85 + 0.15 * t / (np.abs(t).max() + 1e-12)), 0, 1) for t in tint], axis=2)
    return np.rint(rgb * 255).astype(np.uint8)


def similarity_about(cx: float, cy: float, angle_deg: float = 0.0, scale: float = 1.0,
                     tx: float = 0.0, ty: float = 0.0, persp: tuple = (0.0, 0.0)) -> np.ndarray:
    """Rotation + scale about (cx, cy), then translation, then an optional
    small projective term."""
    a = math.radians(angle_deg)
    c, s = math.cos(a) * scale, math.sin(a) * scale
    to_o = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1.0]])
    rs = np.array([[c, -s, 0], [s, c, 0], [persp[0], persp[1], 1.0]])
    back = np.array([[1, 0, cx + tx], [0, 1, cy + ty], [0, 0, 1.0]])
    return back @ rs @ to_o


def render_view(scene: np.ndarray, h_view: np.ndarray, height: int, width: int) -> np.ndarray:
    """Render ``scene`` into a (height, width) view where ``h_view`` maps scene
    coordinates to view coordinates. Out-of-scene samples are edge-clamped."""
    hinv = np.linalg.inv(h_view)
    u, v = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    w = hinv[2, 0] * u + hinv[2, 1] * v + hinv[2, 2]
    sx = (hinv[0, 0] * u + hinv[0, 1] * v + hinv[0, 2]) / w
    sy = (hinv[1, 0] * u + hinv[1, 1] * v + hinv[1, 2]) / w
    sh, sw = scene.shape[:2]
    sx = np.clip(sx, 0, sw - 1)
    sy = np.clip(sy, 0, sh - 1)
    return bilinear_sample(scene.astype(np.float64), sx, sy)


# transform schedules per synthetic sequence: (angle_deg, scale, blur_sigma, brightness)
SEQUENCE_SCHEDULES = {
    "rotation": [(6, 1.0, 0.0, 1.0), (12, 1.0, 0.0, 1.0), (18, 1.0, 0.0, 1.0), (24, 1.0, 0.0, 1.0), (30, 1.0, 0.0, 1.0)],
    "scale": [(3, 0.9, 0.0, 1.0), (-5, 1.15, 0.0, 1.0), (8, 0.8, 0.0, 1.0), (-10, 1.3, 0.0, 1.0), (12, 0.7, 0.0, 1.0)],
    "blur": [(2, 1.0, 0.6, 1.0), (-3, 1.0, 1.2, 1.0), (4, 1.0, 1.8, 1.0), (-5, 1.0, 2.4, 1.0), (6, 1.0, 3.0, 1.0)],
    "light": [(2, 1.0, 0.0, 0.94), (-3, 1.0, 0.0, 1.12), (4, 1.0, 0.0, 0.82), (-5, 1.0, 0.0, 1.24), (6, 1.0, 0.0, 0.70)],
}


def warp_sequence(kind: str = "rotation", height: int = 480, width: int = 640, seed: int = 0) -> EvalSequence:
    """Base image plus five deformed views with exact ground-truth homographies.

    The scene is rendered larger than the view so warped views have no empty
    borders. Deformations stay within rotation <= 30 deg, scale 0.7..1.3,
    blur sigma <= 3 and brightness +-30%.
    """
    schedule = SEQUENCE_SCHEDULES[kind]
    pad = int(0.6 * max(height, width))
    scene = texture(height + 2 * pad, width + 2 * pad, seed).astype(np.float64)
    to_base = np.array([[1, 0, -pad], [0, 1, -pad], [0, 0, 1.0]])
    base = np.rint(render_view(scene, to_base, height, width)).astype(np.uint8)
    rng = np.random.default_rng(seed + 1)
    deformed, truth = [], []
    for angle, scale, blur, gain in schedule:
        persp = tuple(rng.uniform(-2e-5, 2e-5, 2))
        shift = rng.uniform(-15, 15, 2)
        h = similarity_about((width - 1) / 2, (height - 1) / 2, angle, scale, shift[0], shift[1], persp)
        view = render_view(scene, h @ to_base, height, width)
        if blur > 0:
            view = ndimage.gaussian_filter(view, blur, mode="nearest")
        view = np.clip(np.rint(view * gain), 0, 255).astype(np.uint8)
        deformed.append(view)
        truth.append(normalize_homography(h))
    return EvalSequence(kind, base, deformed, truth)


def overlapping_crops(source: np.ndarray, crop_width: int, overlap: float) -> tuple[list, list]:
    """Two horizontally adjacent crops sharing ``overlap`` of their width.

    Returns (crops, x_offsets) in source coordinates.
    """
    h, w = source.shape[:2]
    step = int(round(crop_width * (1 - overlap)))
    if crop_width + step > w:
        raise ValueError("source too narrow for the requested crops")
    x0 = (w - crop_width - step) // 2
    offsets = [x0, x0 + step]
    return [source[:, o : o + crop_width].copy() for o in offsets], offsets


def transformed_crops(source: np.ndarray, size: tuple[int, int], views: list) -> tuple[list, list]:
    """Render views of ``source``: each entry of ``views`` is
    (centre_x, centre_y, angle_deg, scale). Returns (images, homographies
    mapping source -> view)."""
    height, width = size
    images, hs = [], []
    for cx, cy, angle, scale in views:
        # map source centre to view centre, rotated and scaled
        h = similarity_about(cx, cy, angle, scale, (width - 1) / 2 - cx, (height - 1) / 2 - cy)
        img = render_view(source.astype(np.float64) if source.ndim == 2 else source.astype(np.float64), h, height, width)
        images.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
        hs.append(h)
    return images, hs
