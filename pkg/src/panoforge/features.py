"""ORB-style keypoints and the BRIEF / FREAK binary descriptors.

Detection runs FAST-9 on every level of a 1.2x pyramid, ranks corners by
Harris response and orients them by the intensity centroid. Descriptors are
computed on the pyramid level the keypoint was found on and are packed
little-endian (bit ``n`` lives in byte ``n // 8`` at position ``n % 8``).
"""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._patterns import BRIEF_PAIR_TABLE, FREAK_PAIR_TABLE
from .imagecore import Pyramid, build_pyramid, level_shape, to_float, validate_f32

FAST_THRESHOLD = 20.0 / 255.0
FAST_ARC = 9
HARRIS_K = 0.04
HARRIS_BLOCK = 7
N_LEVELS = 8
SCALE_FACTOR = 1.2
CENTROID_RADIUS = 15
# level-0 distance from any border inside which keypoints are dropped
BORDER_MARGIN = 32
# per-level margin: FREAK's outer box reaches 23 px from the centre
LEVEL_MARGIN = 24
DESCRIPTOR_REACH = 23
BRIEF_SIGMA = 2.0
BRIEF_BITS = 256
FREAK_BITS = 512

# Bresenham circle of radius 3, clockwise from 12 o'clock (dx, dy)
FAST_CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    octave: int = 0
    angle: float = 0.0
    response: float = 0.0


@dataclass
class DescriptorSet:
    """Descriptors for the keypoints that survived the border check.

    ``keypoints[i]`` owns row ``descriptors[i]``; ``source_indices[i]`` is its
    position in the keypoint list that was passed in; ``dropped`` lists the
    input positions that were rejected.
    """

    keypoints: list
    descriptors: np.ndarray
    length_bits: int
    source_indices: list = field(default_factory=list)
    dropped: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.keypoints)

    def points(self) -> np.ndarray:
        return keypoint_array(self.keypoints)


def keypoint_array(kps) -> np.ndarray:
    if len(kps) == 0:
        return np.zeros((0, 2))
    return np.array([(k.x, k.y) for k in kps], dtype=np.float64)


def descriptor_bits(desc: np.ndarray, length_bits: int) -> np.ndarray:
    """Unpack (N, nbytes) uint8 rows into (N, length_bits) 0/1 arrays."""
    return np.unpackbits(np.atleast_2d(desc), axis=1, bitorder="little")[:, :length_bits]


def pack_bits(bits: np.ndarray) -> np.ndarray:
    return np.packbits(np.atleast_2d(bits).astype(np.uint8), axis=1, bitorder="little")


# --- detection ------------------------------------------------------------------


def fast_corners(img: np.ndarray, threshold: float = FAST_THRESHOLD) -> np.ndarray:
    """Boolean map of FAST-9 corners (>= 9 contiguous circle pixels all brighter
    than centre + t or all darker than centre - t). Pixels closer than 3 px to
    the border are never corners."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    out = np.zeros((h, w), dtype=bool)
    if h < 7 or w < 7:
        return out
    centre = img[3 : h - 3, 3 : w - 3]
    ring = np.stack([img[3 + dy : h - 3 + dy, 3 + dx : w - 3 + dx] for dx, dy in FAST_CIRCLE])
    for flags in (ring > centre + threshold, ring < centre - threshold):
        # run of 9 ending at k (circular): AND-doubling 1 -> 2 -> 4 -> 8, then +1
        a2 = flags & np.roll(flags, 1, axis=0)
        a4 = a2 & np.roll(a2, 2, axis=0)
        a8 = a4 & np.roll(a4, 4, axis=0)
        a9 = a8 & np.roll(flags, 8, axis=0)
        out[3 : h - 3, 3 : w - 3] |= a9.any(axis=0)
    return out


def harris_response(img: np.ndarray, block: int = HARRIS_BLOCK, k: float = HARRIS_K) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    ix = ndimage.sobel(img, axis=1, mode="reflect") / 8.0
    iy = ndimage.sobel(img, axis=0, mode="reflect") / 8.0
    sxx = ndimage.uniform_filter(ix * ix, block, mode="reflect")
    syy = ndimage.uniform_filter(iy * iy, block, mode="reflect")
    sxy = ndimage.uniform_filter(ix * iy, block, mode="reflect")
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def _centroid_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(r, r)
    keep = dx * dx + dy * dy <= radius * radius
    return dx[keep], dy[keep]


def _centroid_angles(img: np.ndarray, cx: np.ndarray, cy: np.ndarray, radius: int) -> np.ndarray:
    dx, dy = _centroid_offsets(radius)
    vals = img[cy[:, None] + dy[None, :], cx[:, None] + dx[None, :]]
    m10 = vals @ dx.astype(np.float64)
    m01 = vals @ dy.astype(np.float64)
    ang = np.arctan2(m01, m10)
    ang = np.where((m10 == 0) & (m01 == 0), 0.0, ang)
    return np.mod(ang, 2 * math.pi) % (2 * math.pi)


def orientation(img, x: float, y: float, radius: int = CENTROID_RADIUS) -> float:
    """Intensity-centroid angle atan2(m01, m10) over a disc around (x, y)."""
    img = np.asarray(to_float(img), dtype=np.float64)
    cx, cy = int(round(x)), int(round(y))
    h, w = img.shape[:2]
    if cx - radius < 0 or cy - radius < 0 or cx + radius >= w or cy + radius >= h:
        raise ValueError("centroid patch extends outside the image")
    return float(_centroid_angles(img, np.array([cx]), np.array([cy]), radius)[0])


def usable_levels(shape: tuple[int, int], levels: int, scale_factor: float = SCALE_FACTOR) -> int:
    """Number of pyramid levels large enough to host at least one keypoint."""
    n = 0
    for k in range(levels):
        hk, wk = level_shape(shape, scale_factor, k)
        if min(hk, wk) < max(2 * LEVEL_MARGIN + 1, 8):
            break
        n += 1
    return n


def detect_orb(
    img,
    max_keypoints: int = 5000,
    levels: int = N_LEVELS,
    scale_factor: float = SCALE_FACTOR,
    threshold: float = FAST_THRESHOLD,
) -> list[Keypoint]:
    """Multi-scale FAST-9 + 3x3 NMS, ranked by Harris score, top ``max_keypoints``."""
    if max_keypoints < 1:
        raise ValueError("max_keypoints must be >= 1")
    img = validate_f32(to_float(img))
    if img.ndim == 3:
        raise ValueError("detect_orb expects a grayscale image")
    h0, w0 = img.shape
    n_levels = usable_levels(img.shape, levels, scale_factor)
    if n_levels == 0:
        return []
    pyr = build_pyramid(img, n_levels, scale_factor)
    cand = []
    for k in range(n_levels):
        lvl = pyr[k].astype(np.float64)
        corners = fast_corners(lvl, threshold)
        if not corners.any():
            continue
        resp = harris_response(lvl)
        masked = np.where(corners, resp, -np.inf)
        peaks = corners & (masked >= ndimage.maximum_filter(masked, size=3, mode="constant", cval=-np.inf))
        ys, xs = np.nonzero(peaks)
        hk, wk = lvl.shape
        inside = (xs >= LEVEL_MARGIN) & (xs <= wk - 1 - LEVEL_MARGIN)
        inside &= (ys >= LEVEL_MARGIN) & (ys <= hk - 1 - LEVEL_MARGIN)
        x0, y0 = pyr.to_level0(k, xs, ys)
        inside &= (x0 >= BORDER_MARGIN) & (x0 <= w0 - 1 - BORDER_MARGIN)
        inside &= (y0 >= BORDER_MARGIN) & (y0 <= h0 - 1 - BORDER_MARGIN)
        sel = np.nonzero(inside)[0]
        if len(sel):
            cand.append((k, xs[sel], ys[sel], x0[sel], y0[sel], resp[ys[sel], xs[sel]]))
    if not cand:
        return []
    octave = np.concatenate([np.full(len(c[1]), c[0]) for c in cand])
    lx = np.concatenate([c[1] for c in cand])
    ly = np.concatenate([c[2] for c in cand])
    gx = np.concatenate([c[3] for c in cand])
    gy = np.concatenate([c[4] for c in cand])
    score = np.concatenate([c[5] for c in cand])
    order = np.argsort(-score, kind="stable")[:max_keypoints]
    angles = np.zeros(len(order))
    for k in np.unique(octave[order]):
        mask = octave[order] == k
        sel = order[mask]
        lvl = pyr[int(k)].astype(np.float64)
        angles[mask] = _centroid_angles(lvl, lx[sel], ly[sel], CENTROID_RADIUS)
    return [
        Keypoint(float(gx[i]), float(gy[i]), int(octave[i]), float(a), float(score[i]))
        for i, a in zip(order, angles)
    ]


# --- description ----------------------------------------------------------------


def _describe_setup(img, kps, scale_factor):
    img = validate_f32(to_float(img))
    if img.ndim == 3:
        raise ValueError("descriptors expect a grayscale image")
    h0, w0 = img.shape
    n_levels = max([k.octave for k in kps], default=0) + 1
    pyr = build_pyramid(img, n_levels, scale_factor)
    centres = []
    keep = []
    for i, kp in enumerate(kps):
        if not (BORDER_MARGIN <= kp.x <= w0 - 1 - BORDER_MARGIN and BORDER_MARGIN <= kp.y <= h0 - 1 - BORDER_MARGIN):
            centres.append(None)
            continue
        lx, ly = pyr.from_level0(kp.octave, kp.x, kp.y)
        cx, cy = int(round(float(lx))), int(round(float(ly)))
        hk, wk = pyr[kp.octave].shape
        if DESCRIPTOR_REACH <= cx <= wk - 1 - DESCRIPTOR_REACH and DESCRIPTOR_REACH <= cy <= hk - 1 - DESCRIPTOR_REACH:
            centres.append((cx, cy))
            keep.append(i)
        else:
            centres.append(None)
    return pyr, centres, keep


def _finish(kps, keep, bits_rows, length_bits):
    dropped = sorted(set(range(len(kps))) - set(keep))
    nbytes = length_bits // 8
    desc = pack_bits(np.array(bits_rows)) if bits_rows else np.zeros((0, nbytes), np.uint8)
    return DescriptorSet([kps[i] for i in keep], desc, length_bits, list(keep), dropped)


def brief_pattern() -> np.ndarray:
    """(256, 4) integer table of (px, py, qx, qy) offsets."""
    return np.array(BRIEF_PAIR_TABLE, dtype=np.int64)


def describe_brief(img, kps, scale_factor: float = SCALE_FACTOR) -> DescriptorSet:
    """Steered BRIEF: 256 pair tests on the sigma=2 smoothed level image,
    pattern rotated by each keypoint's angle. Bit = I(p) < I(q)."""
    kps = list(kps)
    pyr, centres, keep = _describe_setup(img, kps, scale_factor)
    pattern = brief_pattern().astype(np.float64)
    smoothed = {}
    rows = []
    for i in keep:
        kp = kps[i]
        if kp.octave not in smoothed:
            smoothed[kp.octave] = ndimage.gaussian_filter(pyr[kp.octave].astype(np.float64), BRIEF_SIGMA, mode="reflect")
        lvl = smoothed[kp.octave]
        cx, cy = centres[i]
        c, s = math.cos(kp.angle), math.sin(kp.angle)
        px = np.rint(c * pattern[:, 0] - s * pattern[:, 1]).astype(np.intp) + cx
        py = np.rint(s * pattern[:, 0] + c * pattern[:, 1]).astype(np.intp) + cy
        qx = np.rint(c * pattern[:, 2] - s * pattern[:, 3]).astype(np.intp) + cx
        qy = np.rint(s * pattern[:, 2] + c * pattern[:, 3]).astype(np.intp) + cy
        rows.append(lvl[py, px] < lvl[qy, qx])
    return _finish(kps, keep, rows, BRIEF_BITS)


# FREAK retinal pattern: 7 rings of 6 fields plus the centre, outer to inner
FREAK_PATTERN_SCALE = 22.0
_BIG_R = 2.0 / 3.0
_SMALL_R = 2.0 / 24.0
_UNIT = (_BIG_R - _SMALL_R) / 21.0
FREAK_RING_RADII = (
    _BIG_R, _BIG_R - 6 * _UNIT, _BIG_R - 11 * _UNIT, _BIG_R - 15 * _UNIT,
    _BIG_R - 18 * _UNIT, _BIG_R - 20 * _UNIT, _SMALL_R, 0.0,
)
FREAK_RING_SIGMAS = tuple(r / 2.0 for r in FREAK_RING_RADII[:7]) + (FREAK_RING_RADII[6] / 2.0,)
FREAK_RING_COUNTS = (6, 6, 6, 6, 6, 6, 6, 1)


def freak_pattern(scale: float = FREAK_PATTERN_SCALE) -> dict:
    """Field table at angle 0: ring index, radius, polar angle and box sigma in px.

    Neighbouring rings are staggered by half a field spacing.
    """
    ring, radius, alpha, sigma = [], [], [], []
    for i, n in enumerate(FREAK_RING_COUNTS):
        beta = math.pi / n * (i % 2)
        for k in range(n):
            ring.append(i)
            radius.append(FREAK_RING_RADII[i] * scale)
            alpha.append(k * 2 * math.pi / n + beta)
            sigma.append(FREAK_RING_SIGMAS[i] * scale)
    return {
        "ring": np.array(ring),
        "radius": np.array(radius),
        "alpha": np.array(alpha),
        "sigma": np.array(sigma),
    }


def freak_pairs() -> np.ndarray:
    """(512, 2) field index pairs (i, j), i > j, in descriptor bit order."""
    all_pairs = [(i, j) for i in range(1, 43) for j in range(i)]
    return np.array([all_pairs[t] for t in FREAK_PAIR_TABLE], dtype=np.intp)


def _integral(img: np.ndarray) -> np.ndarray:
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    ii[1:, 1:] = np.cumsum(np.cumsum(img, axis=0), axis=1)
    return ii


def freak_field_means(integral: np.ndarray, cx: int, cy: int, angle: float, pattern=None) -> np.ndarray:
    """Box-filter means of the 43 fields for a keypoint at integer (cx, cy)."""
    p = pattern if pattern is not None else freak_pattern()
    a = p["alpha"] + angle
    xf = cx + p["radius"] * np.cos(a)
    yf = cy + p["radius"] * np.sin(a)
    s = p["sigma"]
    x_l = np.rint(xf - s).astype(np.intp)
    y_t = np.rint(yf - s).astype(np.intp)
    x_r = np.rint(xf + s + 1).astype(np.intp)
    y_b = np.rint(yf + s + 1).astype(np.intp)
    total = integral[y_b, x_r] - integral[y_b, x_l] + integral[y_t, x_l] - integral[y_t, x_r]
    return total / ((x_r - x_l) * (y_b - y_t))


def describe_freak(img, kps, scale_factor: float = SCALE_FACTOR) -> DescriptorSet:
    """FREAK: 43 overlapping box-averaged retinal fields, 512 selected pair tests.

    Bit n = 1 iff mean(field i) > mean(field j) for the n-th table pair (i, j),
    strictly; the pattern is rotated by the keypoint angle.
    """
    kps = list(kps)
    pyr, centres, keep = _describe_setup(img, kps, scale_factor)
    pattern = freak_pattern()
    pairs = freak_pairs()
    integrals = {}
    rows = []
    for i in keep:
        kp = kps[i]
        if kp.octave not in integrals:
            integrals[kp.octave] = _integral(pyr[kp.octave].astype(np.float64))
        cx, cy = centres[i]
        vals = freak_field_means(integrals[kp.octave], cx, cy, kp.angle, pattern)
        rows.append(vals[pairs[:, 1]] < vals[pairs[:, 0]])
    return _finish(kps, keep, rows, FREAK_BITS)


DESCRIBERS = {"brief": describe_brief, "freak": describe_freak}


# --- container file -------------------------------------------------------------

FEATURE_MAGIC = b"PFKD"
_HEADER = struct.Struct("<4sHHIII")


def _record_dtype(nbytes: int) -> np.dtype:
    return np.dtype([
        ("x", "<f8"), ("y", "<f8"), ("octave", "<i4"), ("angle", "<f8"),
        ("response", "<f8"), ("desc", "u1", (nbytes,)),
    ])


def write_features(path, dset: DescriptorSet, image_size: tuple[int, int]) -> None:
    """Binary container: header (magic, version, bits, count, width, height)
    followed by fixed-width little-endian records."""
    nbytes = dset.length_bits // 8
    rec = np.zeros(len(dset), dtype=_record_dtype(nbytes))
    for r, kp in zip(rec, dset.keypoints):
        r["x"], r["y"], r["octave"], r["angle"], r["response"] = kp.x, kp.y, kp.octave, kp.angle, kp.response
    if len(dset):
        rec["desc"] = dset.descriptors
    with open(os.fspath(path), "wb") as fh:
        fh.write(_HEADER.pack(FEATURE_MAGIC, 1, dset.length_bits, len(dset), image_size[0], image_size[1]))
        fh.write(rec.tobytes())


def read_features(path) -> tuple[DescriptorSet, tuple[int, int]]:
    with open(os.fspath(path), "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated feature file")
    magic, version, bits, count, width, height = _HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC or version != 1:
        raise ValueError(f"{path}: not a feature container")
    if bits not in (BRIEF_BITS, FREAK_BITS):
        raise ValueError(f"{path}: unsupported descriptor length {bits}")
    dtype = _record_dtype(bits // 8)
    body = data[_HEADER.size :]
    if len(body) != count * dtype.itemsize:
        raise ValueError(f"{path}: expected {count} records")
    rec = np.frombuffer(body, dtype=dtype)
    kps = [Keypoint(float(r["x"]), float(r["y"]), int(r["octave"]), float(r["angle"]), float(r["response"])) for r in rec]
    desc = np.array(rec["desc"], dtype=np.uint8).reshape(count, bits // 8)
    return DescriptorSet(kps, desc, bits, list(range(count)), []), (width, height)
