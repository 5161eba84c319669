"""Panorama assembly: pairwise registration, spanning-tree alignment, gain
compensation, dynamic-programming seams and multi-band blending."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _parallel
from .geometry import invert, normalize_homography, warp_image, warped_corners
from .imagecore import to_u8, write_image
from .matching import RegistrationError, filter_gms, filter_ransac_homography, match_bruteforce
from .registration import PipelineConfig, describe_image
from .undistort import CameraModel, undistort_image

log = logging.getLogger(__name__)

SIGMA_N = 10.0 / 255.0
SIGMA_G = 0.1
GAIN_RANGE = (0.5, 2.0)
MIN_LEVEL_SIZE = 8
SEAM_FEATHER_SIGMA = 2.0
OUTSIDE_COST = 1e6
MAX_CANVAS_PIXELS = 64_000_000
BT601 = np.array([0.299, 0.587, 0.114])


class StitchError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``diagnostics`` says why."""

    def __init__(self, stage: str, message: str, diagnostics: dict | None = None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.diagnostics = diagnostics or {}


# --- pairwise graph -------------------------------------------------------------

@dataclass(frozen=True)
class PanoEdge:
    i: int
    j: int
    homography: np.ndarray  # maps image i coordinates into image j
    inliers: int
    matches: int


@dataclass
class PanoGraph:
    n_nodes: int
    edges: list = field(default_factory=list)
    rejected: list = field(default_factory=list)  # (i, j, reason) for pairs that failed verification
    pair_matches: dict = field(default_factory=dict)  # (i, j) -> (points_i, points_j) of verified inliers

    def neighbours(self, k: int):
        for e in self.edges:
            if e.i == k:
                yield e.j, e
            elif e.j == k:
                yield e.i, e

    def components(self) -> list[list[int]]:
        """Connected components, largest first, ties broken by smallest member."""
        seen, comps = set(), []
        for start in range(self.n_nodes):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                k = stack.pop()
                comp.append(k)
                for nb, _ in self.neighbours(k):
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            comps.append(sorted(comp))
        comps.sort(key=lambda c: (-len(c), c[0]))
        return comps

    def diagnostics(self) -> dict:
        return {
            "nodes": self.n_nodes,
            "edges": [{"pair": [e.i, e.j], "inliers": e.inliers, "matches": e.matches} for e in self.edges],
            "rejected": [{"pair": [i, j], "reason": r} for i, j, r in self.rejected],
            "components": self.components(),
        }


def accept_pair(inliers: int, match_count: int) -> bool:
    return inliers > 8 + 0.3 * match_count


def _verify_pair(da, db, shape_a, shape_b, config: PipelineConfig):
    """Match, filter and fit one pair. Returns (H a->b, inlier pts a, pts b, surviving count) or a reason."""
    if len(da) < 4 or len(db) < 4:
        return "too few keypoints"
    pa, pb = da.points(), db.points()
    raw = match_bruteforce(da.descriptors, db.descriptors)
    if config.filter == "gms":
        survivors = filter_gms(raw, pa, pb, (shape_a[1], shape_a[0]), (shape_b[1], shape_b[0]), config.gms)
    else:
        survivors = raw
    if len(survivors) < 4:
        return f"only {len(survivors)} filtered matches"
    try:
        res = filter_ransac_homography(survivors, pa, pb, config.confidence, config.ransac_threshold_px, config.seed)
    except RegistrationError as exc:
        return str(exc)
    inl = res.matches
    if not accept_pair(len(inl), len(survivors)):
        return f"verification failed: {len(inl)} inliers of {len(survivors)} matches"
    return res.homography, pa[inl.query_idx], pb[inl.train_idx], len(survivors)


def build_pano_graph(images, config: PipelineConfig = PipelineConfig()) -> PanoGraph:
    """Register every pair and keep those passing inliers > 8 + 0.3 * matches."""
    images = list(images)
    if len(images) < 2:
        raise ValueError("build_pano_graph needs at least two images")
    described = _parallel.map_ordered(lambda im: describe_image(im, config), images)
    pairs = [(i, j) for i in range(len(images)) for j in range(i + 1, len(images))]

    def run(pair):
        i, j = pair
        (da, sa), (db, sb) = described[i], described[j]
        return _verify_pair(da, db, sa, sb, config)

    graph = PanoGraph(len(images))
    for (i, j), out in zip(pairs, _parallel.map_ordered(run, pairs)):
        if isinstance(out, str):
            graph.rejected.append((i, j, out))
            continue
        h, pts_i, pts_j, count = out
        graph.edges.append(PanoEdge(i, j, normalize_homography(h), len(pts_i), count))
        graph.pair_matches[(i, j)] = (pts_i, pts_j)
    return graph


# --- global alignment -----------------------------------------------------------

@dataclass
class Alignment:
    homographies: dict  # node -> H mapping the image into canvas coordinates (reference frame)
    bounds: tuple  # (x0, y0, width, height) of the canvas in reference coordinates
    reference: int
    tree: list  # (parent, child) edges of the spanning tree

    @property
    def nodes(self) -> list[int]:
        return sorted(self.homographies)


def canvas_bounds(homographies: dict, shapes: dict) -> tuple[int, int, int, int]:
    pts = np.concatenate([warped_corners(homographies[k], shapes[k][1], shapes[k][0]) for k in sorted(homographies)])
    x0, y0 = np.floor(pts.min(axis=0) + 1e-9).astype(int)
    x1, y1 = np.ceil(pts.max(axis=0) - 1e-9).astype(int)
    return int(x0), int(y0), int(x1 - x0 + 1), int(y1 - y0 + 1)


def global_align(graph: PanoGraph, shapes, reference: int | None = None, nodes=None) -> Alignment:
    """Chain pairwise homographies along the maximum-inlier spanning tree.

    ``shapes`` maps node -> (height, width). The reference defaults to the
    node with the largest total inlier count in the first component.
    """
    shapes = dict(enumerate(shapes)) if not isinstance(shapes, dict) else shapes
    comp = sorted(nodes) if nodes is not None else graph.components()[0]
    if reference is None:
        weight = {k: sum(e.inliers for _, e in graph.neighbours(k)) for k in comp}
        reference = max(comp, key=lambda k: (weight[k], -k))
    if reference not in comp:
        raise ValueError(f"reference {reference} is not in the aligned component")
    hs = {reference: np.eye(3)}
    tree = []
    # Prim's algorithm on inlier counts; ties go to the lexicographically smaller edge
    while len(hs) < len(comp):
        best = None
        for e in graph.edges:
            inside_i, inside_j = e.i in hs, e.j in hs
            if inside_i == inside_j or (e.i not in comp or e.j not in comp):
                continue
            key = (-e.inliers, e.i, e.j)
            if best is None or key < best[0]:
                best = (key, e)
        if best is None:
            raise StitchError("align", "component is not connected", graph.diagnostics())
        e = best[1]
        if e.i in hs:  # parent i, child j: child -> parent is inv(H_ij)
            parent, child, h_child = e.i, e.j, hs[e.i] @ invert(e.homography)
        else:
            parent, child, h_child = e.j, e.i, hs[e.j] @ e.homography
        hs[child] = normalize_homography(h_child)
        tree.append((parent, child))
    for k in hs:
        if hs[k][2, 2] < 0:
            hs[k] = -hs[k]
        hs[k] = hs[k] / hs[k][2, 2]
    return Alignment(hs, canvas_bounds(hs, shapes), reference, tree)


def single_alignment(shape) -> Alignment:
    return Alignment({0: np.eye(3)}, (0, 0, int(shape[1]), int(shape[0])), 0, [])


# --- gain compensation ----------------------------------------------------------

def _gray_float(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return img @ BT601 if img.ndim == 3 else img


def overlap_stats(warped, alphas) -> tuple[np.ndarray, np.ndarray]:
    """N[i, j] overlap pixel counts and I[i, j] mean gray of image i over its overlap with j."""
    n = len(warped)
    grays = [_gray_float(w) for w in warped]
    counts = np.zeros((n, n))
    means = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ov = alphas[i] & alphas[j]
            c = int(ov.sum())
            counts[i, j] = c
            if c:
                means[i, j] = grays[i][ov].mean()
    return counts, means


def gain_objective(gains, counts, means, sigma_n: float = SIGMA_N, sigma_g: float = SIGMA_G) -> float:
    g = np.asarray(gains, dtype=np.float64)
    data = (g[:, None] * means - g[None, :] * means.T) ** 2 / sigma_n**2
    prior = ((1 - g[:, None]) ** 2 / sigma_g**2) * np.ones_like(counts)
    off = ~np.eye(len(g), dtype=bool)
    return float((counts * (data + prior))[off].sum())


def compensate_gains(counts, means, sigma_n: float = SIGMA_N, sigma_g: float = SIGMA_G) -> np.ndarray:
    """Per-image gains minimising the overlap-weighted brightness mismatch plus
    a pull toward 1, by the normal equations; clamped to [0.5, 2]."""
    counts = np.asarray(counts, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    n = len(counts)
    a = np.zeros((n, n))
    b = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if i == j or counts[i, j] == 0:
                continue
            # term N_ij (g_i I_ij - g_j I_ji)^2 / sn^2 touches g_i and g_j
            w = counts[i, j] / sigma_n**2
            a[i, i] += w * means[i, j] ** 2
            a[j, j] += w * means[j, i] ** 2
            a[i, j] -= w * means[i, j] * means[j, i]
            a[j, i] -= w * means[i, j] * means[j, i]
            # prior N_ij (1 - g_i)^2 / sg^2
            a[i, i] += counts[i, j] / sigma_g**2
            b[i] += counts[i, j] / sigma_g**2
    for i in range(n):
        if a[i, i] == 0:  # no overlaps: keep the prior optimum
            a[i, i], b[i] = 1.0, 1.0
    g = np.linalg.solve(a, b)
    lo, hi = GAIN_RANGE
    for i, v in enumerate(g):
        if not lo <= v <= hi:
            log.warning("gain %d = %.4f clamped to [%.1f, %.1f]", i, v, lo, hi)
    return np.clip(g, lo, hi)


# --- seams ----------------------------------------------------------------------

def dp_seam(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost top-to-bottom path moving at most one column per row.

    Returns the seam column for every row. Ties go to the leftmost column,
    both for the end point and while tracing back.
    """
    cost = np.asarray(cost, dtype=np.float64)
    rows, cols = cost.shape
    acc = cost.copy()
    back = np.zeros((rows, cols), dtype=np.int8)
    for r in range(1, rows):
        prev = acc[r - 1]
        left = np.concatenate([[np.inf], prev[:-1]])
        right = np.concatenate([prev[1:], [np.inf]])
        stack = np.stack([left, prev, right])  # order = leftmost first
        choice = np.argmin(stack, axis=0)
        acc[r] += stack[choice, np.arange(cols)]
        back[r] = choice.astype(np.int8) - 1
    seam = np.empty(rows, dtype=np.intp)
    seam[-1] = int(np.argmin(acc[-1]))
    for r in range(rows - 1, 0, -1):
        seam[r - 1] = seam[r] + back[r, seam[r]]
    return seam


def _split_overlap(overlap, diff, excl_new, excl_old):
    """Boolean mask of overlap pixels that go to the new image."""
    ys, xs = np.nonzero(overlap)
    r0, r1, c0, c1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    if min(r1 - r0, c1 - c0) < 3:
        d_new = ndimage.distance_transform_edt(~excl_new) if excl_new.any() else np.full(overlap.shape, np.inf)
        d_old = ndimage.distance_transform_edt(~excl_old) if excl_old.any() else np.full(overlap.shape, np.inf)
        return overlap & (d_new < d_old)
    vertical = (r1 - r0) >= (c1 - c0)
    box = overlap[r0:r1, c0:c1]
    cost = np.where(box, diff[r0:r1, c0:c1], OUTSIDE_COST)
    if not vertical:
        cost = cost.T
    seam = dp_seam(cost)
    after = np.arange(cost.shape[1])[None, :] >= seam[:, None]  # seam pixel joins the far side
    if not vertical:
        after = after.T
    axis = 1 if vertical else 0
    centre_new = np.nonzero(excl_new)[axis].mean()
    centre_old = np.nonzero(excl_old)[axis].mean()
    side = after if centre_new > centre_old else ~after
    out = np.zeros_like(overlap)
    out[r0:r1, c0:c1] = side & box
    return out


def find_seams(alphas, warped) -> list[np.ndarray]:
    """Ownership masks that partition the covered canvas.

    Images are added in order; where a new image overlaps what is already
    placed, a DP seam through ``|I_new - I_placed|`` splits the overlap and
    each side goes to whichever image's exclusive area lies on that side.
    """
    shape = alphas[0].shape
    owner = np.full(shape, -1, dtype=np.int32)
    placed_gray = np.zeros(shape)
    for k, (alpha, img) in enumerate(zip(alphas, warped)):
        gray = _gray_float(img)
        covered = owner >= 0
        overlap = covered & alpha
        excl_new = alpha & ~covered
        excl_old = covered & ~alpha
        take = excl_new.copy()
        if overlap.any() and excl_new.any() and excl_old.any():
            take |= _split_overlap(overlap, np.abs(gray - placed_gray), excl_new, excl_old)
        owner[take] = k
        placed_gray[take] = gray[take]
    return [owner == k for k in range(len(alphas))]


# --- multi-band blending --------------------------------------------------------

def _reduce(img: np.ndarray) -> np.ndarray:
    sig = (1.0, 1.0, 0.0)[: img.ndim]
    return ndimage.gaussian_filter(img, sig, mode="nearest")[::2, ::2]


def _expand(img: np.ndarray, shape) -> np.ndarray:
    """Linear upsampling where coarse pixel i sits at fine position 2i."""
    h, w = shape[:2]
    ys = np.minimum(np.arange(h) / 2.0, img.shape[0] - 1)
    xs = np.minimum(np.arange(w) / 2.0, img.shape[1] - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, img.shape[0] - 1)
    x1 = np.minimum(x0 + 1, img.shape[1] - 1)
    fy = (ys - y0).reshape(-1, 1, *([1] * (img.ndim - 2)))
    fx = (xs - x0).reshape(1, -1, *([1] * (img.ndim - 2)))
    rows = img[y0] * (1 - fy) + img[y1] * fy
    return rows[:, x0] * (1 - fx) + rows[:, x1] * fx


def effective_bands(shape, bands: int) -> int:
    if bands < 1:
        raise ValueError("bands must be >= 1")
    smallest = min(shape[:2])
    limit = 1 + max(0, int(math.floor(math.log2(max(smallest, 1) / MIN_LEVEL_SIZE))))
    return max(1, min(bands, limit))


def _fill_invalid(img: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Replace uncovered pixels by their nearest covered neighbour so pyramids
    do not pull black in across image borders."""
    if alpha.all() or not alpha.any():
        return img
    idx = ndimage.distance_transform_edt(~alpha, return_distances=False, return_indices=True)
    return img[idx[0], idx[1]]


def seam_weights(masks, alphas, sigma: float = SEAM_FEATHER_SIGMA) -> list[np.ndarray]:
    return [ndimage.gaussian_filter(m.astype(np.float64), sigma, mode="constant") * a for m, a in zip(masks, alphas)]


def blend_multiband(warped, alphas, gains, masks, bands: int = 5) -> np.ndarray:
    """Laplacian-pyramid blend of gain-corrected images under feathered seam
    masks. ``bands`` is clamped so the coarsest level is at least 8 px;
    ``bands=1`` is a plain feathered average."""
    shape = np.asarray(warped[0]).shape
    nb = effective_bands(shape, bands)
    covered = np.logical_or.reduce(alphas)
    weights = seam_weights(masks, alphas)

    # outside its own footprint each image borrows the feathered composite, so
    # coarse levels do not drag padding from one image into another
    composite = _fill_invalid(_feather_float(warped, weights, gains), covered)

    def prepare(k):
        img = np.asarray(warped[k], dtype=np.float64) * float(gains[k])
        a = alphas[k][..., None] if img.ndim == 3 else alphas[k]
        img = np.where(a, img, composite)
        gp = [img]
        wp = [weights[k]]
        for _ in range(nb - 1):
            gp.append(_reduce(gp[-1]))
            wp.append(_reduce(wp[-1]))
        lp = [gp[l] - _expand(gp[l + 1], gp[l].shape) for l in range(nb - 1)] + [gp[-1]]
        return lp, wp

    pyramids = _parallel.map_ordered(prepare, range(len(warped)))
    out = None
    for level in range(nb - 1, -1, -1):
        num = 0.0
        den = 0.0
        for lp, wp in pyramids:
            w = wp[level] + 1e-12
            num = num + (w[..., None] if lp[level].ndim == 3 else w) * lp[level]
            den = den + w
        band = num / (den[..., None] if np.ndim(num) == 3 else den)
        out = band if out is None else _expand(out, band.shape) + band
    if out.ndim == 3:
        out = out * covered[..., None]
    else:
        out = out * covered
    return to_u8(np.clip(out, 0.0, 1.0).astype(np.float32))


def _feather_float(warped, weights, gains) -> np.ndarray:
    num = sum((w[..., None] if np.ndim(im) == 3 else w) * np.asarray(im, np.float64) * g
              for im, w, g in zip(warped, weights, gains))
    den = sum(weights)
    den = np.where(den > 0, den, 1.0)
    return num / (den[..., None] if np.ndim(num) == 3 else den)


def feather_blend(warped, alphas, gains, masks) -> np.ndarray:
    """Weighted average under the feathered seam weights (single band)."""
    out = _feather_float(warped, seam_weights(masks, alphas), gains)
    return to_u8(np.clip(out, 0.0, 1.0).astype(np.float32))


# --- full pipeline --------------------------------------------------------------

@dataclass(frozen=True)
class StitchConfig:
    registration: PipelineConfig = field(default_factory=PipelineConfig)
    bands: int = 5
    camera: CameraModel | None = None
    reference: int | None = None
    max_canvas_pixels: int = MAX_CANVAS_PIXELS
    debug_dir: str | None = None


@dataclass
class StitchResult:
    panorama: np.ndarray
    graph: PanoGraph | None
    alignment: Alignment
    gains: np.ndarray
    masks: list
    excluded: list  # input indices left out because they joined no component


def _stage(name, fn, *args, diagnostics=None, **kw):
    try:
        return fn(*args, **kw)
    except StitchError:
        raise
    except Exception as exc:
        raise StitchError(name, str(exc), diagnostics) from exc


def stitch(images, config: StitchConfig = StitchConfig()) -> StitchResult:
    images = [np.asarray(im) for im in images]
    if not images:
        raise StitchError("input", "no images given")
    if config.camera is not None:
        images = _stage("undistort", lambda: [undistort_image(config.camera, im) for im in images])
    if len(images) == 1:
        img = images[0].copy()
        return StitchResult(img, None, single_alignment(img.shape), np.ones(1), [np.ones(img.shape[:2], bool)], [])

    graph = _stage("register", build_pano_graph, images, config.registration)
    comp = graph.components()[0]
    if len(comp) < 2:
        raise StitchError("register", "no connected component of two or more images", graph.diagnostics())
    excluded = [k for k in range(len(images)) if k not in comp]
    if excluded:
        log.warning("images %s did not register with the main component", excluded)

    shapes = {k: images[k].shape[:2] for k in comp}
    align = _stage("align", global_align, graph, shapes, config.reference, comp, diagnostics=graph.diagnostics())
    x0, y0, w, h = align.bounds
    if w * h > config.max_canvas_pixels:
        raise StitchError("align", f"canvas {w}x{h} exceeds {config.max_canvas_pixels} pixels",
                          {"bounds": align.bounds, **graph.diagnostics()})

    warped, alphas = zip(*_parallel.map_ordered(lambda k: warp_image(images[k], align.homographies[k], align.bounds), comp))
    warped, alphas = list(warped), list(alphas)
    counts, means = overlap_stats(warped, alphas)
    gains = _stage("gain", compensate_gains, counts, means)
    masks = _stage("seam", find_seams, alphas, warped)
    pano = _stage("blend", blend_multiband, warped, alphas, gains, masks, config.bands)
    result = StitchResult(pano, graph, align, gains, masks, excluded)
    if config.debug_dir:
        write_debug(config.debug_dir, images, result, comp)
    return result


# --- debug output ---------------------------------------------------------------

def match_visualization(img_a, img_b, pts_a, pts_b) -> np.ndarray:
    """Side-by-side RGB image with a line per correspondence."""
    from PIL import Image, ImageDraw

    def rgb(im):
        im = np.asarray(im)
        return np.repeat(im[..., None], 3, axis=2) if im.ndim == 2 else im

    a, b = rgb(img_a), rgb(img_b)
    h = max(a.shape[0], b.shape[0])
    canvas = np.zeros((h, a.shape[1] + b.shape[1], 3), np.uint8)
    canvas[: a.shape[0], : a.shape[1]] = a
    canvas[: b.shape[0], a.shape[1] :] = b
    pil = Image.fromarray(canvas)
    draw = ImageDraw.Draw(pil)
    off = a.shape[1]
    for (xa, ya), (xb, yb) in zip(np.asarray(pts_a), np.asarray(pts_b)):
        draw.line([(float(xa), float(ya)), (float(xb) + off, float(yb))], fill=(0, 255, 0), width=1)
    return np.asarray(pil)


def write_debug(directory, images, result: StitchResult, comp) -> None:
    os.makedirs(directory, exist_ok=True)
    graph = result.graph
    for (i, j), (pa, pb) in sorted(graph.pair_matches.items()):
        write_image(os.path.join(directory, f"matches_{i}_{j}.png"), match_visualization(images[i], images[j], pa, pb))
    for k, m in zip(comp, result.masks):
        write_image(os.path.join(directory, f"seam_{k}.png"), (m * 255).astype(np.uint8))
    with open(os.path.join(directory, "gains.json"), "w", encoding="utf-8") as fh:
        json.dump({str(k): float(g) for k, g in zip(comp, result.gains)}, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(directory, "graph.json"), "w", encoding="utf-8") as fh:
        json.dump(graph.diagnostics(), fh, indent=2)
        fh.write("\n")
