"""Hamming brute-force matching and the two outlier filters (GMS and RANSAC).

Both filters return subsets of their input in input order.
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import DegenerateConfigurationError, estimate_homography_dlt

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


class RegistrationError(RuntimeError):
    """A robust filter could not produce a model."""


@dataclass(frozen=True)
class MatchSet:
    query_idx: np.ndarray
    train_idx: np.ndarray
    distance: np.ndarray
    provenance: str = "bruteforce"
    flags: tuple = ()

    def __post_init__(self):
        for name in ("query_idx", "train_idx", "distance"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if not (len(self.query_idx) == len(self.train_idx) == len(self.distance)):
            raise ValueError("match arrays differ in length")

    def __len__(self) -> int:
        return len(self.query_idx)

    def __iter__(self):
        return iter(zip(self.query_idx.tolist(), self.train_idx.tolist(), self.distance.tolist()))

    def subset(self, mask, provenance: str | None = None, flags: tuple = ()) -> "MatchSet":
        mask = np.asarray(mask)
        return MatchSet(
            self.query_idx[mask], self.train_idx[mask], self.distance[mask],
            provenance or self.provenance, self.flags + tuple(flags),
        )

    @classmethod
    def empty(cls, provenance: str = "bruteforce") -> "MatchSet":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), provenance)


def write_matches_csv(path, matches: MatchSet) -> None:
    with open(os.fspath(path), "w", encoding="ascii", newline="\n") as fh:
        fh.write("query_idx,train_idx,distance\n")
        for q, t, d in matches:
            fh.write(f"{q},{t},{d}\n")


def read_matches_csv(path) -> MatchSet:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # header-only file
        rows = np.loadtxt(os.fspath(path), delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    if rows.size == 0:
        return MatchSet.empty()
    return MatchSet(rows[:, 0], rows[:, 1], rows[:, 2], "csv")


# --- brute force ------------------------------------------------------------------


def _as_words(desc: np.ndarray) -> np.ndarray:
    desc = np.ascontiguousarray(desc, dtype=np.uint8)
    if desc.shape[1] % 8:
        raise ValueError("descriptor byte length must be a multiple of 8")
    return desc.view("<u8")


def hamming_matrix(da: np.ndarray, db: np.ndarray) -> np.ndarray:
    wa = _as_words(da)
    wb = _as_words(db)
    return np.bitwise_count(wa[:, None, :] ^ wb[None, :, :]).sum(axis=2, dtype=np.int64)


def match_bruteforce(da: np.ndarray, db: np.ndarray, chunk: int = 256) -> MatchSet:
    """Nearest neighbour in ``db`` by Hamming distance for every row of ``da``.

    Ties go to the smallest train index.
    """
    da = np.atleast_2d(np.asarray(da, dtype=np.uint8))
    db = np.atleast_2d(np.asarray(db, dtype=np.uint8))
    if len(da) == 0 or len(db) == 0:
        raise ValueError("descriptor lists must be non-empty")
    if da.shape[1] != db.shape[1]:
        raise ValueError(f"descriptor lengths differ: {da.shape[1] * 8} vs {db.shape[1] * 8} bits")
    train = np.empty(len(da), dtype=np.int64)
    dist = np.empty(len(da), dtype=np.int64)
    for s in range(0, len(da), chunk):
        d = hamming_matrix(da[s : s + chunk], db)
        j = np.argmin(d, axis=1)
        train[s : s + chunk] = j
        dist[s : s + chunk] = d[np.arange(len(j)), j]
    return MatchSet(np.arange(len(da)), train, dist, "bruteforce")


# --- GMS ------------------------------------------------------------------------


@dataclass(frozen=True)
class GmsParams:
    grid_cols: int = 20
    grid_rows: int = 20
    alpha: float = 6.0
    with_rotation: bool = False
    with_scale: bool = False

    def __post_init__(self):
        if self.grid_cols < 4 or self.grid_rows < 4:
            raise ValueError("GMS grid must be at least 4x4")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


# 3x3 neighbourhood orderings (1-based, row-major) for the 8 relative rotations
ROTATION_PATTERNS = (
    (1, 2, 3, 4, 5, 6, 7, 8, 9),
    (4, 1, 2, 7, 5, 3, 8, 9, 6),
    (7, 4, 1, 8, 5, 2, 9, 6, 3),
    (8, 7, 4, 9, 5, 1, 6, 3, 2),
    (9, 8, 7, 6, 5, 4, 3, 2, 1),
    (6, 9, 8, 3, 5, 7, 2, 1, 4),
    (3, 6, 9, 2, 5, 8, 1, 4, 7),
    (2, 3, 6, 1, 5, 9, 4, 7, 8),
)
SCALE_RATIOS = (1.0, 0.5, math.sqrt(0.5), math.sqrt(2.0), 2.0)
GRID_SHIFTS = ((0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5))


def _neighbours(cols: int, rows: int) -> np.ndarray:
    """(cols*rows, 9) cell indices of each 3x3 neighbourhood, -1 off-grid."""
    idx = np.arange(cols * rows)
    cx, cy = idx % cols, idx // cols
    out = np.full((cols * rows, 9), -1, dtype=np.int64)
    for yi in (-1, 0, 1):
        for xi in (-1, 0, 1):
            nx, ny = cx + xi, cy + yi
            ok = (nx >= 0) & (nx < cols) & (ny >= 0) & (ny < rows)
            out[ok, 4 + xi + 3 * yi] = nx[ok] + ny[ok] * cols
    return out


def _cell_index(pts, size, cols, rows, shift=(0.0, 0.0)):
    x = pts[:, 0] / size[0] * cols + shift[0]
    y = pts[:, 1] / size[1] * rows + shift[1]
    ok = (x >= 0) & (y >= 0) & (x < cols) & (y < rows)
    idx = np.where(ok, np.floor(x).astype(np.int64) + np.floor(y).astype(np.int64) * cols, -1)
    return idx


@dataclass
class GmsCellScores:
    """Per left-cell diagnostics for one grid placement."""

    best_right: np.ndarray  # -1 where the cell holds no matches
    score: np.ndarray  # neighbourhood support minus one
    threshold: np.ndarray  # alpha * sqrt(mean matches per involved left cell)
    accepted: np.ndarray
    left_cell: np.ndarray  # per match
    right_cell: np.ndarray  # per match


def gms_cell_scores(pts_a, pts_b, size_a, size_b, params: GmsParams = GmsParams(),
                    shift=(0.0, 0.0), rotation: int = 0, scale: float = 1.0) -> GmsCellScores:
    """Score every left cell for one grid placement.

    For left cell i with best-supported right cell j, the support is the number
    of matches linking corresponding cells of the two 3x3 neighbourhoods
    (minus one for the match itself); the cell pair is accepted when the
    support exceeds alpha * sqrt(n), n the mean match count over the involved
    left cells.
    """
    pts_a = np.asarray(pts_a, dtype=np.float64).reshape(-1, 2)
    pts_b = np.asarray(pts_b, dtype=np.float64).reshape(-1, 2)
    lc, lr = params.grid_cols, params.grid_rows
    rc = max(1, int(round(lc * scale)))
    rr = max(1, int(round(lr * scale)))
    nl, nr = lc * lr, rc * rr
    left = _cell_index(pts_a, size_a, lc, lr, shift)
    right = _cell_index(pts_b, size_b, rc, rr)
    ok = (left >= 0) & (right >= 0)
    motion = np.zeros((nl, nr), dtype=np.int64)
    np.add.at(motion, (left[ok], right[ok]), 1)
    per_left = motion.sum(axis=1)
    best = np.where(per_left > 0, np.argmax(motion, axis=1), -1)
    nb_left = _neighbours(lc, lr)
    nb_right = _neighbours(rc, rr)
    pattern = np.array(ROTATION_PATTERNS[rotation]) - 1
    score = np.zeros(nl)
    thresh = np.zeros(nl)
    for i in np.nonzero(best >= 0)[0]:
        ll = nb_left[i]
        rr_cells = nb_right[best[i]][pattern]
        valid = (ll >= 0) & (rr_cells >= 0)
        support = motion[ll[valid], rr_cells[valid]].sum()
        mean_n = per_left[ll[valid]].sum() / max(valid.sum(), 1)
        score[i] = support - 1
        thresh[i] = params.alpha * math.sqrt(mean_n)
    accepted = (best >= 0) & (score > thresh)
    return GmsCellScores(best, score, thresh, accepted, left, right)


def _gms_run(pts_a, pts_b, size_a, size_b, params, rotation, scale):
    inlier = np.zeros(len(pts_a), dtype=bool)
    for shift in GRID_SHIFTS:
        cs = gms_cell_scores(pts_a, pts_b, size_a, size_b, params, shift, rotation, scale)
        ok = cs.left_cell >= 0
        lc = np.where(ok, cs.left_cell, 0)
        hit = ok & cs.accepted[lc] & (cs.best_right[lc] == cs.right_cell)
        inlier |= hit
    return inlier


def filter_gms(matches: MatchSet, kps_a, kps_b, size_a, size_b, params: GmsParams = GmsParams()) -> MatchSet:
    """Grid-based motion statistics filter.

    ``kps_a`` / ``kps_b`` are keypoint lists or (N, 2) arrays; sizes are
    (width, height). Runs the four half-cell grid shifts and keeps the union;
    with rotation/scale enabled, the best of all patterns is kept.
    """
    if len(matches) < 1:
        raise ValueError("filter_gms needs at least one match")
    pa = _points(kps_a)[matches.query_idx]
    pb = _points(kps_b)[matches.train_idx]
    base = _cell_index(pa, size_a, params.grid_cols, params.grid_rows)
    if len(np.unique(base)) == 1:
        log.warning("GMS: all matches fall into one grid cell; passing through")
        return matches.subset(np.ones(len(matches), bool), "gms", ("degenerate",))
    rotations = range(8) if params.with_rotation else (0,)
    scales = SCALE_RATIOS if params.with_scale else (1.0,)
    best = None
    for sc in scales:
        for rot in rotations:
            mask = _gms_run(pa, pb, size_a, size_b, params, rot, sc)
            if best is None or mask.sum() > best.sum():
                best = mask
    return matches.subset(best, "gms")


def _points(kps) -> np.ndarray:
    if isinstance(kps, np.ndarray):
        return kps.reshape(-1, 2).astype(np.float64)
    return np.array([(k.x, k.y) for k in kps], dtype=np.float64).reshape(-1, 2)


# --- RANSAC ---------------------------------------------------------------------


class XorShift64Star:
    """xorshift64* generator seeded through one splitmix64 step.

    next(): x ^= x >> 12; x ^= x << 25; x ^= x >> 27; return x * 0x2545F4914F6CDD1D
    (all mod 2**64). ``below(n)`` returns ``(next() >> 11) % n``.
    """

    def __init__(self, seed: int = 0):
        z = (seed + 0x9E3779B97F4A7C15) & MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        z ^= z >> 31
        self.state = z or 0x9E3779B97F4A7C15

    def next(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def below(self, n: int) -> int:
        return (self.next() >> 11) % n

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), in draw order (rejection of repeats)."""
        out: list[int] = []
        while len(out) < k:
            v = self.below(n)
            if v not in out:
                out.append(v)
        return out


@dataclass
class RansacResult:
    matches: MatchSet
    homography: np.ndarray
    inlier_mask: np.ndarray
    iterations: int
    extra: dict = field(default_factory=dict)


def _symmetric_errors(h, hinv, pa, pb):
    def apply(m, p):
        w = m[2, 0] * p[:, 0] + m[2, 1] * p[:, 1] + m[2, 2]
        w = np.where(np.abs(w) < 1e-12, np.nan, w)
        x = (m[0, 0] * p[:, 0] + m[0, 1] * p[:, 1] + m[0, 2]) / w
        y = (m[1, 0] * p[:, 0] + m[1, 1] * p[:, 1] + m[1, 2]) / w
        return np.stack([x, y], axis=1)

    with np.errstate(all="ignore"):
        fwd = np.linalg.norm(apply(h, pa) - pb, axis=1)
        bwd = np.linalg.norm(apply(hinv, pb) - pa, axis=1)
    return np.nan_to_num(fwd, nan=np.inf), np.nan_to_num(bwd, nan=np.inf)


def _inliers(h, pa, pb, thr):
    try:
        hinv = np.linalg.inv(h)
    except np.linalg.LinAlgError:
        return np.zeros(len(pa), bool)
    fwd, bwd = _symmetric_errors(h, hinv, pa, pb)
    return (fwd < thr) & (bwd < thr)


def adaptive_iterations(confidence: float, inlier_ratio: float, sample_size: int = 4, cap: int = 10_000) -> int:
    if inlier_ratio <= 0:
        return cap
    p_good = inlier_ratio**sample_size
    if p_good >= 1:
        return 1
    n = math.log(1 - confidence) / math.log(1 - p_good)
    return int(min(cap, max(1, math.ceil(n))))


def filter_ransac_homography(
    matches: MatchSet,
    kps_a,
    kps_b,
    confidence: float = 0.99,
    reproj_threshold: float = 3.0,
    seed: int = 0,
    max_iterations: int = 10_000,
) -> RansacResult:
    """4-point RANSAC over homographies with adaptive iteration count.

    A match is an inlier when both its forward and backward transfer errors
    are below ``reproj_threshold``. The winning model is refit on all its
    inliers by normalized DLT. Raises RegistrationError on failure.
    """
    n = len(matches)
    if n < 4:
        raise RegistrationError(f"RANSAC needs >= 4 matches, got {n}")
    pa = _points(kps_a)[matches.query_idx]
    pb = _points(kps_b)[matches.train_idx]
    rng = XorShift64Star(seed)
    best_mask = None
    best_count = 0
    needed = max_iterations
    it = 0
    while it < min(needed, max_iterations):
        it += 1
        idx = rng.sample(n, 4)
        try:
            h = estimate_homography_dlt(pa[idx], pb[idx])
        except DegenerateConfigurationError:
            continue
        mask = _inliers(h, pa, pb, reproj_threshold)
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            needed = adaptive_iterations(confidence, count / n, 4, max_iterations)
    if best_mask is None or best_count < 4:
        raise RegistrationError("no homography with >= 4 inliers")
    try:
        h = estimate_homography_dlt(pa[best_mask], pb[best_mask])
    except DegenerateConfigurationError as exc:
        raise RegistrationError(f"inlier refit degenerate: {exc}") from exc
    refit_mask = _inliers(h, pa, pb, reproj_threshold)
    if refit_mask.sum() >= best_count:
        mask = refit_mask
    else:
        mask = best_mask
    return RansacResult(matches.subset(mask, "ransac"), h, mask, it)


def relabel(matches: MatchSet, provenance: str) -> MatchSet:
    return replace(matches, provenance=provenance)
