"""Detector / descriptor / filter combinations used by evaluation and stitching."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .features import DESCRIBERS, detect_orb
from .imagecore import to_float, to_grayscale
from .matching import (
    GmsParams,
    MatchSet,
    RegistrationError,
    filter_gms,
    filter_ransac_homography,
    match_bruteforce,
)

DESCRIPTORS = ("brief", "freak")
FILTERS = ("ransac", "gms", "none")

# display names of the three compared pipelines
PIPELINE_LABELS = {
    ("brief", "ransac"): "ORB+RANSAC",
    ("brief", "gms"): "ORB+GMS",
    ("freak", "gms"): "ours",
}


@dataclass(frozen=True)
class PipelineConfig:
    keypoints: int = 5000
    descriptor: str = "freak"
    filter: str = "gms"
    threshold_px: float = 5.0
    confidence: float = 0.99
    ransac_threshold_px: float = 3.0
    seed: int = 0
    gms: GmsParams = field(default_factory=GmsParams)

    def __post_init__(self):
        if self.descriptor not in DESCRIPTORS:
            raise ValueError(f"unknown descriptor {self.descriptor!r}")
        if self.filter not in FILTERS:
            raise ValueError(f"unknown filter {self.filter!r}")
        if self.keypoints < 1:
            raise ValueError("keypoints must be >= 1")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")

    @property
    def label(self) -> str:
        return PIPELINE_LABELS.get(
            (self.descriptor, self.filter),
            f"ORB+{self.descriptor.upper()}+{self.filter.upper()}",
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["label"] = self.label
        return d


@dataclass
class PairRegistration:
    points_a: np.ndarray
    points_b: np.ndarray
    raw: MatchSet
    matches: MatchSet
    homography: np.ndarray | None = None
    failure: str | None = None


def _gray(img) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return to_grayscale(img)
    if img.ndim == 3:
        raise ValueError("float inputs must be grayscale")
    return to_float(img)


def describe_image(img, config: PipelineConfig):
    gray = _gray(img)
    kps = detect_orb(gray, config.keypoints)
    return DESCRIBERS[config.descriptor](gray, kps), gray.shape


def register_pair(img_a, img_b, config: PipelineConfig) -> PairRegistration:
    """Detect, describe, brute-force match and filter one image pair.

    A filter that cannot produce a result (RANSAC failure) yields an empty
    match set with ``failure`` set rather than raising.
    """
    da, shape_a = describe_image(img_a, config)
    db, shape_b = describe_image(img_b, config)
    pa, pb = da.points(), db.points()
    if len(da) == 0 or len(db) == 0:
        empty = MatchSet.empty()
        return PairRegistration(pa, pb, empty, empty, None, "no keypoints")
    raw = match_bruteforce(da.descriptors, db.descriptors)
    size_a = (shape_a[1], shape_a[0])
    size_b = (shape_b[1], shape_b[0])
    if config.filter == "none":
        return PairRegistration(pa, pb, raw, raw)
    if config.filter == "gms":
        return PairRegistration(pa, pb, raw, filter_gms(raw, pa, pb, size_a, size_b, config.gms))
    try:
        res = filter_ransac_homography(raw, pa, pb, config.confidence, config.ransac_threshold_px, config.seed)
    except RegistrationError as exc:
        return PairRegistration(pa, pb, raw, MatchSet.empty("ransac"), None, str(exc))
    return PairRegistration(pa, pb, raw, res.matches, res.homography)
