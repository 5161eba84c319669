"""Registration accuracy against ground-truth homographies.

A match (p_a -> p_b) is correct when ``|H p_a - p_b| < threshold``;
A_match = 100 * correct / matches. A pair whose filter leaves no matches has
an undefined score (``None``) and is left out of the sequence average.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import _parallel
from .geometry import read_homography, transfer
from .imagecore import read_image
from .registration import PipelineConfig, register_pair

IMAGE_EXTENSIONS = (".ppm", ".pgm", ".png")


@dataclass
class EvalSequence:
    name: str
    base_image: np.ndarray
    deformed_images: list
    ground_truth: list

    def __post_init__(self):
        if len(self.deformed_images) != len(self.ground_truth):
            raise ValueError("each deformed image needs exactly one ground-truth homography")

    def pair_names(self) -> list[str]:
        return [f"1-{k + 2}" for k in range(len(self.deformed_images))]


@dataclass
class PairReport:
    pair: str
    matches: int
    correct: int
    a_match: float | None
    note: str | None = None

    def to_dict(self) -> dict:
        return {"pair": self.pair, "matches": self.matches, "correct": self.correct,
                "a_match": self.a_match, "note": self.note}


@dataclass
class EvalReport:
    sequence: str
    config: PipelineConfig
    pairs: list = field(default_factory=list)

    @property
    def pipeline(self) -> str:
        return self.config.label

    @property
    def defined(self) -> list[float]:
        return [p.a_match for p in self.pairs if p.a_match is not None]

    @property
    def average(self) -> float | None:
        vals = self.defined
        return float(np.mean(vals)) if vals else None

    @property
    def excluded_pairs(self) -> int:
        return sum(p.a_match is None for p in self.pairs)

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "pipeline": self.pipeline,
            "config": self.config.to_dict(),
            "pairs": [p.to_dict() for p in self.pairs],
            "average": self.average,
            "excluded_pairs": self.excluded_pairs,
        }


def count_correct(points_a, points_b, h_true, threshold: float = 5.0) -> int:
    """Number of correspondences with transfer error strictly below ``threshold``."""
    pa = np.asarray(points_a, dtype=np.float64).reshape(-1, 2)
    pb = np.asarray(points_b, dtype=np.float64).reshape(-1, 2)
    if len(pa) == 0:
        return 0
    x, y = transfer(h_true, pa[:, 0], pa[:, 1])
    err = np.hypot(np.atleast_1d(x) - pb[:, 0], np.atleast_1d(y) - pb[:, 1])
    return int((err < threshold).sum())


def a_match(correct: int, matches: int) -> float | None:
    return 100.0 * correct / matches if matches > 0 else None


def evaluate_pair(img_a, img_b, h_true, config: PipelineConfig = PipelineConfig(), pair: str = "1-2") -> PairReport:
    reg = register_pair(img_a, img_b, config)
    m = reg.matches
    if len(m) == 0:
        return PairReport(pair, 0, 0, None, reg.failure or "no surviving matches")
    correct = count_correct(reg.points_a[m.query_idx], reg.points_b[m.train_idx], h_true, config.threshold_px)
    note = "no correct matches" if correct == 0 else None
    return PairReport(pair, len(m), correct, a_match(correct, len(m)), note)


def evaluate_sequence(seq: EvalSequence, config: PipelineConfig = PipelineConfig()) -> EvalReport:
    def run(k):
        name = seq.pair_names()[k]
        try:
            return evaluate_pair(seq.base_image, seq.deformed_images[k], seq.ground_truth[k], config, name)
        except Exception as exc:  # one bad pair must not sink the sequence
            return PairReport(name, 0, 0, None, f"error: {exc}")

    pairs = _parallel.map_ordered(run, range(len(seq.deformed_images)))
    return EvalReport(seq.name, config, pairs)


def _find_image(directory: str, stem: str) -> str:
    for ext in IMAGE_EXTENSIONS:
        p = os.path.join(directory, stem + ext)
        if os.path.exists(p):
            return p
    raise FileNotFoundError(f"{directory}: no {stem}{{{','.join(IMAGE_EXTENSIONS)}}}")


def load_sequence(directory, name: str | None = None) -> EvalSequence:
    """Read ``img1..imgN`` and ``H1to2p..H1toNp`` from a benchmark directory."""
    directory = os.fspath(directory)
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    base = read_image(_find_image(directory, "img1"))
    deformed, truth = [], []
    k = 2
    while os.path.exists(os.path.join(directory, f"H1to{k}p")):
        deformed.append(read_image(_find_image(directory, f"img{k}")))
        truth.append(read_homography(os.path.join(directory, f"H1to{k}p")))
        k += 1
    if not deformed:
        raise FileNotFoundError(f"{directory}: no H1to2p ground truth found")
    return EvalSequence(name or os.path.basename(os.path.normpath(directory)), base, deformed, truth)


def format_table(reports: list[EvalReport]) -> str:
    """Plain-text table, one row per (sequence, pipeline)."""
    if not reports:
        return ""
    names = [p.pair for p in reports[0].pairs]
    header = ["Dataset", "Method"] + names + ["Average"]
    rows = []
    for r in reports:
        cells = ["n/a" if p.a_match is None else f"{p.a_match:.2f}" for p in r.pairs]
        avg = "n/a" if r.average is None else f"{r.average:.2f}"
        rows.append([r.sequence, r.pipeline] + cells + [avg])
    widths = [max(len(str(row[i])) for row in [header] + rows) for i in range(len(header))]
    line = lambda row: "  ".join(str(c).rjust(w) for c, w in zip(row, widths))
    return "\n".join([line(header), "-" * len(line(header))] + [line(r) for r in rows]) + "\n"


def write_report_json(path, reports) -> None:
    payload = [r.to_dict() for r in reports] if isinstance(reports, list) else reports.to_dict()
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
