import json

import numpy as np
import pytest

from panoforge import regeval
from panoforge.geometry import write_homography
from panoforge.imagecore import write_image
from panoforge.registration import PipelineConfig


def test_count_correct_seven_of_ten():
    rng = np.random.default_rng(0)
    pa = rng.uniform(0, 100, (10, 2))
    h = np.array([[1.0, 0, 3], [0, 1, -2], [0, 0, 1]])
    pb = pa + [3, -2]
    offsets = np.array([0, 1, 2, 3, 4.9, 0.5, 0, 5.0, 7, 40])
    pb[:, 0] += offsets
    assert regeval.count_correct(pa, pb, h) == 7
    assert regeval.a_match(7, 10) == pytest.approx(70.0)


def test_a_match_undefined_without_matches():
    assert regeval.a_match(0, 0) is None
    assert regeval.a_match(0, 5) == 0.0


def test_threshold_monotone():
    rng = np.random.default_rng(1)
    pa = rng.uniform(0, 100, (200, 2))
    pb = pa + rng.normal(0, 4, (200, 2))
    counts = [regeval.count_correct(pa, pb, np.eye(3), t) for t in (1, 2, 5, 10, 100)]
    assert counts == sorted(counts) and counts[-1] == 200


def test_average_skips_undefined():
    r = regeval.EvalReport("s", PipelineConfig(), [
        regeval.PairReport("1-2", 10, 8, 80.0),
        regeval.PairReport("1-3", 0, 0, None, "no surviving matches"),
        regeval.PairReport("1-4", 4, 4, 100.0),
    ])
    assert r.average == pytest.approx(90.0)
    assert r.excluded_pairs == 1
    assert "n/a" in regeval.format_table([r])


def test_self_pair_is_perfect(texture):
    texture = texture()
    rep = regeval.evaluate_pair(texture, texture, np.eye(3), PipelineConfig(keypoints=1000))
    assert rep.matches > 100 and rep.a_match == pytest.approx(100.0)


def test_load_sequence_and_json(tmp_path, texture):
    texture = texture()
    write_image(tmp_path / "img1.pgm", texture)
    write_image(tmp_path / "img2.pgm", texture)
    write_homography(tmp_path / "H1to2p", np.eye(3))
    seq = regeval.load_sequence(tmp_path)
    assert seq.pair_names() == ["1-2"] and np.array_equal(seq.deformed_images[0], texture)
    rep = regeval.evaluate_sequence(seq, PipelineConfig(keypoints=500))
    regeval.write_report_json(tmp_path / "r.json", [rep])
    data = json.loads((tmp_path / "r.json").read_text())
    cfg = data[0]["config"]
    assert cfg["keypoints"] == 500 and cfg["threshold_px"] == 5.0 and cfg["confidence"] == 0.99
    assert data[0]["pipeline"] == rep.pipeline


def test_load_sequence_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        regeval.load_sequence(tmp_path / "nope")
    with pytest.raises(FileNotFoundError):
        regeval.load_sequence(tmp_path)


def test_mismatched_sequence_rejected():
    img = np.zeros((8, 8), np.uint8)
    with pytest.raises(ValueError):
        regeval.EvalSequence("x", img, [img], [])
