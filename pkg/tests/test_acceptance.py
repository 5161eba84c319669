"""Acceptance gate: one test group per criterion, each printing a PASS/FAIL line.

A per-criterion summary is also printed at the end of the pytest run.
"""
import json
import math
import os
import time

import numpy as np
import pytest
from scipy import ndimage

from panoforge import anafnet as A
from panoforge import deblurmetrics as dm
from panoforge import matching as M
from panoforge import regeval, stitching, synthetic
from panoforge.cli import main
from panoforge.geometry import (estimate_homography_dlt, relative_error, transfer_points, warp_image,
                                write_homography)
from panoforge.imagecore import write_image
from panoforge.registration import PipelineConfig
from panoforge.undistort import CameraModel


def verdict(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# --- 1: protocol constants in the emitted report ------------------------------------

def test_criterion_1_default_config_in_report(tmp_path):
    ds = tmp_path / "seq"
    ds.mkdir()
    img = synthetic.texture(240, 320, seed=0)
    write_image(ds / "img1.pgm", img)
    write_image(ds / "img2.pgm", img)
    write_homography(ds / "H1to2p", np.eye(3))
    assert main(["eval", str(ds), "--out", str(tmp_path / "r.json")]) == 0
    cfg = json.loads((tmp_path / "r.json").read_text())[0]["config"]
    ok = cfg["keypoints"] == 5000 and cfg["threshold_px"] == 5.0 and cfg["confidence"] == 0.99
    verdict(1, ok, f"keypoints={cfg['keypoints']} threshold_px={cfg['threshold_px']} confidence={cfg['confidence']}")


# --- 2: matching-accuracy ordering -------------------------------------------------

PIPELINES = {
    "ours": PipelineConfig(descriptor="freak", filter="gms"),
    "ORB+GMS": PipelineConfig(descriptor="brief", filter="gms"),
    "ORB+RANSAC": PipelineConfig(descriptor="brief", filter="ransac"),
}


def test_criterion_2_accuracy_ordering():
    t0 = time.perf_counter()
    seqs = [synthetic.warp_sequence(kind) for kind in ("rotation", "scale")]
    avg = {}
    for name, cfg in PIPELINES.items():
        reports = [regeval.evaluate_sequence(s, cfg) for s in seqs]
        print(regeval.format_table(reports), end="")
        avg[name] = float(np.mean([r.average for r in reports]))
    elapsed = time.perf_counter() - t0
    ok = (avg["ours"] >= avg["ORB+GMS"] >= avg["ORB+RANSAC"]
          and avg["ours"] - avg["ORB+RANSAC"] >= 2.0 and elapsed < 300)
    detail = ", ".join(f"{k}={v:.2f}" for k, v in avg.items()) + f", {elapsed:.0f} s"
    verdict(2, ok, detail)


# --- 3: metric analytics -----------------------------------------------------------

def test_criterion_3_metric_analytics():
    const = np.full((32, 32), 128, np.uint8)
    uniform = np.arange(256, dtype=np.uint8).reshape(16, 16)
    full = np.array([[0, 255], [40, 90]], np.uint8)
    step = np.zeros((4, 10), np.uint8)
    step[:, 5:] = 255
    checks = {
        "entropy(constant)": dm.entropy(const) == 0,
        "entropy(uniform)": abs(dm.entropy(uniform) - 8.0) <= 1e-9,
        "entropy(two-valued)": abs(dm.entropy(np.array([[0, 9]], np.uint8)) - 1.0) <= 1e-12,
        "brenner(constant)": dm.brenner_gradient(const) == 0,
        "brenner(step)": dm.brenner_gradient(step) == 2 * 255**2 * 4 / (8 * 4),
        "contrast(full range)": dm.contrast(full) == 255,
        "contrast(10..110)": dm.contrast(np.arange(10, 111, dtype=np.uint8)[None]) == 100,
        "psnr(0, 255)": dm.psnr(np.zeros((4, 4), np.uint8), np.full((4, 4), 255, np.uint8)) == 0.0,
        "psnr(equal)": math.isinf(dm.psnr(const, const)),
        "psnr(0, 16)": abs(dm.psnr(np.array([[0]], np.uint8), np.array([[16]], np.uint8))
                           - 10 * math.log10(255**2 / 256)) < 1e-12,
    }
    failed = [k for k, v in checks.items() if not v]
    verdict(3, not failed, f"{len(checks) - len(failed)}/{len(checks)} exact checks" + (f", failed {failed}" if failed else ""))


# --- 4: blur lowers the Brenner gradient ------------------------------------------

def test_criterion_4_blur_direction():
    wins = 0
    for seed in range(20):
        sharp = synthetic.texture(120, 160, seed=100 + seed)
        blurred = np.clip(np.rint(ndimage.gaussian_filter(sharp.astype(float), 2.0)), 0, 255).astype(np.uint8)
        wins += dm.brenner_gradient(sharp) > dm.brenner_gradient(blurred)
    verdict(4, wins >= 19, f"sharp > blurred in {wins}/20 pairs")


# --- 5: registration oracles -------------------------------------------------------

def _naive(da, db):
    d = np.array([[sum(bin(int(x) ^ int(y)).count("1") for x, y in zip(a, b)) for b in db] for a in da])
    return list(zip(range(len(da)), d.argmin(axis=1).tolist(), d.min(axis=1).tolist()))


def _gms_toy():
    layout = [((5, 5), (5, 5), 4), ((6, 5), (6, 5), 3), ((5, 6), (5, 6), 2), ((4, 4), (4, 4), 1), ((7, 7), (2, 2), 1)]
    pa, pb = [], []
    for l, r, n in layout:
        pa += [((l[0] + 0.5) * 10, (l[1] + 0.5) * 10)] * n
        pb += [((r[0] + 0.5) * 10, (r[1] + 0.5) * 10)] * n
    cs = M.gms_cell_scores(np.array(pa), np.array(pb), (200, 200), (200, 200))
    idx = lambda c: c[0] + 20 * c[1]
    # hand-computed neighbourhood supports minus the match itself, thresholds 6*sqrt(mean count)
    expect = {(5, 5): (9, 6 * math.sqrt(10 / 9), True), (6, 5): (8, 6.0, True), (5, 6): (8, 6.0, True),
              (4, 4): (4, 6 * math.sqrt(5 / 9), False), (7, 7): (0, 2.0, False)}
    return all(cs.score[idx(c)] == s and abs(cs.threshold[idx(c)] - t) < 1e-12 and bool(cs.accepted[idx(c)]) == a
               for c, (s, t, a) in expect.items())


def test_criterion_5_registration_oracles():
    rng = np.random.default_rng(5)
    bf_ok = 0
    for _ in range(100):
        da = rng.integers(0, 4, (int(rng.integers(1, 30)), 32), dtype=np.uint8)
        db = rng.integers(0, 4, (int(rng.integers(1, 30)), 32), dtype=np.uint8)
        bf_ok += list(M.match_bruteforce(da, db)) == _naive(da, db)
    gms_ok = _gms_toy()
    h_true = np.array([[0.95, 0.1, 20.0], [-0.08, 1.05, -10.0], [1e-4, -5e-5, 1.0]])
    recovered = []
    for seed in range(100):
        r = np.random.default_rng(seed)
        pa = r.uniform(0, [640, 480], (200, 2))
        pb = transfer_points(h_true, pa)
        pb[:100] += r.normal(0, 0.5, (100, 2))
        pb[100:] = r.uniform(0, [640, 480], (100, 2))
        m = M.MatchSet(np.arange(200), np.arange(200), np.zeros(200))
        res = M.filter_ransac_homography(m, pa, pb, seed=seed)
        recovered.append(res.inlier_mask[:100].mean())
    rate = float(np.mean(recovered))
    ok = bf_ok == 100 and gms_ok and rate >= 0.95
    verdict(5, ok, f"brute force {bf_ok}/100 exact, GMS toy {'exact' if gms_ok else 'MISMATCH'}, RANSAC inlier recovery {rate:.3f}")


# --- 6: geometry -------------------------------------------------------------------

def test_criterion_6_geometry():
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in (4, 10, 100):
        for _ in range(20):
            h = np.eye(3) + rng.normal(0, 0.1, (3, 3))
            h[2, :2] *= 1e-2
            pa = rng.uniform(0, 500, (n, 2))
            worst = max(worst, relative_error(estimate_homography_dlt(pa, transfer_points(h, pa)), h))
    smooth = ndimage.gaussian_filter(rng.uniform(0, 255, (240, 320)), 6)
    smooth = (smooth - smooth.min()) / np.ptp(smooth)
    h = np.array([[1.05, 0.08, -12.0], [-0.06, 0.97, 9.0], [2e-5, 1e-5, 1.0]])
    box = (0, 0, 320, 240)
    fwd, a1 = warp_image(smooth.astype(np.float32), h, box)
    back, a2 = warp_image(fwd, np.linalg.inv(h), box)
    # doubly valid: every bilinear tap of the return trip landed inside the forward footprint
    support, _ = warp_image(a1.astype(np.float32), np.linalg.inv(h), box)
    inner = ndimage.binary_erosion(a2 & (support > 0.999), iterations=2)
    mse = np.mean((back[inner] - smooth[inner]) ** 2)
    psnr = 10 * math.log10(1.0 / mse)
    verdict(6, worst <= 1e-8 and psnr >= 40, f"DLT worst relative error {worst:.2e}, round-trip PSNR {psnr:.1f} dB")


# --- 7: end-to-end stitching -------------------------------------------------------

def test_criterion_7_stitching():
    src = synthetic.texture(768, 1024, seed=11, color=True)
    crops, offsets = synthetic.overlapping_crops(src, 640, 0.6)
    t0 = time.perf_counter()
    res = stitching.stitch(crops)
    t_two = time.perf_counter() - t0
    x0, y0, w, h = res.alignment.bounds
    ref = offsets[res.alignment.reference]
    # overlap columns in source coordinates, mapped onto the canvas of the reference crop
    lo, hi = offsets[1], offsets[0] + 640
    cols = np.arange(lo, hi) - ref - x0
    rows = np.arange(768) - y0
    rows = rows[(rows >= 0) & (rows < h)]
    cols = cols[(cols >= 0) & (cols < w)]
    pano = res.panorama[np.ix_(rows, cols)]
    truth = src[np.ix_(rows + y0, cols + x0 + ref)]
    psnr = dm.psnr(pano, truth)

    scene = synthetic.texture(900, 1400, seed=7, color=True)
    views = [(420, 450, 0, 1.0), (700, 450, 15, 1.2), (980, 450, -5, 0.9)]
    imgs, _ = synthetic.transformed_crops(scene, (480, 640), views)
    t0 = time.perf_counter()
    res3 = stitching.stitch(imgs)
    t_three = time.perf_counter() - t0
    connected = res3.graph.components()[0] == [0, 1, 2] and res3.panorama.size > 0
    ok = psnr >= 30 and connected and t_two < 60 and t_three < 60
    verdict(7, ok, f"two-crop overlap PSNR {psnr:.1f} dB in {t_two:.1f} s; three rotated/scaled crops "
                   f"{'connected' if connected else 'NOT connected'} in {t_three:.1f} s")


# --- 8: network structure ----------------------------------------------------------

def _conv_oracle(x, wt, b, groups):
    n, c, hh, ww = x.shape
    oc, ig, k, _ = wt.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    y = np.zeros((n, oc, hh, ww))
    for o in range(oc):
        g = o // (oc // groups)
        for i in range(hh):
            for j in range(ww):
                y[:, o, i, j] = (xp[:, g * ig:(g + 1) * ig, i:i + k, j:j + k] * wt[o]).sum(axis=(1, 2, 3)) + b[o]
    return y


def test_criterion_8_network_structure():
    rng = np.random.default_rng(8)
    errs = {}
    x = rng.normal(size=(1, 4, 6, 7))
    for k, groups in ((1, 1), (3, 1), (3, 4), (3, 2)):
        p = A.ConvParams(rng.normal(size=(4, 4 // groups, k, k)), rng.normal(size=4), groups)
        errs[f"conv{k}x{k}/g{groups}"] = np.abs(A.conv2d(x, p) - _conv_oracle(x, p.weight, p.bias, groups)).max()
    errs["simple_gate"] = np.abs(A.simple_gate(x) - x[:, :2] * x[:, 2:]).max()
    w = A.ConvParams(rng.normal(size=(4, 4, 1, 1)), rng.normal(size=4))
    att = w.weight[:, :, 0, 0] @ x[0].mean(axis=(1, 2)) + w.bias
    errs["sca"] = np.abs(A.sca(x, w) - x * att[None, :, None, None]).max()
    xe = rng.normal(size=(1, 3, 6, 7))
    gp = A.AttentionGateParams(rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=2), rng.normal(size=2), 0.3)
    q = np.einsum("dc,chw->dhw", gp.w_e, xe[0]) + np.einsum("dc,chw->dhw", gp.w_d, x[0]) + gp.b_e[:, None, None]
    errs["attention_gate"] = np.abs(A.attention_gate(xe, x, gp) - (np.einsum("d,dhw->hw", gp.psi, q) + gp.b_psi) * x).max()
    oracle_ok = max(errs.values()) <= 1e-5
    ident = A.AttentionGateParams(gp.w_e, gp.w_d, gp.b_e, np.zeros(2), 1.0)
    gate_identity = np.array_equal(A.attention_gate(xe, x, ident), x)
    img = rng.uniform(size=(1, 3, 32, 48))
    zero_err = np.abs(A.anafnet_forward(img, A.zero_params(A.ANAFNetConfig())) - img).max()
    params = A.random_params(A.ANAFNetConfig(), seed=1)
    deterministic = A.anafnet_forward(img, params).tobytes() == A.anafnet_forward(img, params).tobytes()
    ok = oracle_ok and gate_identity and zero_err <= 1e-5 and deterministic
    verdict(8, ok, f"max oracle error {max(errs.values()):.1e}, gate identity {gate_identity}, "
                   f"zero-weight error {zero_err:.1e}, deterministic {deterministic}")


# --- 9: CLI determinism ------------------------------------------------------------

@pytest.fixture(scope="module")
def cli_inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli_inputs")
    src = synthetic.texture(360, 720, seed=2, color=True)
    crops, _ = synthetic.overlapping_crops(src, 450, 0.6)
    for k, c in enumerate(crops):
        write_image(d / f"crop{k}.png", c)
    write_image(d / "small.pgm", synthetic.texture(96, 128, seed=4))
    CameraModel(130.0, 130.0, 63.5, 47.5, k1=-0.2, k2=0.04, p1=1e-3).to_file(d / "barrel.cam")
    seq = synthetic.warp_sequence("rotation", height=240, width=320, seed=1)
    (d / "seq").mkdir()
    write_image(d / "seq" / "img1.pgm", seq.base_image)
    for k, (img, h) in enumerate(zip(seq.deformed_images[:2], seq.ground_truth[:2]), start=2):
        write_image(d / "seq" / f"img{k}.pgm", img)
        write_homography(d / "seq" / f"H1to{k}p", h)
    return d


def _commands(d, out):
    feats = [str(out / "a.feat"), str(out / "b.feat")]
    return [
        ["undistort", str(d / "small.pgm"), "--camera", str(d / "barrel.cam"), "--out", str(out / "u.pgm")],
        ["detect", str(d / "crop0.png"), "--out", feats[0]],
        ["detect", str(d / "crop1.png"), "--out", feats[1]],
        ["match", *feats, "--filter", "gms", "--out", str(out / "gms.csv")],
        ["match", *feats, "--filter", "ransac", "--seed", "3", "--out", str(out / "ransac.csv")],
        ["eval", str(d / "seq"), "--seed", "3", "--out", str(out / "eval.json")],
        ["stitch", str(d / "crop0.png"), str(d / "crop1.png"), "--seed", "3", "--out", str(out / "pano.png"),
         "--debug-matches", str(out / "dbg")],
        ["metrics", str(d / "small.pgm"), "--reference", str(out / "u.pgm"), "--out", str(out / "metrics.json")],
        ["deblur", str(d / "small.pgm"), "--seed", "3", "--out", str(out / "deblur.pgm")],
    ]


def _run_all(d, out, threads, monkeypatch):
    out.mkdir()
    monkeypatch.setenv("PANOFORGE_THREADS", str(threads))
    codes = [main(cmd) for cmd in _commands(d, out)]
    files = {}
    for p in sorted(out.rglob("*")):
        if p.is_file():
            files[str(p.relative_to(out))] = p.read_bytes()
    return codes, files


def test_criterion_9_cli_determinism(cli_inputs, tmp_path, monkeypatch, capsys):
    many = max(os.cpu_count() or 1, 4)
    runs = [_run_all(cli_inputs, tmp_path / name, t, monkeypatch) for name, t in (("a", 1), ("b", 1), ("c", many))]
    capsys.readouterr()
    codes_ok = all(c == [0] * len(_commands(cli_inputs, tmp_path)) for c, _ in runs)
    names = set(runs[0][1])
    differing = sorted(k for k in names if len({r[1].get(k) for r in runs}) != 1)
    ok = codes_ok and not differing and len(names) >= 10
    verdict(9, ok, f"{len(_commands(cli_inputs, tmp_path))} commands, {len(names)} output files identical across "
                   f"two runs and 1 vs {many} threads" + (f"; differing: {differing}" if differing else "")
                   + ("" if codes_ok else f"; exit codes {[c for c, _ in runs]}"))
