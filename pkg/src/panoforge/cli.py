"""``panoforge`` command line: one subcommand per pipeline stage.

Exit status: 0 success, 1 pipeline failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import anafnet, deblurmetrics, features, regeval, stitching, synthetic
from .imagecore import ImageFormatError, read_image, to_grayscale, write_image
from .matching import GmsParams, RegistrationError, filter_gms, filter_ransac_homography, match_bruteforce, write_matches_csv
from .registration import DESCRIPTORS, FILTERS, PipelineConfig
from .undistort import CameraModel, undistort_image

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _pipeline_flags(p: argparse.ArgumentParser, default_filter: str = "gms") -> None:
    p.add_argument("--keypoints", type=int, default=5000, help="ORB keypoint budget (default 5000)")
    p.add_argument("--descriptor", choices=DESCRIPTORS, default="freak")
    p.add_argument("--filter", choices=FILTERS, default=default_filter)
    p.add_argument("--threshold-px", type=float, default=5.0, help="correctness threshold in pixels (default 5)")
    p.add_argument("--confidence", type=float, default=0.99, help="RANSAC confidence (default 0.99)")
    p.add_argument("--ransac-threshold", type=float, default=3.0, help="RANSAC inlier threshold in pixels")
    p.add_argument("--seed", type=int, default=0)


def _config(args) -> PipelineConfig:
    try:
        return PipelineConfig(
            keypoints=args.keypoints, descriptor=args.descriptor, filter=args.filter,
            threshold_px=args.threshold_px, confidence=args.confidence,
            ransac_threshold_px=args.ransac_threshold, seed=args.seed, gms=GmsParams(),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _camera(path) -> CameraModel:
    try:
        return CameraModel.from_file(path)
    except ValueError as exc:  # malformed file is a usage problem, not a pipeline failure
        raise UsageError(str(exc)) from exc


def _gray(img):
    return to_grayscale(img) if img.dtype == np.uint8 else img


def cmd_undistort(args) -> int:
    model = _camera(args.camera)
    img = read_image(args.input)
    out, diag = undistort_image(model, img, return_diagnostics=True)
    write_image(args.out, out)
    if diag.out_of_source:
        print(f"{diag.out_of_source} pixels fell outside the source", file=sys.stderr)
    return EXIT_OK


def cmd_detect(args) -> int:
    img = read_image(args.input)
    gray = _gray(img)
    kps = features.detect_orb(gray, args.keypoints)
    dset = features.DESCRIBERS[args.descriptor](gray, kps)
    features.write_features(args.out, dset, (gray.shape[1], gray.shape[0]))
    print(f"{len(dset)} keypoints described ({dset.dropped} dropped near borders)")
    return EXIT_OK


def cmd_match(args) -> int:
    da, size_a = features.read_features(args.features_a)
    db, size_b = features.read_features(args.features_b)
    if da.length_bits != db.length_bits:
        raise UsageError(f"descriptor lengths differ: {da.length_bits} vs {db.length_bits}")
    pa, pb = da.points(), db.points()
    matches = match_bruteforce(da.descriptors, db.descriptors)
    if args.filter == "gms":
        matches = filter_gms(matches, pa, pb, size_a, size_b, GmsParams())
    elif args.filter == "ransac":
        res = filter_ransac_homography(matches, pa, pb, args.confidence, args.ransac_threshold, args.seed)
        matches = res.matches
    write_matches_csv(args.out, matches)
    print(f"{len(matches)} matches written")
    return EXIT_OK


def _sequences(args):
    seqs = [regeval.load_sequence(d) for d in args.datasets]
    for kind in args.synthetic or []:
        if kind not in synthetic.SEQUENCE_SCHEDULES:
            raise UsageError(f"unknown synthetic sequence {kind!r}; choose from {sorted(synthetic.SEQUENCE_SCHEDULES)}")
        seqs.append(synthetic.warp_sequence(kind, seed=args.seed))
    if not seqs:
        raise UsageError("give at least one dataset directory or --synthetic sequence")
    return seqs


def cmd_eval(args) -> int:
    config = _config(args)
    reports = [regeval.evaluate_sequence(s, config) for s in _sequences(args)]
    table = regeval.format_table(reports)
    sys.stdout.write(table)
    if args.out:
        regeval.write_report_json(args.out, reports)
        with open(os.path.splitext(args.out)[0] + ".txt", "w", encoding="utf-8") as fh:
            fh.write(table)
    return EXIT_OK


def cmd_stitch(args) -> int:
    images = [read_image(p) for p in args.inputs]
    camera = _camera(args.camera) if args.camera else None
    cfg = stitching.StitchConfig(
        registration=_config(args), bands=args.bands, camera=camera,
        reference=args.reference, debug_dir=args.debug_matches,
    )
    result = stitching.stitch(images, cfg)
    write_image(args.out, result.panorama)
    if result.excluded:
        print(f"images left out (unregistered): {result.excluded}", file=sys.stderr)
    return EXIT_OK


def cmd_metrics(args) -> int:
    img = read_image(args.input)
    ref = read_image(args.reference) if args.reference else None
    report = deblurmetrics.measure(img, ref)
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_deblur(args) -> int:
    img = read_image(args.input)
    if args.params:
        params = anafnet.load_params(args.params)
    else:
        print("warning: no parameter file given; running in structural test mode with seeded random "
              "weights. The output is not a deblurring result.", file=sys.stderr)
        cfg = anafnet.ANAFNetConfig(in_channels=1 if img.ndim == 2 else img.shape[2])
        params = anafnet.random_params(cfg, seed=args.seed, scale=0.05)
    channels = 1 if img.ndim == 2 else img.shape[2]
    if channels != params.config.in_channels:
        raise UsageError(f"image has {channels} channels, parameters expect {params.config.in_channels}")
    write_image(args.out, anafnet.restore_image(img, params))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panoforge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("undistort", help="remove radial/tangential lens distortion")
    p.add_argument("input")
    p.add_argument("--camera", required=True, help="camera model file (key = value lines)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_undistort)

    p = sub.add_parser("detect", help="detect ORB keypoints and write descriptors")
    p.add_argument("input")
    p.add_argument("--keypoints", type=int, default=5000)
    p.add_argument("--descriptor", choices=DESCRIPTORS, default="freak")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("match", help="match two feature files and filter")
    p.add_argument("features_a")
    p.add_argument("features_b")
    p.add_argument("--filter", choices=FILTERS, default="gms")
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--ransac-threshold", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", help="matching accuracy against ground-truth homographies")
    p.add_argument("datasets", nargs="*", help="directories holding img1..imgN and H1to{k}p")
    p.add_argument("--synthetic", action="append", metavar="KIND",
                   help="add a generated warp sequence (rotation, scale, blur, light)")
    _pipeline_flags(p)
    p.add_argument("--out", help="JSON report path; a .txt table is written next to it")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stitch", help="stitch overlapping images into a panorama")
    p.add_argument("inputs", nargs="+")
    _pipeline_flags(p)
    p.add_argument("--bands", type=int, default=5)
    p.add_argument("--camera", help="undistort inputs with this camera model first")
    p.add_argument("--reference", type=int, default=None, help="index of the reference image")
    p.add_argument("--debug-matches", metavar="DIR", help="dump match lines, seam masks and gains here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stitch)

    p = sub.add_parser("metrics", help="no-reference sharpness metrics, PSNR with --reference")
    p.add_argument("input")
    p.add_argument("--reference")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("deblur", help="run the restoration network forward pass")
    p.add_argument("input")
    p.add_argument("--params", help="network parameter file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_deblur)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad usage
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ImageFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except stitching.StitchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(exc.diagnostics, default=str), file=sys.stderr)
        return EXIT_FAILURE
    except (RegistrationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
