"""Brown-Conrady lens distortion: point model, inversion, and image correction.

Calibration parameters are given, never estimated here. The camera file is
plain text with one ``key=value`` per line for fx, fy, cx, cy, k1, k2, k3,
p1, p2 (``#`` starts a comment; missing distortion terms default to 0).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields

import numpy as np

from .geometry import bilinear_sample
from .imagecore import validate_u8

MAX_ITERATIONS = 20
STEP_TOL = 1e-8


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @classmethod
    def identity(cls, width: int, height: int, focal: float | None = None) -> "CameraModel":
        f = float(focal if focal is not None else max(width, height))
        return cls(f, f, (width - 1) / 2.0, (height - 1) / 2.0)

    @classmethod
    def from_file(cls, path) -> "CameraModel":
        path = os.fspath(path)
        if not os.path.exists(path):
            raise FileNotFoundError(f"camera config not found: {path}")
        values = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, val = (s.strip() for s in line.split("=", 1))
                if key not in {f.name for f in fields(cls)}:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = float(val)
        missing = {"fx", "fy", "cx", "cy"} - values.keys()
        if missing:
            raise ValueError(f"{path}: missing keys {sorted(missing)}")
        return cls(**values)

    def to_file(self, path) -> None:
        with open(os.fspath(path), "w", encoding="utf-8") as fh:
            for f in fields(self):
                fh.write(f"{f.name}={getattr(self, f.name)!r}\n")


def distort_point(model: CameraModel, x, y):
    """Apply radial + tangential distortion to normalized coordinates."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r2 = x * x + y * y
    radial = 1.0 + r2 * (model.k1 + r2 * (model.k2 + r2 * model.k3))
    xd = x * radial + 2.0 * model.p1 * x * y + model.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + model.p1 * (r2 + 2.0 * y * y) + 2.0 * model.p2 * x * y
    if xd.ndim == 0:
        return float(xd), float(yd)
    return xd, yd


def undistort_point(model: CameraModel, xd, yd, max_iter: int = MAX_ITERATIONS, tol: float = STEP_TOL):
    """Invert :func:`distort_point` iteratively.

    Each iteration takes a Newton step on ``distort(x, y) - (xd, yd)``
    starting from ``(xd, yd)``; plain fixed-point substitution contracts too
    slowly near the fold of strong barrel distortion. Returns
    ``(x, y, converged)``; ``converged`` (array, or bool for scalar input) is
    False where the step never fell below ``tol`` within ``max_iter``
    iterations, e.g. when the point has no preimage.
    """
    xd = np.asarray(xd, dtype=np.float64)
    yd = np.asarray(yd, dtype=np.float64)
    scalar = xd.ndim == 0
    xd = np.atleast_1d(xd)
    yd = np.atleast_1d(yd)
    k1, k2, k3, p1, p2 = model.k1, model.k2, model.k3, model.p1, model.p2
    x = xd.copy()
    y = yd.copy()
    converged = np.zeros(x.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            r2 = x * x + y * y
            radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
            dradial = k1 + r2 * (2.0 * k2 + 3.0 * r2 * k3)
            fx = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x) - xd
            fy = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y - yd
            jxx = radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x
            jyy = radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x
            jxy = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y
            det = jxx * jyy - jxy * jxy
            sx = (jyy * fx - jxy * fy) / det
            sy = (jxx * fy - jxy * fx) / det
            active = ~converged
            x = np.where(active, x - sx, x)
            y = np.where(active, y - sy, y)
            converged |= active & (np.hypot(sx, sy) < tol)
            if converged.all():
                break
    converged &= np.isfinite(x) & np.isfinite(y)
    if scalar:
        return float(x[0]), float(y[0]), bool(converged[0])
    return x, y, converged


@dataclass
class RemapDiagnostics:
    out_of_source: int = 0
    non_converged: int = 0


def _pixel_to_normalized(model, u, v):
    return (u - model.cx) / model.fx, (v - model.cy) / model.fy


def _normalized_to_pixel(model, x, y):
    return x * model.fx + model.cx, y * model.fy + model.cy


def _remap(img, sx, sy, valid) -> np.ndarray:
    h, w = img.shape[:2]
    valid = valid & np.isfinite(sx) & np.isfinite(sy)
    valid &= (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    sx = np.where(valid, sx, 0.0)
    sy = np.where(valid, sy, 0.0)
    vals = bilinear_sample(img, sx, sy)
    out = np.clip(np.rint(vals), 0, 255).astype(np.uint8)
    out[~valid] = 0
    return out, valid


def undistort_image(model: CameraModel, img, return_diagnostics: bool = False):
    """Produce the distortion-free view of a distorted photograph.

    Each output pixel is treated as an ideal (undistorted) position, pushed
    through the forward model to find where the lens imaged it, and sampled
    bilinearly there. Positions that land outside the source are black.
    """
    img = validate_u8(img)
    h, w = img.shape[:2]
    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    xu, yu = _pixel_to_normalized(model, u, v)
    xd, yd = distort_point(model, xu, yu)
    sx, sy = _normalized_to_pixel(model, xd, yd)
    out, valid = _remap(img, sx, sy, np.ones_like(sx, dtype=bool))
    diag = RemapDiagnostics(out_of_source=int((~valid).sum()))
    return (out, diag) if return_diagnostics else out


def distort_image(model: CameraModel, img, return_diagnostics: bool = False):
    """Simulate the lens: render what the distorting camera would record.

    Needs the inverse model per output pixel, found by fixed-point iteration;
    pixels where it fails to converge are black and counted.
    """
    img = validate_u8(img)
    h, w = img.shape[:2]
    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    xd, yd = _pixel_to_normalized(model, u, v)
    xu, yu, ok = undistort_point(model, xd.ravel(), yd.ravel())
    xu = xu.reshape(h, w)
    yu = yu.reshape(h, w)
    ok = ok.reshape(h, w)
    sx, sy = _normalized_to_pixel(model, xu, yu)
    out, valid = _remap(img, sx, sy, ok)
    diag = RemapDiagnostics(out_of_source=int((~valid & ok).sum()), non_converged=int((~ok).sum()))
    return (out, diag) if return_diagnostics else out
