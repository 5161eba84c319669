"""No-reference sharpness metrics (Brenner gradient, entropy, contrast) and PSNR.

All metrics work on 8-bit intensities; color input is converted to BT.601
gray and rounded first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imagecore import gray_u8


@dataclass(frozen=True)
class MetricsReport:
    brenner: float
    brenner_sum: float
    entropy: float
    contrast: float
    psnr: float | None = None

    def to_dict(self) -> dict:
        out = {
            "brenner_mean": self.brenner,
            "brenner_sum": self.brenner_sum,
            "entropy": self.entropy,
            "contrast": self.contrast,
        }
        if self.psnr is not None:
            out["psnr"] = "inf" if math.isinf(self.psnr) else self.psnr
        return out


def brenner_sum(img) -> float:
    g = gray_u8(img).astype(np.int64)
    if g.shape[1] < 3:
        raise ValueError("Brenner gradient needs width >= 3")
    d = g[:, 2:] - g[:, :-2]
    return float((d * d).sum())


def brenner_gradient(img) -> float:
    """Mean of (I(x+2, y) - I(x, y))^2 over the (w-2)*h valid positions."""
    g = gray_u8(img)
    if g.shape[1] < 3:
        raise ValueError("Brenner gradient needs width >= 3")
    return brenner_sum(g) / ((g.shape[1] - 2) * g.shape[0])


def entropy(img) -> float:
    """Shannon entropy in bits of the 256-bin gray histogram."""
    g = gray_u8(img)
    hist = np.bincount(g.ravel(), minlength=256).astype(np.float64)
    p = hist[hist > 0] / g.size
    return float(max(0.0, -(p * np.log2(p)).sum()))


def contrast(img) -> float:
    """Intensity range, max - min."""
    g = gray_u8(img)
    return float(int(g.max()) - int(g.min()))


def psnr(a, b) -> float:
    """10 log10(255^2 / MSE); identical images give ``math.inf``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * math.log10(255.0**2 / mse))


def measure(img, reference=None) -> MetricsReport:
    return MetricsReport(
        brenner=brenner_gradient(img),
        brenner_sum=brenner_sum(img),
        entropy=entropy(img),
        contrast=contrast(img),
        psnr=None if reference is None else psnr(img, reference),
    )
