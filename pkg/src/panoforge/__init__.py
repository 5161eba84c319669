"""Fisheye-to-panorama toolkit: lens correction, ORB/FREAK/GMS registration,
homography evaluation, panorama stitching, sharpness metrics and a numpy
forward pass of an attention-gated NAFNet."""

from .geometry import estimate_homography_dlt, warp_image
from .imagecore import read_image, write_image
from .registration import PipelineConfig, register_pair
from .stitching import StitchConfig, StitchError, stitch

__all__ = [
    "PipelineConfig", "StitchConfig", "StitchError", "estimate_homography_dlt",
    "read_image", "register_pair", "stitch", "warp_image", "write_image",
]
__version__ = "0.1.0"
