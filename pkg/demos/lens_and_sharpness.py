"""Barrel-distort a line chart, correct it with the known camera model, then
score a sharp scene against blurred copies with the sharpness metrics.

    python3 demos/lens_and_sharpness.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np
from scipy import ndimage

from panoforge import deblurmetrics, synthetic
from panoforge.imagecore import write_image
from panoforge.undistort import CameraModel, distort_image, undistort_image

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/lens")
out.mkdir(parents=True, exist_ok=True)

chart = np.full((240, 320), 220, np.uint8)
chart[::40, :] = chart[:, ::40] = 40
chart = ndimage.grey_erosion(chart, size=(3, 3))
camera = CameraModel(300.0, 300.0, 159.5, 119.5, k1=-0.25, k2=0.05)
bent = distort_image(camera, chart)
fixed = undistort_image(camera, bent)
for name, img in (("chart", chart), ("distorted", bent), ("corrected", fixed)):
    write_image(out / f"{name}.pgm", img)
inner = (slice(30, -30), slice(40, -40))
print("mean abs error vs chart, central region:")
print(f"  distorted {np.abs(bent[inner].astype(int) - chart[inner]).mean():.2f}")
print(f"  corrected {np.abs(fixed[inner].astype(int) - chart[inner]).mean():.2f}")

sharp = synthetic.texture(240, 320, seed=5)
print("\nsigma  brenner   entropy  contrast  psnr")
for sigma in (0, 1, 2, 3):
    img = sharp if sigma == 0 else np.rint(ndimage.gaussian_filter(sharp.astype(float), sigma)).astype(np.uint8)
    r = deblurmetrics.measure(img, sharp)
    print(f"{sigma:5}  {r.brenner:8.2f}  {r.entropy:7.4f}  {r.contrast:8.0f}  {r.psnr:.2f}")
