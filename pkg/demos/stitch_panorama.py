"""Render three overlapping views of a synthetic scene (one rotated 15 degrees
and zoomed 1.2x), stitch them, and save the inputs, panorama and debug dumps.

    python3 demos/stitch_panorama.py [out_dir]
"""
import sys
import time
from pathlib import Path

from panoforge import stitching, synthetic
from panoforge.imagecore import write_image

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/stitch")
out.mkdir(parents=True, exist_ok=True)

scene = synthetic.texture(900, 1400, seed=7, color=True)
views = [(420, 450, 0, 1.0), (700, 450, 15, 1.2), (980, 450, -5, 0.9)]
images, _ = synthetic.transformed_crops(scene, (480, 640), views)
for k, img in enumerate(images):
    write_image(out / f"view{k}.png", img)

t0 = time.perf_counter()
result = stitching.stitch(images, stitching.StitchConfig(debug_dir=str(out / "debug")))
print(f"stitched {len(images)} views in {time.perf_counter() - t0:.1f} s")

for e in result.graph.edges:
    print(f"  edge {e.i}-{e.j}: {e.inliers} inliers of {e.matches} filtered matches")
print(f"  reference view {result.alignment.reference}, gains {result.gains.round(3).tolist()}")
print(f"  canvas {result.panorama.shape[1]}x{result.panorama.shape[0]}")
write_image(out / "panorama.png", result.panorama)
print(f"wrote {out / 'panorama.png'} and match/seam dumps under {out / 'debug'}")
