"""
Pseudo-color preview
====================

Maps grayscale ramps and a synthetic blob through the jet colormap and
writes the results as PNGs you can open, next to the exact channel
values at a few probe points.
"""

import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from colorvit.pseudocolor import jet, jet_lut, preprocess

out = Path(tempfile.mkdtemp(prefix="jet_preview_"))

# probe the continuous map at the classic landmarks
for v in (0.0, 0.25, 0.5, 0.75, 1.0):
    r, g, b = jet(v)
    print(f"jet({v:4.2f}) = ({r:.4f}, {g:.4f}, {b:.4f})")

# the 256-entry table the image pipeline actually indexes
lut = jet_lut()
print("lut shape", lut.shape, "first row", lut[0], "last row", lut[255])

# a horizontal ramp, 32 rows tall, mapped through the table
ramp = np.tile(np.arange(256, dtype=np.uint8), (32, 1))
rgb = lut[ramp]
Image.fromarray(np.rint(rgb * 255).astype(np.uint8)).save(out / "ramp.png")

# a soft radial blob, the kind of intensity field the map is meant to expand
yy, xx = np.mgrid[0:128, 0:128]
blob = np.exp(-(((yy - 64) ** 2 + (xx - 64) ** 2) / (2 * 30.0**2)))
gray = np.rint(blob * 255).astype(np.uint8)
Image.fromarray(gray, mode="L").save(out / "blob_gray.png")

colored = preprocess(gray, size=128)          # (3, 128, 128) in [0, 1]
as_image = np.rint(colored.transpose(1, 2, 0) * 255).astype(np.uint8)
Image.fromarray(as_image).save(out / "blob_jet.png")

print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
