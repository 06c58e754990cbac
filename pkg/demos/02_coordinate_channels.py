"""The four coordinate-channel encodings of an RGB-D frame.

Plain UV stores each pixel's own column/row; XY is the inverse-projected
camera-frame position; PE is a multi-frequency sinusoidal embedding of
the UV values; NRM is the unit surface normal estimated from depth.
"""

import numpy as np

from uvpose import PEConfig, encode_normals, encode_pe, encode_plain_uv, encode_xy
from uvpose.scene import standard_scene

scene = standard_scene()
K = scene.config.K
img = scene.image
print(f"rendered frame: {img.width}x{img.height}, {int(img.valid.sum())} valid pixels")

# --- plain UV: the value at pixel (col, row) is simply (col, row)
img = encode_plain_uv(img)
print("\nU at (row=100, col=250):", img.u[100, 250], " V:", img.v[100, 250])

# --- inverse-projected XY from (U, V, D)
img = encode_xy(img, K)
r, c = np.argwhere(img.valid)[0]
x_manual = (c - K.cx) * img.d[r, c] / K.fx
print(f"X at first valid pixel: {img.x[r, c]:.6f}  (by hand: {x_manual:.6f})")

# --- sinusoidal positional encoding of the UV values
img = encode_pe(img, PEConfig(8))
print("\nPE channel count:", img.pe.shape[0])
print("PE[0] at u=1:", img.pe[0][0, 1], " sin(1):", np.sin(1.0))
pair_norm = img.pe[0] ** 2 + img.pe[1] ** 2
print("sin^2+cos^2 spread over all pixels:", float(pair_norm.min()), "-", float(pair_norm.max()))

# --- surface normals from the depth map, oriented toward the camera
img = encode_normals(img, K)
sel = np.linalg.norm(img.nrm, axis=0) > 0
norms = np.linalg.norm(img.nrm[:, sel], axis=0)
print(f"\n{int(sel.sum())} pixels carry a normal; unit-norm spread: "
      f"{norms.min():.12f} - {norms.max():.12f}")
print("all normals face the camera (z <= 0):", bool((img.nrm[2][sel] <= 0).all()))
