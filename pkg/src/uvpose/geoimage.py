"""Multi-channel raster frames and the pixel-coordinate channel encoders.

A :class:`GeoImage` stores named planes over a shared (height, width)
extent: RGB, depth D (meters, 0 marks a hole), the plain pixel
coordinates U/V, inverse-projected X/Y, sinusoidal positional encoding
PE, surface normals NRM, the per-pixel ground-truth object-frame
coordinates GT_ABC, and an object-id MASK.  Validity is derived from
depth: a pixel is valid iff D > 0, so holes propagate through every
encoder and transform without a separately maintained plane.

Planes are float64 row-major and frozen after construction; encoders
return new images and never mutate their input.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import BadPEConfig, IntrinsicsMismatch, MissingPlane
from .geometry import CameraIntrinsics

PE_WAVELENGTH_BASE = 10000.0


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GeoImage:
    """Immutable multi-plane raster; ``d`` is the only required plane."""

    d: np.ndarray
    rgb: np.ndarray | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    pe: np.ndarray | None = None
    nrm: np.ndarray | None = None
    gt_abc: np.ndarray | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        d = _freeze(self.d)
        if d.ndim != 2:
            raise ValueError(f"depth plane must be 2-d, got shape {d.shape}")
        object.__setattr__(self, "d", d)
        expect = {
            "rgb": (3,) + d.shape,
            "u": d.shape,
            "v": d.shape,
            "x": d.shape,
            "y": d.shape,
            "nrm": (3,) + d.shape,
            "gt_abc": (3,) + d.shape,
            "mask": d.shape,
        }
        for name, shape in expect.items():
            a = getattr(self, name)
            if a is None:
                continue
            a = _freeze(a)
            if a.shape != shape:
                raise ValueError(f"plane {name} has shape {a.shape}, expected {shape}")
            object.__setattr__(self, name, a)
        if self.pe is not None:
            pe = _freeze(self.pe)
            if pe.ndim != 3 or pe.shape[1:] != d.shape:
                raise ValueError(f"pe planes must be (n, {d.shape[0]}, {d.shape[1]})")
            object.__setattr__(self, "pe", pe)

    @property
    def height(self) -> int:
        return self.d.shape[0]

    @property
    def width(self) -> int:
        return self.d.shape[1]

    @property
    def valid(self) -> np.ndarray:
        """Boolean validity plane: a pixel is valid iff its depth is positive."""
        return self.d > 0

    def planes(self):
        """Iterate (field_name, array) over the planes that are present."""
        for f in fields(self):
            a = getattr(self, f.name)
            if a is not None:
                yield f.name, a

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise MissingPlane(f"image has no {name.upper()} plane")


def blank_image(height: int, width: int) -> GeoImage:
    """All-invalid frame (depth zero everywhere)."""
    return GeoImage(d=np.zeros((height, width)))


def builtin_grid(height: int, width: int):
    """The built-in coordinate planes: U[r, c] = c, V[r, c] = r."""
    v, u = np.mgrid[0:height, 0:width]
    return u.astype(float), v.astype(float)


def encode_plain_uv(img: GeoImage) -> GeoImage:
    """Fill U and V with the frame's own column/row coordinates."""
    u, v = builtin_grid(img.height, img.width)
    return replace(img, u=u, v=v)


def encode_xy(img: GeoImage, K: CameraIntrinsics) -> GeoImage:
    """Inverse-project the (U, V, D) triple of every valid pixel into
    camera-frame x, y.  Invalid pixels get (0, 0)."""
    img.require("u", "v")
    if (img.width, img.height) != (K.width, K.height):
        raise IntrinsicsMismatch(
            f"image is {img.width}x{img.height} but intrinsics describe {K.width}x{K.height}"
        )
    valid = img.valid
    x = np.where(valid, (img.u - K.cx) * img.d / K.fx, 0.0)
    y = np.where(valid, (img.v - K.cy) * img.d / K.fy, 0.0)
    return replace(img, x=x, y=y)


@dataclass(frozen=True)
class PEConfig:
    """Sinusoidal positional-encoding shape: total channel count (a
    positive multiple of 4) and the fixed wavelength base."""

    d_pe: int
    base: float = PE_WAVELENGTH_BASE

    def __post_init__(self):
        if self.d_pe <= 0 or self.d_pe % 4 != 0:
            raise BadPEConfig(f"PE channel count must be a positive multiple of 4, got {self.d_pe}")


def encode_pe(img: GeoImage, cfg: PEConfig) -> GeoImage:
    """Sinusoidal encoding of the U/V channel values.

    With D total channels, the first half encodes u and the second half v:

        PE[2i]         = sin(u / base^(4i/D))      i in [0, D/4)
        PE[2i + 1]     = cos(u / base^(4i/D))
        PE[2j + D/2]   = sin(v / base^(4j/D))      j in [0, D/4)
        PE[2j + 1 + D/2] = cos(v / base^(4j/D))

    The coordinates come from the U/V planes, not the built-in indices,
    so the encoding stays coherent with UV through spatial transforms.
    """
    img.require("u", "v")
    n = cfg.d_pe
    pe = np.empty((n, img.height, img.width))
    for i in range(n // 4):
        w = cfg.base ** (4.0 * i / n)
        pe[2 * i] = np.sin(img.u / w)
        pe[2 * i + 1] = np.cos(img.u / w)
        pe[2 * i + n // 2] = np.sin(img.v / w)
        pe[2 * i + 1 + n // 2] = np.cos(img.v / w)
    return replace(img, pe=pe)


def encode_normals(img: GeoImage, K: CameraIntrinsics) -> GeoImage:
    """Per-pixel unit surface normal from the depth map.

    The depth surface is backprojected to camera-frame XYZ on the
    built-in pixel grid; the normal is the normalized cross product of
    the central-difference tangents along u and v, oriented toward the
    camera (z component <= 0).  Pixels that are invalid, on the image
    border, or have any invalid 4-neighbor get (0, 0, 0).
    """
    if (img.width, img.height) != (K.width, K.height):
        raise IntrinsicsMismatch(
            f"image is {img.width}x{img.height} but intrinsics describe {K.width}x{K.height}"
        )
    h, w = img.height, img.width
    u, v = builtin_grid(h, w)
    d = img.d
    p = np.stack([(u - K.cx) * d / K.fx, (v - K.cy) * d / K.fy, d], axis=-1)

    nrm = np.zeros((h, w, 3))
    if h >= 3 and w >= 3:
        tu = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
        tv = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
        n_raw = np.cross(tu, tv)
        norm = np.linalg.norm(n_raw, axis=-1)
        valid = img.valid
        ok = (
            valid[1:-1, 1:-1]
            & valid[1:-1, 2:]
            & valid[1:-1, :-2]
            & valid[2:, 1:-1]
            & valid[:-2, 1:-1]
            & (norm > 0)
        )
        unit = np.zeros_like(n_raw)
        np.divide(n_raw, norm[..., None], out=unit, where=ok[..., None])
        # orient toward the camera
        flip = unit[..., 2] > 0
        unit[flip] *= -1.0
        nrm[1:-1, 1:-1][ok] = unit[ok]
    return replace(img, nrm=np.moveaxis(nrm, -1, 0))
