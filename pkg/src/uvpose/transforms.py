"""Spatial transforms that modify built-in pixel coordinates.

Every transform is applied uniformly to all planes of a
:class:`~uvpose.geoimage.GeoImage`.  Channel values travel with their
pixels: a flipped or cropped frame keeps the original U/V (and depth,
and ground-truth coordinates) at the new pixel locations, which is what
breaks the projection equation in built-in-coordinate mode and keeps it
intact when the coordinates are read from the channels instead.

Sampling policy: geometric channels (D, U, V, X, Y, PE, NRM, GT_ABC,
MASK) use nearest-neighbor or plain copies everywhere so that every
output pixel carries an exact source triple; RGB is resampled
bilinearly under resize.  RoI-Align is inherently bilinear and treats
all planes alike.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateOutput, DegenerateRoI, EmptyIntersection
from .geoimage import GeoImage

# sampling kind per plane under resize; multi-plane entries are handled
# one sub-plane at a time
_PLANE_KINDS = {
    "d": "nearest",
    "rgb": "bilinear",
    "u": "nearest",
    "v": "nearest",
    "x": "nearest",
    "y": "nearest",
    "pe": "nearest",
    "nrm": "nearest",
    "gt_abc": "nearest",
    "mask": "nearest",
}


@dataclass(frozen=True)
class RoI:
    """Continuous pixel rectangle (u0, v0)-(u1, v1); may extend beyond
    the image (out-of-bounds samples are invalid)."""

    u0: float
    v0: float
    u1: float
    v1: float

    def __post_init__(self):
        if not (self.u1 > self.u0 and self.v1 > self.v0):
            raise DegenerateRoI(f"roi ({self.u0},{self.v0})-({self.u1},{self.v1}) has non-positive extent")


@dataclass(frozen=True)
class Resize:
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"resize scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class Crop:
    roi: RoI


@dataclass(frozen=True)
class HFlip:
    pass


@dataclass(frozen=True)
class VFlip:
    pass


@dataclass(frozen=True)
class RoIAlign:
    roi: RoI
    out_h: int
    out_w: int
    sampling_ratio: int = 2

    def __post_init__(self):
        if self.out_h < 1 or self.out_w < 1:
            raise ValueError(f"output extent must be >= 1, got {self.out_h}x{self.out_w}")
        if self.sampling_ratio < 1:
            raise ValueError(f"sampling_ratio must be >= 1, got {self.sampling_ratio}")


Step = Resize | Crop | HFlip | VFlip | RoIAlign


@dataclass(frozen=True)
class TransformSpec:
    """Ordered, non-empty list of transform steps."""

    steps: tuple[Step, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("transform spec must contain at least one step")

    def to_json(self) -> str:
        out = []
        for s in self.steps:
            if isinstance(s, Resize):
                out.append({"op": "resize", "scale": s.scale})
            elif isinstance(s, Crop):
                out.append({"op": "crop", "roi": [s.roi.u0, s.roi.v0, s.roi.u1, s.roi.v1]})
            elif isinstance(s, HFlip):
                out.append({"op": "hflip"})
            elif isinstance(s, VFlip):
                out.append({"op": "vflip"})
            else:
                out.append(
                    {
                        "op": "roi_align",
                        "roi": [s.roi.u0, s.roi.v0, s.roi.u1, s.roi.v1],
                        "out": [s.out_h, s.out_w],
                        "sampling_ratio": s.sampling_ratio,
                    }
                )
        return json.dumps(out)

    @classmethod
    def from_json(cls, text: str) -> "TransformSpec":
        steps: list[Step] = []
        for entry in json.loads(text):
            op = entry["op"]
            if op == "resize":
                steps.append(Resize(float(entry["scale"])))
            elif op == "crop":
                steps.append(Crop(RoI(*map(float, entry["roi"]))))
            elif op == "hflip":
                steps.append(HFlip())
            elif op == "vflip":
                steps.append(VFlip())
            elif op == "roi_align":
                oh, ow = entry["out"]
                steps.append(
                    RoIAlign(
                        RoI(*map(float, entry["roi"])),
                        int(oh),
                        int(ow),
                        int(entry.get("sampling_ratio", 2)),
                    )
                )
            else:
                raise ValueError(f"unknown transform op {op!r}")
        return cls(tuple(steps))


def _map_planes(img: GeoImage, fn) -> GeoImage:
    """Rebuild an image by applying ``fn(plane_2d, kind)`` to every plane."""
    out = {}
    for name, arr in img.planes():
        kind = _PLANE_KINDS[name]
        if arr.ndim == 2:
            out[name] = fn(arr, kind)
        else:
            out[name] = np.stack([fn(p, kind) for p in arr])
    return GeoImage(**out)


def resize(img: GeoImage, scale: float) -> GeoImage:
    """Rescale to round(scale * dims).  RGB is bilinear; every geometric
    plane is nearest-neighbor so values stay exact source values, and
    validity is recomputed from the resampled depth."""
    if not scale > 0:
        raise ValueError(f"resize scale must be positive, got {scale}")
    h, w = img.height, img.width
    oh, ow = int(round(scale * h)), int(round(scale * w))
    if oh < 1 or ow < 1:
        raise DegenerateOutput(f"resize by {scale} of {w}x{h} yields {ow}x{oh}")

    src_r = (np.arange(oh) + 0.5) / scale - 0.5
    src_c = (np.arange(ow) + 0.5) / scale - 0.5
    near_r = np.clip(np.floor(src_r + 0.5).astype(int), 0, h - 1)
    near_c = np.clip(np.floor(src_c + 0.5).astype(int), 0, w - 1)

    r0 = np.clip(np.floor(src_r).astype(int), 0, h - 1)
    c0 = np.clip(np.floor(src_c).astype(int), 0, w - 1)
    r1 = np.clip(r0 + 1, 0, h - 1)
    c1 = np.clip(c0 + 1, 0, w - 1)
    fr = np.clip(src_r - r0, 0.0, 1.0)[:, None]
    fc = np.clip(src_c - c0, 0.0, 1.0)[None, :]

    def sample(plane, kind):
        if kind == "nearest":
            return plane[near_r[:, None], near_c[None, :]]
        top = plane[r0[:, None], c0[None, :]] * (1 - fc) + plane[r0[:, None], c1[None, :]] * fc
        bot = plane[r1[:, None], c0[None, :]] * (1 - fc) + plane[r1[:, None], c1[None, :]] * fc
        return top * (1 - fr) + bot * fr

    return _map_planes(img, sample)


def crop(img: GeoImage, roi: RoI) -> GeoImage:
    """Copy out an integer-aligned window.  Values are copied, not
    resampled: the output's built-in coordinates restart at zero while
    U/V channel values keep their source coordinates."""
    bounds = [roi.u0, roi.v0, roi.u1, roi.v1]
    if any(abs(b - round(b)) > 1e-9 for b in bounds):
        raise ValueError(f"crop roi must be integer-aligned, got {bounds}")
    u0, v0, u1, v1 = (int(round(b)) for b in bounds)
    c0, c1 = max(u0, 0), min(u1, img.width)
    r0, r1 = max(v0, 0), min(v1, img.height)
    if c1 <= c0 or r1 <= r0:
        raise EmptyIntersection(f"crop window {bounds} does not intersect {img.width}x{img.height} image")
    return _map_planes(img, lambda plane, kind: plane[r0:r1, c0:c1].copy())


def flip(img: GeoImage, axis: str) -> GeoImage:
    """Mirror all planes; channel values travel with their pixels."""
    if axis == "horizontal":
        return _map_planes(img, lambda plane, kind: plane[:, ::-1].copy())
    if axis == "vertical":
        return _map_planes(img, lambda plane, kind: plane[::-1, :].copy())
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def hflip(img: GeoImage) -> GeoImage:
    return flip(img, "horizontal")


def vflip(img: GeoImage) -> GeoImage:
    return flip(img, "vertical")


def roi_align(img: GeoImage, roi: RoI, out_h: int, out_w: int, sampling_ratio: int = 2) -> GeoImage:
    """Bilinear bin-averaged extraction of an out_h x out_w grid.

    Each output cell averages sampling_ratio^2 bilinear samples placed
    at regular positions inside its bin.  A sample that touches any
    invalid or out-of-image pixel (with nonzero interpolation weight)
    is dropped from its cell's average; a cell with no surviving
    samples is invalid (all planes zero, depth zero).
    """
    step = RoIAlign(roi, out_h, out_w, sampling_ratio)  # validates arguments
    h, w = img.height, img.width
    n = step.sampling_ratio
    bin_h = (roi.v1 - roi.v0) / out_h
    bin_w = (roi.u1 - roi.u0) / out_w
    # the per-bin sample positions form one uniform grid over the roi
    ys = roi.v0 + (np.arange(out_h * n) + 0.5) * (bin_h / n)
    xs = roi.u0 + (np.arange(out_w * n) + 0.5) * (bin_w / n)
    Y, X = np.meshgrid(ys, xs, indexing="ij")

    r0 = np.floor(Y).astype(int)
    c0 = np.floor(X).astype(int)
    fr = Y - r0
    fc = X - c0
    corners = [
        (r0, c0, (1 - fr) * (1 - fc)),
        (r0, c0 + 1, (1 - fr) * fc),
        (r0 + 1, c0, fr * (1 - fc)),
        (r0 + 1, c0 + 1, fr * fc),
    ]
    valid_src = img.valid
    sample_ok = np.ones(Y.shape, dtype=bool)
    gathers = []
    for rr, cc, wt in corners:
        inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        rs = np.clip(rr, 0, h - 1)
        cs = np.clip(cc, 0, w - 1)
        used = wt > 0
        ok = ~used | (inside & valid_src[rs, cs])
        sample_ok &= ok
        gathers.append((rs, cs, np.where(used, wt, 0.0)))

    counts = (
        sample_ok.reshape(out_h, n, out_w, n).sum(axis=(1, 3)).astype(float)
    )
    cell_ok = counts > 0
    denom = np.where(cell_ok, counts, 1.0)

    def sample(plane, kind):
        vals = np.zeros(Y.shape)
        for rs, cs, wt in gathers:
            vals += wt * plane[rs, cs]
        vals = np.where(sample_ok, vals, 0.0)
        cells = vals.reshape(out_h, n, out_w, n).sum(axis=(1, 3)) / denom
        return np.where(cell_ok, cells, 0.0)

    return _map_planes(img, sample)


def whole_image_roi(img: GeoImage) -> RoI:
    """RoI covering the full pixel area: pixel centers sit at integer
    coordinates, so the image spans [-0.5, W-0.5] x [-0.5, H-0.5]."""
    return RoI(-0.5, -0.5, img.width - 0.5, img.height - 0.5)


def apply_step(img: GeoImage, step: Step) -> GeoImage:
    if isinstance(step, Resize):
        return resize(img, step.scale)
    if isinstance(step, Crop):
        return crop(img, step.roi)
    if isinstance(step, HFlip):
        return hflip(img)
    if isinstance(step, VFlip):
        return vflip(img)
    if isinstance(step, RoIAlign):
        return roi_align(img, step.roi, step.out_h, step.out_w, step.sampling_ratio)
    raise TypeError(f"unknown transform step {step!r}")


def apply_spec(img: GeoImage, spec: TransformSpec | Sequence[Step]) -> GeoImage:
    steps = spec.steps if isinstance(spec, TransformSpec) else spec
    for step in steps:
        img = apply_step(img, step)
    return img
