"""Synthetic objects, poses, and rendered depth frames with exact
ground truth.

Rendering is a point splat with a z-buffer: each transformed model
point claims its nearest pixel, the smallest depth wins, and every
claimed pixel stores the object id and the object-frame coordinates of
the point its own center ray meets at the stored depth.  Storing the
ray-adjusted point (rather than the raw splatted vertex) makes every
valid pixel satisfy the projection equation exactly, which is the
substrate all breakdown experiments rest on.

Everything is driven by explicit seeds; identical configs produce
bit-identical frames.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import Unsatisfiable
from .geoimage import GeoImage
from .geometry import CameraIntrinsics, Pose, Rotation, backproject_uvd, project_xyz
from .metrics import ModelPoints

# flat per-object display colors, cycled by object id
_PALETTE = np.array(
    [[0.85, 0.35, 0.30], [0.30, 0.65, 0.85], [0.45, 0.80, 0.40], [0.85, 0.75, 0.30],
     [0.65, 0.45, 0.85], [0.85, 0.55, 0.30]]
)


@dataclass(frozen=True)
class ObjectSpec:
    shape: str
    n_points: int = 2000
    scale: float = 0.1
    symmetric: bool = False

    def __post_init__(self):
        if self.shape not in ("box", "cylinder", "blob"):
            raise ValueError(f"shape must be box, cylinder, or blob, got {self.shape!r}")
        if self.n_points < 4:
            raise ValueError(f"need at least 4 points, got {self.n_points}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True, eq=False)
class PoseBounds:
    """Axis-aligned translation box; its depth range must be positive."""

    t_min: np.ndarray
    t_max: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, PoseBounds):
            return NotImplemented
        return np.array_equal(self.t_min, other.t_min) and np.array_equal(
            self.t_max, other.t_max
        )

    def __post_init__(self):
        lo = np.asarray(self.t_min, dtype=float).reshape(3)
        hi = np.asarray(self.t_max, dtype=float).reshape(3)
        if np.any(hi < lo):
            raise ValueError(f"bounds are inverted: {lo} vs {hi}")
        if lo[2] <= 0:
            raise ValueError(f"depth range must be strictly positive, got z >= {lo[2]}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "t_min", lo)
        object.__setattr__(self, "t_max", hi)


@dataclass(frozen=True)
class SceneConfig:
    seed: int
    objects: tuple[ObjectSpec, ...]
    bounds: PoseBounds
    K: CameraIntrinsics
    noise_sigma: float = 0.0
    occlusion_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if not self.objects:
            raise ValueError("scene needs at least one object")
        if self.noise_sigma < 0:
            raise ValueError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.occlusion_fraction < 1:
            raise ValueError(f"occlusion fraction must be in [0, 1), got {self.occlusion_fraction}")

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "objects": [
                {"shape": o.shape, "n_points": o.n_points, "scale": o.scale,
                 "symmetric": o.symmetric}
                for o in self.objects
            ],
            "bounds": {"t_min": self.bounds.t_min.tolist(), "t_max": self.bounds.t_max.tolist()},
            "K": self.K.to_json_dict(),
            "noise_sigma": self.noise_sigma,
            "occlusion_fraction": self.occlusion_fraction,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SceneConfig":
        return cls(
            seed=int(d["seed"]),
            objects=tuple(
                ObjectSpec(
                    shape=o["shape"],
                    n_points=int(o.get("n_points", 2000)),
                    scale=float(o.get("scale", 0.1)),
                    symmetric=bool(o.get("symmetric", False)),
                )
                for o in d["objects"]
            ),
            bounds=PoseBounds(np.asarray(d["bounds"]["t_min"], dtype=float),
                              np.asarray(d["bounds"]["t_max"], dtype=float)),
            K=CameraIntrinsics.from_json_dict(d["K"]),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            occlusion_fraction=float(d.get("occlusion_fraction", 0.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "SceneConfig":
        return cls.from_json_dict(json.loads(text))


def _box_points(n, scale, rng):
    s = scale / 2.0
    corners = np.array(
        [[-s, -s, -s], [s, s, s], [s, -s, -s], [-s, s, s],
         [-s, s, -s], [s, -s, s], [-s, -s, s], [s, s, -s]]
    )
    if n <= 8:
        return corners[:n]
    extra = n - 8
    face = rng.integers(0, 6, size=extra)
    ab = rng.uniform(-s, s, size=(extra, 2))
    pts = np.empty((extra, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, -s, s)
    for i in range(extra):
        keep = [k for k in range(3) if k != axis[i]]
        pts[i, axis[i]] = sign[i]
        pts[i, keep[0]] = ab[i, 0]
        pts[i, keep[1]] = ab[i, 1]
    return np.vstack([corners, pts])


def _cylinder_points(n, scale, rng):
    r, h = scale / 2.0, scale
    rim_angles = np.arange(8) * (np.pi / 4)
    rims = []
    for z in (-h / 2, h / 2):
        rims.append(np.column_stack(
            [r * np.cos(rim_angles), r * np.sin(rim_angles), np.full(8, z)]
        ))
    anchors = np.vstack(rims)
    if n <= len(anchors):
        return anchors[:n]
    extra = n - len(anchors)
    # split by area: lateral surface vs the two caps
    lateral_frac = (2 * np.pi * r * h) / (2 * np.pi * r * h + 2 * np.pi * r * r)
    on_side = rng.random(extra) < lateral_frac
    theta = rng.uniform(0, 2 * np.pi, extra)
    pts = np.empty((extra, 3))
    z = rng.uniform(-h / 2, h / 2, extra)
    rad = r * np.sqrt(rng.uniform(0, 1, extra))
    pts[:, 0] = np.where(on_side, r, rad) * np.cos(theta)
    pts[:, 1] = np.where(on_side, r, rad) * np.sin(theta)
    pts[:, 2] = np.where(on_side, z, np.where(rng.random(extra) < 0.5, -h / 2, h / 2))
    return np.vstack([anchors, pts])


def _blob_points(n, scale, rng):
    az = rng.uniform(0, 2 * np.pi, n)
    el = np.arcsin(rng.uniform(-1, 1, n))
    radius = (scale / 2.0) * (1.0 + 0.3 * np.sin(3 * az) * np.cos(2 * el))
    return np.column_stack(
        [radius * np.cos(el) * np.cos(az), radius * np.cos(el) * np.sin(az), radius * np.sin(el)]
    )


@lru_cache(maxsize=64)
def make_model(shape: str, n_points: int, scale: float, seed: int,
               symmetric: bool = False, name: str = "") -> ModelPoints:
    """Deterministic synthetic point model, centered at its centroid.

    Cached: models are immutable and fully determined by the arguments,
    so repeated renders share one instance.
    """
    spec = ObjectSpec(shape, n_points, scale, symmetric)
    rng = np.random.default_rng(seed)
    maker = {"box": _box_points, "cylinder": _cylinder_points, "blob": _blob_points}[spec.shape]
    pts = maker(n_points, scale, rng)
    pts = pts - pts.mean(axis=0)
    return ModelPoints.make(pts, symmetric=symmetric, name=name or f"{shape}-{seed}")


def sample_pose(bounds: PoseBounds, seed, model: ModelPoints | None = None,
                max_tries: int = 1000) -> Pose:
    """Uniform rotation (normalized Gaussian 4-vector) and translation
    uniform in the bounds box; when a model is given, poses are rejected
    until every transformed point has positive depth."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(max_tries):
        rot = Rotation.random(rng)
        t = rng.uniform(bounds.t_min, bounds.t_max)
        pose = Pose(rot, t)
        if model is None or np.all(pose.transform(model.points)[:, 2] > 0):
            return pose
    raise Unsatisfiable(f"no pose with all-positive depth in {max_tries} attempts")


def render_depth(objects, K: CameraIntrinsics, height: int | None = None,
                 width: int | None = None) -> GeoImage:
    """Splat (model, pose) pairs into a depth frame with exact
    per-pixel ground truth.

    Each transformed point is projected and claims its nearest pixel;
    the smallest depth per pixel wins.  Valid pixels store D, the
    winning object id in MASK, and in GT_ABC the object-frame point
    whose image is exactly the pixel center at depth D.
    """
    h = height if height is not None else K.height
    w = width if width is not None else K.width
    candidates = []
    for obj_id, (model, pose) in enumerate(objects, start=1):
        cam = pose.transform(model.points)
        front = cam[:, 2] > 0
        if not front.any():
            continue
        uvd = project_xyz(K, cam[front])
        cols = np.floor(uvd[:, 0] + 0.5).astype(int)
        rows = np.floor(uvd[:, 1] + 0.5).astype(int)
        inside = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
        flat = rows[inside] * w + cols[inside]
        candidates.append(
            (flat, uvd[inside, 2], np.full(inside.sum(), obj_id))
        )
    d = np.zeros((h, w))
    mask = np.zeros((h, w))
    gt_abc = np.zeros((3, h, w))
    rgb = np.zeros((3, h, w))
    if candidates:
        flat = np.concatenate([c[0] for c in candidates])
        depth = np.concatenate([c[1] for c in candidates])
        ids = np.concatenate([c[2] for c in candidates])
        order = np.lexsort((depth, flat))
        flat, depth, ids = flat[order], depth[order], ids[order]
        first = np.ones(len(flat), dtype=bool)
        first[1:] = flat[1:] != flat[:-1]
        win_flat, win_d, win_id = flat[first], depth[first], ids[first]
        rr, cc = win_flat // w, win_flat % w
        d[rr, cc] = win_d
        mask[rr, cc] = win_id
        poses = {i + 1: pose for i, (_, pose) in enumerate(objects)}
        for obj_id in np.unique(win_id):
            sel = win_id == obj_id
            cam_pts = backproject_uvd(
                K, np.column_stack([cc[sel].astype(float), rr[sel].astype(float), win_d[sel]])
            )
            abc = poses[int(obj_id)].inverse().transform(cam_pts)
            gt_abc[:, rr[sel], cc[sel]] = abc.T
            rgb[:, rr[sel], cc[sel]] = _PALETTE[(int(obj_id) - 1) % len(_PALETTE)][:, None]
    return GeoImage(d=d, rgb=rgb, gt_abc=gt_abc, mask=mask)


def degrade(img: GeoImage, sigma: float, occlusion_fraction: float, seed) -> GeoImage:
    """Add seeded Gaussian depth noise to valid pixels and knock out a
    contiguous block covering the requested fraction of each object's
    valid pixels.  Ground-truth planes are left untouched."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if not 0 <= occlusion_fraction < 1:
        raise ValueError(f"occlusion fraction must be in [0, 1), got {occlusion_fraction}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d = np.array(img.d)
    valid = d > 0
    if sigma > 0:
        d[valid] += rng.normal(0.0, sigma, int(valid.sum()))
        d[d < 0] = 0.0
        valid = d > 0
    if occlusion_fraction > 0 and img.mask is not None:
        for obj_id in np.unique(img.mask[valid & (img.mask > 0)]):
            rows, cols = np.nonzero(valid & (img.mask == obj_id))
            n = len(rows)
            k = int(round(occlusion_fraction * n))
            if k == 0:
                continue
            anchor = int(rng.integers(n))
            dist2 = (rows - rows[anchor]) ** 2 + (cols - cols[anchor]) ** 2
            order = np.lexsort((cols, rows, dist2))
            kill = order[:k]
            d[rows[kill], cols[kill]] = 0.0
    return replace(img, d=d)


# ---------------------------------------------------------------------------
# the standard scene used by the breakdown experiments

_MODEL_SEED_BASE = 7919

STANDARD_SEED = 12345

STANDARD_K = CameraIntrinsics(fx=525.0, fy=525.0, cx=319.5, cy=239.5, width=640, height=480)

STANDARD_OBJECTS = (
    ObjectSpec("box", n_points=2500, scale=0.12),
    ObjectSpec("cylinder", n_points=2500, scale=0.10),
    ObjectSpec("blob", n_points=2500, scale=0.09),
)

# anchors keep the three objects separated but all well inside the frame
_STANDARD_ANCHORS = (
    np.array([-0.17, -0.02, 0.90]),
    np.array([0.16, 0.05, 1.00]),
    np.array([0.00, -0.11, 1.10]),
)


def standard_config(seed: int = STANDARD_SEED, noise_sigma: float = 0.0,
                    occlusion_fraction: float = 0.0) -> SceneConfig:
    return SceneConfig(
        seed=seed,
        objects=STANDARD_OBJECTS,
        bounds=PoseBounds(np.array([-0.2, -0.15, 0.85]), np.array([0.2, 0.15, 1.15])),
        K=STANDARD_K,
        noise_sigma=noise_sigma,
        occlusion_fraction=occlusion_fraction,
    )


@dataclass(frozen=True)
class Scene:
    config: SceneConfig
    models: tuple[ModelPoints, ...]
    poses: tuple[Pose, ...]
    image: GeoImage

    def poses_by_id(self) -> dict[int, Pose]:
        return {i + 1: p for i, p in enumerate(self.poses)}

    def models_by_id(self) -> dict[int, ModelPoints]:
        return {i + 1: m for i, m in enumerate(self.models)}


def render_scene(cfg: SceneConfig, anchors=None) -> Scene:
    """Build models, sample poses, render, and apply the configured
    degradation.  When per-object ``anchors`` are given, each object's
    translation is drawn from a small box around its anchor (clipped to
    the config bounds) instead of the full bounds box, which keeps a
    multi-object layout separated."""
    if anchors is not None and len(anchors) != len(cfg.objects):
        raise ValueError(f"{len(anchors)} anchors for {len(cfg.objects)} objects")
    models = []
    poses = []
    for i, spec in enumerate(cfg.objects):
        # model geometry depends on the object spec slot only, so scenes
        # differing in seed show the same objects under new poses
        model = make_model(spec.shape, spec.n_points, spec.scale, seed=_MODEL_SEED_BASE + i,
                           symmetric=spec.symmetric, name=f"{spec.shape}-{i}")
        if anchors is not None:
            anchor = np.asarray(anchors[i], dtype=float)
            lo = np.maximum(cfg.bounds.t_min, anchor - 0.02)
            hi = np.minimum(cfg.bounds.t_max, anchor + 0.02)
            bounds = PoseBounds(lo, hi)
        else:
            bounds = cfg.bounds
        pose = sample_pose(bounds, np.random.default_rng(cfg.seed + 7000 + 31 * i), model)
        models.append(model)
        poses.append(pose)
    img = render_depth(list(zip(models, poses)), cfg.K)
    if cfg.noise_sigma > 0 or cfg.occlusion_fraction > 0:
        img = degrade(img, cfg.noise_sigma, cfg.occlusion_fraction, cfg.seed + 99991)
    return Scene(cfg, tuple(models), tuple(poses), img)


def standard_scene(seed: int = STANDARD_SEED, noise_sigma: float = 0.0,
                   occlusion_fraction: float = 0.0) -> Scene:
    """The fixed three-object layout the breakdown experiments use."""
    cfg = standard_config(seed, noise_sigma, occlusion_fraction)
    return render_scene(cfg, anchors=_STANDARD_ANCHORS)


def plane_frame(K: CameraIntrinsics, depth: float, margin: int = 40) -> tuple[GeoImage, Pose]:
    """Frontoparallel plane covering the frame except a border margin.

    The object frame is the plane itself (c = 0) posed at identity
    rotation, translation (0, 0, depth); every covered pixel is filled
    exactly, which makes analytic-shift checks noiseless.
    """
    if depth <= 0:
        raise ValueError(f"plane depth must be positive, got {depth}")
    h, w = K.height, K.width
    d = np.zeros((h, w))
    d[margin : h - margin, margin : w - margin] = depth
    pose = Pose(Rotation.identity(), np.array([0.0, 0.0, depth]))
    rows, cols = np.nonzero(d)
    cam = backproject_uvd(K, np.column_stack([cols.astype(float), rows.astype(float), d[rows, cols]]))
    gt_abc = np.zeros((3, h, w))
    gt_abc[:, rows, cols] = pose.inverse().transform(cam).T
    mask = np.zeros((h, w))
    mask[rows, cols] = 1.0
    return GeoImage(d=d, gt_abc=gt_abc, mask=mask), pose
