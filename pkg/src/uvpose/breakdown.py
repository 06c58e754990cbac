"""Quantifying projection breakdown and its repair by coordinate channels.

For every valid pixel the harness projects the pixel's ground-truth
object-frame point through the true pose and intrinsics, then measures
how far that prediction lands from the coordinates the pixel claims to
have.  Two claims are compared:

- ``builtin`` mode reads the pixel's current built-in (col, row)
  position, which spatial transforms silently change;
- ``uv_channel`` mode reads the U/V channel values that travel with the
  pixel through every transform.

On a freshly rendered frame both residuals are zero.  After a crop,
flip, or resize only the channel-based claim still satisfies the
projection equation; the built-in one is off by the transform's
coordinate displacement.  The same comparison is run end to end through
the pose solver, fed with one coordinate source or the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingPlane
from .geoimage import GeoImage, encode_plain_uv
from .geometry import CameraIntrinsics, Pose, project_xyz, rotation_geodesic
from .scene import Scene, SceneConfig, standard_scene
from .solver import Correspondences, solve_pose_from_pixels
from .transforms import Crop, HFlip, Resize, RoI, TransformSpec, VFlip, apply_spec

MODES = ("builtin", "uv_channel")


@dataclass(frozen=True)
class ResidualReport:
    """Distribution of per-pixel projection residuals, in pixels."""

    mode: str
    residuals: np.ndarray
    mean: float
    max: float
    median: float
    n_valid: int

    @classmethod
    def from_residuals(cls, mode: str, res: np.ndarray) -> "ResidualReport":
        res = np.asarray(res, dtype=float)
        res.setflags(write=False)
        if res.size == 0:
            return cls(mode, res, float("nan"), float("nan"), float("nan"), 0)
        return cls(mode, res, float(res.mean()), float(res.max()), float(np.median(res)), res.size)


def _pixel_residuals(img: GeoImage, K: CameraIntrinsics, pose: Pose, mode: str,
                     sel: np.ndarray) -> np.ndarray:
    rows, cols = np.nonzero(sel)
    if rows.size == 0:
        return np.empty(0)
    abc = img.gt_abc[:, rows, cols].T
    uvd = project_xyz(K, pose.transform(abc))
    if mode == "builtin":
        ref_u, ref_v = cols.astype(float), rows.astype(float)
    else:
        ref_u, ref_v = img.u[rows, cols], img.v[rows, cols]
    return np.hypot(uvd[:, 0] - ref_u, uvd[:, 1] - ref_v)


def projection_residual(img: GeoImage, K: CameraIntrinsics, pose: Pose, mode: str,
                        object_id: int | None = None) -> ResidualReport:
    """Per-pixel distance between the projected ground-truth point and
    the pixel's claimed coordinates.

    ``object_id`` restricts the measurement to one object's pixels
    (requires the MASK plane); otherwise all valid pixels are scored
    against the single given pose.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if img.gt_abc is None:
        raise MissingPlane("projection residual needs the GT_ABC plane")
    if mode == "uv_channel" and (img.u is None or img.v is None):
        raise MissingPlane("uv_channel mode needs the U and V planes")
    sel = img.valid
    if object_id is not None:
        if img.mask is None:
            raise MissingPlane("object_id selection needs the MASK plane")
        sel = sel & (img.mask == object_id)
    return ResidualReport.from_residuals(mode, _pixel_residuals(img, K, pose, mode, sel))


def scene_residual(img: GeoImage, K: CameraIntrinsics, poses_by_id: dict[int, Pose],
                   mode: str) -> ResidualReport:
    """Residuals pooled over several objects, each against its own pose."""
    if img.mask is None:
        raise MissingPlane("multi-object residual needs the MASK plane")
    parts = [
        _pixel_residuals(img, K, pose, mode, img.valid & (img.mask == oid))
        for oid, pose in sorted(poses_by_id.items())
    ]
    return ResidualReport.from_residuals(mode, np.concatenate(parts) if parts else np.empty(0))


@dataclass(frozen=True)
class PoseError:
    rotation_rad: float
    translation_m: float


def solve_object_pose(img: GeoImage, K: CameraIntrinsics, object_id: int, mode: str) -> Pose:
    """Recover one object's pose from its pixels' (coordinate, depth)
    observations against the GT_ABC plane, reading coordinates from the
    source selected by ``mode``."""
    if img.gt_abc is None:
        raise MissingPlane("pose recovery needs the GT_ABC plane")
    if img.mask is None:
        raise MissingPlane("pose recovery needs the MASK plane")
    sel = img.valid & (img.mask == object_id)
    rows, cols = np.nonzero(sel)
    if mode == "builtin":
        u, v = cols.astype(float), rows.astype(float)
    elif mode == "uv_channel":
        if img.u is None or img.v is None:
            raise MissingPlane("uv_channel mode needs the U and V planes")
        u, v = img.u[rows, cols], img.v[rows, cols]
    else:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    model = img.gt_abc[:, rows, cols].T
    pixels = np.column_stack([u, v, img.d[rows, cols]])
    return solve_pose_from_pixels(Correspondences.from_pixels(model, pixels), K)


def pose_error(pred: Pose, gt: Pose) -> PoseError:
    return PoseError(
        rotation_rad=rotation_geodesic(pred.rotation, gt.rotation),
        translation_m=float(np.linalg.norm(pred.translation - gt.translation)),
    )


@dataclass(frozen=True)
class BreakdownResult:
    """One transform spec measured in both coordinate modes."""

    spec_id: str
    reports: dict[str, ResidualReport]
    pose_errors: dict[str, PoseError]

    def csv_rows(self) -> list[dict]:
        rows = []
        for mode in MODES:
            rep = self.reports[mode]
            err = self.pose_errors[mode]
            rows.append(
                {
                    "spec_id": self.spec_id,
                    "mode": mode,
                    "mean_res_px": rep.mean,
                    "max_res_px": rep.max,
                    "rot_err_rad": err.rotation_rad,
                    "trans_err_m": err.translation_m,
                    "n_valid": rep.n_valid,
                }
            )
        return rows


CSV_COLUMNS = ("spec_id", "mode", "mean_res_px", "max_res_px", "rot_err_rad", "trans_err_m", "n_valid")

# the crop window used across the standard experiments; offset (100, 50)
STANDARD_CROP = Crop(RoI(100, 50, 580, 410))

STANDARD_SPECS: tuple[tuple[str, TransformSpec], ...] = (
    ("identity", TransformSpec((Resize(1.0),))),
    ("resize_crop_hflip_vflip", TransformSpec((STANDARD_CROP, Resize(0.5), HFlip(), VFlip()))),
    ("resize_crop_hflip", TransformSpec((STANDARD_CROP, Resize(0.5), HFlip()))),
    ("resize_crop_vflip", TransformSpec((STANDARD_CROP, Resize(0.5), VFlip()))),
    ("resize", TransformSpec((Resize(0.5),))),
    ("crop", TransformSpec((STANDARD_CROP,))),
)


def run_breakdown_experiment(scene: Scene | SceneConfig | None, spec: TransformSpec,
                             spec_id: str = "custom") -> BreakdownResult:
    """Render (or accept) a scene, apply the transform spec, and measure
    residuals plus solver pose error under both coordinate sources."""
    if scene is None:
        scene = standard_scene()
    elif isinstance(scene, SceneConfig):
        from .scene import render_scene

        scene = render_scene(scene)
    img = apply_spec(encode_plain_uv(scene.image), spec)
    K = scene.config.K
    poses = scene.poses_by_id()
    reports = {}
    errors = {}
    for mode in MODES:
        reports[mode] = scene_residual(img, K, poses, mode)
        per_obj = []
        for oid, gt in sorted(poses.items()):
            if not np.any(img.valid & (img.mask == oid)):
                continue
            per_obj.append(pose_error(solve_object_pose(img, K, oid, mode), gt))
        errors[mode] = PoseError(
            rotation_rad=float(np.mean([e.rotation_rad for e in per_obj])),
            translation_m=float(np.mean([e.translation_m for e in per_obj])),
        )
    return BreakdownResult(spec_id, reports, errors)


def run_standard_matrix(seed: int | None = None) -> list[BreakdownResult]:
    """The identity spec plus the five standard transform combinations,
    all on the standard scene."""
    scene = standard_scene() if seed is None else standard_scene(seed)
    return [run_breakdown_experiment(scene, spec, spec_id) for spec_id, spec in STANDARD_SPECS]
