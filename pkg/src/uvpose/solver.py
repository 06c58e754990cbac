"""Closed-form rigid pose recovery from matched point pairs.

Given model-frame points and their camera-frame observations (either
3D points or pixel samples that are backprojected first), the pose
minimizing the weighted sum of squared residuals

    sum_i w_i |R a_i + T - b_i|^2

is recovered in closed form: SVD of the weighted cross-covariance with
a determinant correction that forces a proper rotation.  A trimmed
variant re-solves after discarding the largest-residual pairs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DepthNonPositive,
    TooFewInliers,
)
from .geometry import CameraIntrinsics, Pose, Rotation, backproject_uvd

# second singular value below this fraction of the first means the
# point set is (numerically) collinear
_RANK_TOL = 1e-12


@dataclass(frozen=True)
class Correspondences:
    """Matched pairs: model-frame points against either camera-frame
    points or pixel samples (u, v, d), with optional non-negative
    per-pair weights."""

    model: np.ndarray
    cam: np.ndarray | None = None
    pixels: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        model = np.asarray(self.model, dtype=float).reshape(-1, 3)
        if (self.cam is None) == (self.pixels is None):
            raise ValueError("provide exactly one of cam or pixels observations")
        obs_name = "cam" if self.cam is not None else "pixels"
        obs = np.asarray(getattr(self, obs_name), dtype=float).reshape(-1, 3)
        if len(obs) != len(model):
            raise ValueError(f"{len(model)} model points vs {len(obs)} observations")
        if len(model) < 3:
            raise ValueError(f"need at least 3 pairs, got {len(model)}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if len(w) != len(model):
                raise ValueError(f"{len(w)} weights vs {len(model)} pairs")
            if np.any(w < 0):
                raise ValueError("weights must be non-negative")
            if not w.sum() > 0:
                raise ValueError("weights must not all be zero")
            w = np.ascontiguousarray(w)
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        model.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "model", model)
        object.__setattr__(self, obs_name, obs)

    @classmethod
    def from_cam(cls, model, cam, weights=None) -> "Correspondences":
        return cls(model=model, cam=cam, weights=weights)

    @classmethod
    def from_pixels(cls, model, pixels, weights=None) -> "Correspondences":
        return cls(model=model, pixels=pixels, weights=weights)

    @classmethod
    def from_csv(cls, path) -> "Correspondences":
        """Read 'a,b,c,u,v,d[,w]' or 'a,b,c,x,y,z[,w]' rows; the header
        decides which observation form the file carries."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip().lower() for h in next(reader)]
            rows = [[float(cell) for cell in row] for row in reader if row]
        if header[:6] == ["a", "b", "c", "u", "v", "d"]:
            kind = "pixels"
        elif header[:6] == ["a", "b", "c", "x", "y", "z"]:
            kind = "cam"
        else:
            raise ValueError(
                f"{path}: header must start with a,b,c,u,v,d or a,b,c,x,y,z, got {header}"
            )
        has_w = len(header) > 6 and header[6] == "w"
        data = np.asarray(rows, dtype=float)
        model = data[:, :3]
        obs = data[:, 3:6]
        weights = data[:, 6] if has_w else None
        return cls(model=model, cam=obs if kind == "cam" else None,
                   pixels=obs if kind == "pixels" else None, weights=weights)

    def n_pairs(self) -> int:
        return len(self.model)


def _kabsch(a: np.ndarray, b: np.ndarray, w: np.ndarray | None) -> Pose:
    if w is None:
        w = np.ones(len(a))
    w = w / w.sum()
    ca = w @ a
    cb = w @ b
    h = (a - ca).T @ ((b - cb) * w[:, None])
    u, s, vt = np.linalg.svd(h)
    if s[1] < _RANK_TOL * s[0] or s[0] == 0.0:
        raise DegenerateConfiguration(
            f"correspondence covariance is rank-deficient (singular values {s})"
        )
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return Pose(Rotation.from_matrix(r), cb - r @ ca)


def umeyama(c: Correspondences) -> Pose:
    """Least-squares rigid alignment of model points onto camera-frame
    observations (scale fixed to 1)."""
    if c.cam is None:
        raise ValueError("umeyama needs camera-frame observations; use solve_pose_from_pixels")
    return _kabsch(c.model, c.cam, c.weights)


def solve_pose_from_pixels(c: Correspondences, K: CameraIntrinsics) -> Pose:
    """Backproject pixel observations through the intrinsics, then align."""
    if c.pixels is None:
        raise ValueError("solve_pose_from_pixels needs pixel observations")
    if np.any(c.pixels[:, 2] <= 0):
        raise DepthNonPositive("pixel observations must have positive depth")
    cam = backproject_uvd(K, c.pixels)
    return _kabsch(c.model, cam, c.weights)


def _as_cam(c: Correspondences, K: CameraIntrinsics | None) -> np.ndarray:
    if c.cam is not None:
        return c.cam
    if K is None:
        raise ValueError("pixel observations require camera intrinsics")
    if np.any(c.pixels[:, 2] <= 0):
        raise DepthNonPositive("pixel observations must have positive depth")
    return backproject_uvd(K, c.pixels)


def robust_solve(
    c: Correspondences,
    K: CameraIntrinsics | None = None,
    iters: int = 3,
    trim_fraction: float = 0.0,
) -> Pose:
    """Trimmed least squares: solve, drop the trim_fraction largest
    residuals (re-selected from all pairs each iteration), re-solve.

    trim_fraction = 0 reduces to the plain closed-form solve.
    """
    if not 0.0 <= trim_fraction < 0.5:
        raise ValueError(f"trim_fraction must be in [0, 0.5), got {trim_fraction}")
    if iters < 0:
        raise ValueError(f"iters must be >= 0, got {iters}")
    cam = _as_cam(c, K)
    pose = _kabsch(c.model, cam, c.weights)
    if trim_fraction == 0.0:
        return pose
    n = c.n_pairs()
    n_keep = n - int(round(trim_fraction * n))
    if n_keep < 3:
        raise TooFewInliers(f"trimming {trim_fraction} of {n} pairs leaves {n_keep} < 3")
    for _ in range(iters):
        res = np.linalg.norm(pose.transform(c.model) - cam, axis=1)
        keep = np.argsort(res, kind="stable")[:n_keep]
        keep.sort()
        w = None if c.weights is None else c.weights[keep]
        pose = _kabsch(c.model[keep], cam[keep], w)
    return pose
