"""Pinhole projection and rigid-pose algebra.

Conventions
-----------
- Pixel coordinates (u, v) are continuous; the center of the pixel at
  integer indices (col, row) is exactly (u, v) = (col, row).  u grows
  along columns, v along rows.
- Depths and translations are in meters; depth d > 0 in front of the
  camera.
- Quaternions use (w, x, y, z) ordering and are canonicalized to
  w >= 0 on construction.

All types are immutable and all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DepthNonPositive, NonUnitQuaternion

_UNIT_TOL = 1e-6


class ModelPoint(NamedTuple):
    """Point (a, b, c) in the object's model frame, meters."""

    a: float
    b: float
    c: float


class CamPoint(NamedTuple):
    """Point (x, y, d) in the camera frame, meters; d > 0 when visible."""

    x: float
    y: float
    d: float


class PixelSample(NamedTuple):
    """Continuous pixel location (u, v) with its depth d in meters."""

    u: float
    v: float
    d: float


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters (focal lengths and principal point in pixels)
    plus the image extent they describe."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image extent must be >= 1, got {self.width}x{self.height}")

    def matrix(self) -> np.ndarray:
        """3x3 intrinsic matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def to_json_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion (w, x, y, z), canonicalized so w >= 0.

    Construction accepts quaternions within 1e-6 of unit norm and
    renormalizes them exactly; anything further off raises
    :class:`NonUnitQuaternion`.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if abs(n - 1.0) > _UNIT_TOL:
            raise NonUnitQuaternion(f"quaternion norm {n} deviates from 1 by more than {_UNIT_TOL}")
        s = 1.0 / n
        if self.w < 0:
            s = -s
        object.__setattr__(self, "w", self.w * s)
        object.__setattr__(self, "x", self.x * s)
        object.__setattr__(self, "y", self.y * s)
        object.__setattr__(self, "z", self.z * s)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_quat(cls, wxyz: Sequence[float]) -> "Rotation":
        """Build from any 4-vector, normalizing it (zero norm is rejected)."""
        q = np.asarray(wxyz, dtype=float)
        n = float(np.linalg.norm(q))
        if n == 0.0 or not math.isfinite(n):
            raise NonUnitQuaternion("cannot normalize a zero or non-finite quaternion")
        q = q / n
        return cls(q[0], q[1], q[2], q[3])

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> "Rotation":
        ax = np.asarray(axis, dtype=float)
        ax = ax / np.linalg.norm(ax)
        h = 0.5 * angle
        s = math.sin(h)
        return cls(math.cos(h), ax[0] * s, ax[1] * s, ax[2] * s)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Rotation":
        """Quaternion from a rotation matrix (largest-pivot branch method)."""
        m = np.asarray(m, dtype=float)
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0:
            r = math.sqrt(1.0 + t)
            s = 0.5 / r
            w = 0.5 * r
            x = (m[2, 1] - m[1, 2]) * s
            y = (m[0, 2] - m[2, 0]) * s
            z = (m[1, 0] - m[0, 1]) * s
        elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            r = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            s = 0.5 / r
            w = (m[2, 1] - m[1, 2]) * s
            x = 0.5 * r
            y = (m[0, 1] + m[1, 0]) * s
            z = (m[0, 2] + m[2, 0]) * s
        elif m[1, 1] >= m[2, 2]:
            r = math.sqrt(1.0 - m[0, 0] + m[1, 1] - m[2, 2])
            s = 0.5 / r
            w = (m[0, 2] - m[2, 0]) * s
            x = (m[0, 1] + m[1, 0]) * s
            y = 0.5 * r
            z = (m[1, 2] + m[2, 1]) * s
        else:
            r = math.sqrt(1.0 - m[0, 0] - m[1, 1] + m[2, 2])
            s = 0.5 / r
            w = (m[1, 0] - m[0, 1]) * s
            x = (m[0, 2] + m[2, 0]) * s
            y = (m[1, 2] + m[2, 1]) * s
            z = 0.5 * r
        return cls.from_quat((w, x, y, z))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        """Uniform rotation: normalized Gaussian 4-vector."""
        return cls.from_quat(rng.normal(size=4))

    def quat(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )

    def rotate(self, vec: np.ndarray) -> np.ndarray:
        """Rotate vectors of shape (..., 3)."""
        v = np.asarray(vec, dtype=float)
        return v @ self.matrix().T

    def compose(self, other: "Rotation") -> "Rotation":
        """Hamilton product: (self.compose(other)).rotate(v) == self.rotate(other.rotate(v))."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Rotation(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def inverse(self) -> "Rotation":
        return Rotation(self.w, -self.x, -self.y, -self.z)

    def geodesic_to(self, other: "Rotation") -> float:
        """Rotation angle (radians) taking ``other`` to ``self``."""
        rel = self.compose(other.inverse())
        return 2.0 * math.atan2(math.hypot(rel.x, rel.y, rel.z), abs(rel.w))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotation followed by translation, meters."""

    rotation: Rotation
    translation: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return self.rotation == other.rotation and np.array_equal(
            self.translation, other.translation
        )

    def __post_init__(self):
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError(f"translation must be finite, got {t}")
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Rotation.identity(), np.zeros(3))

    def transform(self, pts: np.ndarray) -> np.ndarray:
        """Apply R.p + T to points of shape (..., 3)."""
        p = np.asarray(pts, dtype=float)
        return p @ self.rotation.matrix().T + self.translation

    def compose(self, other: "Pose") -> "Pose":
        """self after other: (self.compose(other)).transform(p) == self.transform(other.transform(p))."""
        return Pose(
            self.rotation.compose(other.rotation),
            self.rotation.rotate(other.translation) + self.translation,
        )

    def inverse(self) -> "Pose":
        rinv = self.rotation.inverse()
        return Pose(rinv, -rinv.rotate(self.translation))

    def to_json_dict(self) -> dict:
        return {
            "quat_wxyz": [self.rotation.w, self.rotation.x, self.rotation.y, self.rotation.z],
            "t": self.translation.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Pose":
        w, x, y, z = (float(c) for c in d["quat_wxyz"])
        return cls(Rotation(w, x, y, z), np.asarray(d["t"], dtype=float))


def quat_to_matrix(r) -> np.ndarray:
    """Rotation matrix of a unit quaternion.

    Accepts a :class:`Rotation` or a raw (w, x, y, z) sequence; raw input
    with |norm - 1| > 1e-6 raises :class:`NonUnitQuaternion`.
    """
    if not isinstance(r, Rotation):
        w, x, y, z = (float(c) for c in r)
        r = Rotation(w, x, y, z)  # validates the norm
    return r.matrix()


def transform_point(pose: Pose, p) -> CamPoint:
    """Map an object-frame point into the camera frame: R.p + T."""
    a, b, c = p
    out = pose.transform(np.array([a, b, c]))
    return CamPoint(float(out[0]), float(out[1]), float(out[2]))


def project(K: CameraIntrinsics, cp) -> PixelSample:
    """Pinhole projection of a camera-frame point to a pixel sample.

    u = fx*x/d + cx, v = fy*y/d + cy; depth is carried through unchanged.
    """
    x, y, d = cp
    if d <= 0:
        raise DepthNonPositive(f"cannot project point with depth {d}")
    return PixelSample(K.fx * x / d + K.cx, K.fy * y / d + K.cy, d)


def backproject(K: CameraIntrinsics, s) -> CamPoint:
    """Inverse projection: x = (u-cx)*d/fx, y = (v-cy)*d/fy."""
    u, v, d = s
    if d <= 0:
        raise DepthNonPositive(f"cannot backproject sample with depth {d}")
    return CamPoint((u - K.cx) * d / K.fx, (v - K.cy) * d / K.fy, d)


def project_xyz(K: CameraIntrinsics, xyz: np.ndarray) -> np.ndarray:
    """Vectorized projection of (..., 3) camera points to (..., 3) (u, v, d)."""
    p = np.asarray(xyz, dtype=float)
    d = p[..., 2]
    if np.any(d <= 0):
        raise DepthNonPositive("all depths must be positive for projection")
    u = K.fx * p[..., 0] / d + K.cx
    v = K.fy * p[..., 1] / d + K.cy
    return np.stack([u, v, d], axis=-1)


def backproject_uvd(K: CameraIntrinsics, uvd: np.ndarray) -> np.ndarray:
    """Vectorized backprojection of (..., 3) (u, v, d) to camera points."""
    s = np.asarray(uvd, dtype=float)
    d = s[..., 2]
    if np.any(d <= 0):
        raise DepthNonPositive("all depths must be positive for backprojection")
    x = (s[..., 0] - K.cx) * d / K.fx
    y = (s[..., 1] - K.cy) * d / K.fy
    return np.stack([x, y, d], axis=-1)


def pose_inverse(pose: Pose) -> Pose:
    """Pose mapping camera-frame points back to the object frame."""
    return pose.inverse()


def pose_compose(a: Pose, b: Pose) -> Pose:
    """a after b."""
    return a.compose(b)


def rotation_geodesic(a: Rotation, b: Rotation) -> float:
    """Geodesic angle between two rotations, radians in [0, pi]."""
    return a.geodesic_to(b)
