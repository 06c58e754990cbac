"""Pinhole projection and pose algebra basics.

A camera-frame point (x, y, d) lands at pixel (u, v) = (fx*x/d + cx,
fy*y/d + cy), and the depth channel keeps d attached to that pixel, so
the triple (u, v, d) is enough to reconstruct the 3D point exactly.
"""

import numpy as np

from uvpose import (
    CameraIntrinsics,
    CamPoint,
    ModelPoint,
    Pose,
    Rotation,
    backproject,
    backproject_uvd,
    project,
    project_xyz,
    transform_point,
)

K = CameraIntrinsics(fx=525.0, fy=525.0, cx=319.5, cy=239.5, width=640, height=480)
print("intrinsics:", K)

# a point on the optical axis projects to the principal point
print("\non-axis point ->", project(K, CamPoint(0.0, 0.0, 1.0)))

# off-axis: 0.1 m to the right at 1 m depth is fx*0.1/1 = 52.5 px right
s = project(K, CamPoint(0.1, 0.0, 1.0))
print("0.1 m right at 1 m ->", s)
print("backprojected ->", backproject(K, s))

# a full object-to-pixel chain: rotate, translate, project
pose = Pose(Rotation.from_axis_angle((0, 0, 1), np.pi / 2), np.array([0.0, 0.0, 0.9]))
p = ModelPoint(0.05, 0.00, 0.02)
cam = transform_point(pose, p)
print("\nmodel point", tuple(p), "-> camera", tuple(round(v, 4) for v in cam))
print("-> pixel", project(K, cam))

# the round trip is exact to machine precision in bulk too
rng = np.random.default_rng(0)
xyz = np.column_stack([rng.uniform(-2, 2, 10**5), rng.uniform(-2, 2, 10**5), rng.uniform(0.05, 10, 10**5)])
back = backproject_uvd(K, project_xyz(K, xyz))
print(f"\n1e5-point round trip, worst absolute error: {np.abs(back - xyz).max():.3e} m")

# composing a pose with its inverse is the identity
ident = pose.compose(pose.inverse())
print("pose o pose^-1 rotation angle:", ident.rotation.geodesic_to(Rotation.identity()), "rad")
