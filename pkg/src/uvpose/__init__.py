"""Depth-image geometry toolkit: pixel-coordinate channels, raster
transforms, rigid pose recovery, and pose-accuracy metrics."""

from .geometry import (
    CameraIntrinsics,
    CamPoint,
    ModelPoint,
    PixelSample,
    Pose,
    Rotation,
    backproject,
    backproject_uvd,
    pose_compose,
    pose_inverse,
    project,
    project_xyz,
    quat_to_matrix,
    rotation_geodesic,
    transform_point,
)
from .geoimage import (
    GeoImage,
    PEConfig,
    blank_image,
    encode_normals,
    encode_pe,
    encode_plain_uv,
    encode_xy,
)
from .transforms import (
    Crop,
    HFlip,
    Resize,
    RoI,
    RoIAlign,
    TransformSpec,
    VFlip,
    apply_spec,
    crop,
    flip,
    hflip,
    resize,
    roi_align,
    vflip,
)
from .breakdown import (
    BreakdownResult,
    ResidualReport,
    projection_residual,
    run_breakdown_experiment,
    run_standard_matrix,
    scene_residual,
    solve_object_pose,
)
from .solver import Correspondences, robust_solve, solve_pose_from_pixels, umeyama
from .metrics import (
    MetricReport,
    ModelPoints,
    OcclusionBin,
    add_distance,
    adds_distance,
    auc,
    metric_distance,
    occlusion_bins,
    threshold_accuracy,
)
from .losses import LossWeights, abc_loss, ramp20_weights, ramp50_weights, rt_loss, total_loss
from .scene import (
    ObjectSpec,
    PoseBounds,
    SceneConfig,
    degrade,
    make_model,
    render_depth,
    render_scene,
    sample_pose,
    standard_scene,
)

__version__ = "0.1.0"
