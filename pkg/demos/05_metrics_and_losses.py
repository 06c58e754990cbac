"""Pose-accuracy metrics and the training-loss suite.

Distances between a model under predicted and true poses feed the
area-under-curve and threshold metrics; symmetric objects use the
closest-point pairing.  The loss combiner weights the pose-head term by
a scheduled factor that ramps up late in training.
"""

import numpy as np

from uvpose import Pose, Rotation
from uvpose.losses import abc_loss, ramp20_weights, ramp50_weights, rt_loss, total_loss
from uvpose.metrics import (
    ModelPoints,
    add_distance,
    adds_distance,
    auc,
    occlusion_bins,
    threshold_accuracy,
)

rng = np.random.default_rng(11)

# a square plate is symmetric under quarter turns: the matched distance
# sees the rotation, the closest-point distance does not
s = 0.05
plate = ModelPoints.make(
    [[s, s, 0], [-s, s, 0], [-s, -s, 0], [s, -s, 0]], symmetric=True, name="plate"
)
gt = Pose(Rotation.identity(), np.array([0, 0, 1.0]))
quarter = Pose(Rotation.from_axis_angle((0, 0, 1), np.pi / 2), gt.translation)
print("quarter-turned plate:  matched distance %.4f m, closest-point %.1e m"
      % (add_distance(quarter, gt, plate), adds_distance(quarter, gt, plate)))

# --- AUC over a batch of noisy predictions
model = ModelPoints.make(rng.uniform(-0.05, 0.05, (500, 3)), name="blob")
dists = []
for _ in range(200):
    gt = Pose(Rotation.from_quat(rng.normal(size=4)), rng.uniform(-0.2, 0.2, 3) + [0, 0, 1])
    pred = Pose(
        Rotation.from_quat(gt.rotation.quat() + rng.normal(0, 0.01, 4)),
        gt.translation + rng.normal(0, 0.01, 3),
    )
    dists.append(add_distance(pred, gt, model))
print("\n200 noisy predictions:")
print("  AUC to 0.1 m:        %.2f %%" % auc(dists, 0.1))
print("  share under 2 cm:    %.2f %%" % threshold_accuracy(dists, 0.02))
print("  share under 0.1*dia: %.2f %%" % threshold_accuracy(dists, 0.1 * model.diameter))

# --- accuracy per occlusion bin (empty bins report as missing)
occ = rng.uniform(0, 0.8, 200)
dists_occ = np.array(dists) * (1 + 2 * occ)  # degrade with occlusion
for b in occlusion_bins(occ, dists_occ, [0, 0.2, 0.4, 0.6, 0.8, 1.0]):
    acc = "---" if b.accuracy is None else f"{b.accuracy:6.2f} %"
    print(f"  occlusion [{b.lo:.1f}, {b.hi:.1f}): {acc}  ({b.count} frames)")

# --- the loss suite
gt_pose = Pose(Rotation.identity(), np.array([0, 0, 1.0]))
off_pose = Pose(Rotation.identity(), np.array([0.01, 0, 1.0]))
print("\npose-head loss for a 1 cm offset: %.4f" % rt_loss(off_pose, gt_pose, model))

planes = np.zeros((3, 16, 16))
print("coordinate-map loss for a uniform 1 cm triple offset: %.4f"
      % abc_loss(planes + 0.01, planes, np.ones((16, 16), bool)))

parts = dict(rt=0.02, abc=0.05, mask=0.3, bbox=0.2, cls=0.1, rpn=0.15)
for preset, w in (("ramp50", ramp50_weights()), ("ramp20", ramp20_weights())):
    values = [total_loss(parts, w, e) for e in (10, 22, 32, 39)]
    print(f"total loss under {preset} at epochs 10/22/32/39:",
          " ".join(f"{v:.3f}" for v in values))
