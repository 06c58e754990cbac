"""Training losses for the pose and coordinate-map heads, plus the
weighted combination with a scheduled pose-head weight.

The pose-head loss is numerically identical to the matched model-point
distance metric; it is exposed under its own name so the combiner reads
naturally.  Detection-side losses (mask, bbox, cls, rpn) enter the
total as opaque scalars supplied by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import EmptyMask
from .geometry import Pose
from .metrics import ModelPoints, add_distance

# (start epoch, end epoch exclusive, weight); two published variants of
# the pose-head ramp, named by their final weight
LAMBDA0_SCHEDULE_50 = ((1, 20, 1.0), (20, 30, 5.0), (30, 38, 20.0), (38, 41, 50.0))
LAMBDA0_SCHEDULE_20 = ((1, 16, 1.0), (16, 26, 5.0), (26, 36, 10.0), (36, 41, 20.0))


@dataclass(frozen=True)
class LossWeights:
    """Per-term weights; ``lambda0_schedule`` (when non-empty) overrides
    ``lambda0`` as a piecewise-constant function of the epoch."""

    lambda0: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda4: float = 1.0
    lambda0_schedule: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        for w in (self.lambda0, self.lambda1, self.lambda2, self.lambda3, self.lambda4):
            if w < 0:
                raise ValueError(f"loss weights must be non-negative, got {w}")
        prev_end = None
        for start, end, _ in self.lambda0_schedule:
            if end <= start:
                raise ValueError(f"empty schedule range [{start}, {end})")
            if prev_end is not None and start < prev_end:
                raise ValueError("schedule ranges must be disjoint and ordered")
            prev_end = end

    def lambda0_at(self, epoch: int) -> float:
        if not self.lambda0_schedule:
            return self.lambda0
        for start, end, value in self.lambda0_schedule:
            if start <= epoch < end:
                return value
        raise ValueError(f"epoch {epoch} is outside the lambda0 schedule")


def ramp50_weights() -> LossWeights:
    """Pose-head weight ramping 1 -> 5 -> 20 -> 50 over 40 epochs."""
    return LossWeights(lambda0_schedule=LAMBDA0_SCHEDULE_50)


def ramp20_weights() -> LossWeights:
    """Pose-head weight ramping 1 -> 5 -> 10 -> 20 over 40 epochs."""
    return LossWeights(lambda0_schedule=LAMBDA0_SCHEDULE_20)


WEIGHT_PRESETS = {"ramp50": ramp50_weights, "ramp20": ramp20_weights}


def rt_loss(pred: Pose, gt: Pose, model: ModelPoints) -> float:
    """Pose-head loss: mean over model vertices of
    |(R x + T) - (R* x + T*)|.  Same formula as the matched-pair
    distance metric."""
    return add_distance(pred, gt, model)


def abc_loss(pred_abc: np.ndarray, gt_abc: np.ndarray, mask: np.ndarray) -> float:
    """Coordinate-map loss: mean over masked pixels of
    |a - a*| + |b - b*| + |c - c*|."""
    pred_abc = np.asarray(pred_abc, dtype=float)
    gt_abc = np.asarray(gt_abc, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if pred_abc.shape != gt_abc.shape or pred_abc.shape[0] != 3 or pred_abc.shape[1:] != mask.shape:
        raise ValueError(
            f"plane shapes disagree: pred {pred_abc.shape}, gt {gt_abc.shape}, mask {mask.shape}"
        )
    if not mask.any():
        raise EmptyMask("abc loss over an empty mask")
    diff = np.abs(pred_abc - gt_abc).sum(axis=0)
    return float(diff[mask].mean())


def total_loss(parts: Mapping[str, float], weights: LossWeights, epoch: int) -> float:
    """Weighted sum
    l0*rt + l1*abc + l2*mask + l3*(bbox + cls) + l4*rpn
    with l0 resolved from the schedule at the given epoch."""
    vals = {k: float(parts[k]) for k in ("rt", "abc", "mask", "bbox", "cls", "rpn")}
    bad = [k for k, v in vals.items() if not np.isfinite(v)]
    if bad:
        raise ValueError(f"non-finite loss parts: {bad}")
    return (
        weights.lambda0_at(epoch) * vals["rt"]
        + weights.lambda1 * vals["abc"]
        + weights.lambda2 * vals["mask"]
        + weights.lambda3 * (vals["bbox"] + vals["cls"])
        + weights.lambda4 * vals["rpn"]
    )
