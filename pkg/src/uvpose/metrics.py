"""Pose-accuracy metrics: average model-point distances, their
symmetric-object variant, threshold accuracies, and the exact
area-under-curve aggregation.

Distances compare a model's vertex set under a predicted pose against
the same set under the ground-truth pose:

    plain    mean over x of |(R x + T) - (R* x + T*)|
    symmetric-min: each predicted point pairs with its nearest
             ground-truth-transformed point instead of its own match.

Symmetric objects are scored with the symmetric-min variant by the
dispatching ``metric_distance``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree, distance

from .errors import EmptyInput
from .geometry import Pose

# exact O(m^2) pairing below this size; k-d tree above (also exact)
_BRUTE_FORCE_LIMIT = 4096

_DIAMETER_TOL = 1e-6


def max_pairwise_distance(pts: np.ndarray, chunk: int = 256) -> float:
    """Exact diameter of a point set, chunked to bound memory."""
    pts = np.asarray(pts, dtype=float)
    best = 0.0
    for i in range(0, len(pts), chunk):
        d = distance.cdist(pts[i : i + chunk], pts)
        best = max(best, float(d.max()))
    return best


@dataclass(frozen=True)
class ModelPoints:
    """Vertex set of an object's 3D model with its diameter and
    symmetry flag.  The stored diameter is verified against the exact
    max pairwise distance on construction (1e-6 m tolerance)."""

    points: np.ndarray
    diameter: float
    symmetric: bool = False
    name: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(pts) < 1:
            raise ValueError("model needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        actual = max_pairwise_distance(pts)
        if abs(actual - self.diameter) > _DIAMETER_TOL:
            raise ValueError(
                f"stored diameter {self.diameter} differs from actual {actual} by more than {_DIAMETER_TOL}"
            )

    @classmethod
    def make(cls, points, symmetric: bool = False, name: str = "") -> "ModelPoints":
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return cls(pts, max_pairwise_distance(pts), symmetric, name)


def add_distance(pred: Pose, gt: Pose, model: ModelPoints) -> float:
    """Mean distance between matched transformed model points, meters."""
    a = pred.transform(model.points)
    b = gt.transform(model.points)
    return float(np.linalg.norm(a - b, axis=1).mean())


def adds_distance(pred: Pose, gt: Pose, model: ModelPoints) -> float:
    """Mean closest-point distance between the transformed sets, meters."""
    a = pred.transform(model.points)
    b = gt.transform(model.points)
    if len(model.points) <= _BRUTE_FORCE_LIMIT:
        nearest = distance.cdist(a, b).min(axis=1)
    else:
        nearest, _ = cKDTree(b).query(a, k=1)
    return float(nearest.mean())


def metric_distance(pred: Pose, gt: Pose, model: ModelPoints) -> float:
    """Symmetric objects use the closest-point variant, others the
    matched-pair distance."""
    if model.symmetric:
        return adds_distance(pred, gt, model)
    return add_distance(pred, gt, model)


def auc(distances: Sequence[float], max_threshold: float) -> float:
    """Area under the accuracy-vs-threshold curve, in percent.

    accuracy(t) = fraction{d <= t}; the area over [0, max_threshold] is
    integrated exactly from the sorted distances (the curve is a step
    function), normalized by max_threshold.  Distances above the
    maximum threshold contribute zero at every t.
    """
    if max_threshold <= 0:
        raise ValueError(f"max_threshold must be positive, got {max_threshold}")
    d = np.sort(np.asarray(distances, dtype=float))
    if d.size == 0:
        raise EmptyInput("auc of an empty distance list")
    inside = d[d <= max_threshold]
    area = float((max_threshold - inside).sum()) / d.size
    return 100.0 * area / max_threshold


def accuracy_curve(distances: Sequence[float], max_threshold: float) -> np.ndarray:
    """Vertices of the accuracy step function for plotting: rows of
    (threshold, accuracy_percent), starting at t=0 and ending at
    t=max_threshold."""
    d = np.sort(np.asarray(distances, dtype=float))
    if d.size == 0:
        raise EmptyInput("accuracy curve of an empty distance list")
    pts = [(0.0, 100.0 * float((d <= 0).mean()))]
    for t in np.unique(d[d <= max_threshold]):
        pts.append((float(t), 100.0 * float((d <= t).mean())))
    pts.append((float(max_threshold), 100.0 * float((d <= max_threshold).mean())))
    return np.asarray(pts)


def threshold_accuracy(distances: Sequence[float], threshold: float) -> float:
    """Percent of distances strictly below the threshold."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        raise EmptyInput("threshold accuracy of an empty distance list")
    return 100.0 * float((d < threshold).mean())


@dataclass(frozen=True)
class OcclusionBin:
    lo: float
    hi: float
    accuracy: float | None  # None when the bin holds no frames
    count: int


def occlusion_bins(
    occlusions: Sequence[float],
    distances: Sequence[float],
    bin_edges: Sequence[float],
    threshold: float = 0.02,
) -> list[OcclusionBin]:
    """Threshold accuracy per occlusion-fraction bin.

    Bins are [e_i, e_{i+1}) with the last bin closed on the right.
    Empty bins are reported as missing (accuracy None), not as zero.
    """
    occ = np.asarray(occlusions, dtype=float)
    d = np.asarray(distances, dtype=float)
    if occ.shape != d.shape:
        raise ValueError(f"{occ.size} occlusion fractions vs {d.size} distances")
    if np.any((occ < 0) | (occ > 1)):
        raise ValueError("occlusion fractions must lie in [0, 1]")
    edges = list(bin_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bin edges must be strictly increasing, got {edges}")
    out = []
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        sel = (occ >= lo) & ((occ <= hi) if i == len(edges) - 2 else (occ < hi))
        n = int(sel.sum())
        acc = threshold_accuracy(d[sel], threshold) if n else None
        out.append(OcclusionBin(lo, hi, acc, n))
    return out


@dataclass(frozen=True)
class ObjectMetrics:
    """Per-object aggregation over frames."""

    name: str
    n_frames: int
    adds_auc: float  # closest-point distance AUC ("ADD-S" column)
    add_s_auc: float  # dispatched distance AUC ("ADD(S)" column)
    add_01d: float  # percent of frames with dispatched distance < 0.1 * diameter
    adds_distances: np.ndarray
    dispatch_distances: np.ndarray


@dataclass(frozen=True)
class MetricReport:
    objects: tuple[ObjectMetrics, ...]
    occlusion: tuple[OcclusionBin, ...] = ()

    def by_name(self, name: str) -> ObjectMetrics:
        for o in self.objects:
            if o.name == name:
                return o
        raise KeyError(name)


def evaluate_object(
    model: ModelPoints,
    pairs: Sequence[tuple[Pose, Pose]],
    max_threshold: float = 0.1,
) -> ObjectMetrics:
    """Score (pred, gt) pose pairs for one object."""
    if not pairs:
        raise EmptyInput(f"no pose pairs for object {model.name!r}")
    adds = np.array([adds_distance(p, g, model) for p, g in pairs])
    disp = np.array([metric_distance(p, g, model) for p, g in pairs])
    return ObjectMetrics(
        name=model.name,
        n_frames=len(pairs),
        adds_auc=auc(adds, max_threshold),
        add_s_auc=auc(disp, max_threshold),
        add_01d=threshold_accuracy(disp, 0.1 * model.diameter),
        adds_distances=adds,
        dispatch_distances=disp,
    )
