"""On-disk formats: frame archives, pose/intrinsics JSON, model files.

A frame archive is a directory holding

    depth.png        16-bit grayscale, value = millimeters, 0 = invalid
    rgb.png          8-bit RGB (optional)
    mask.png         16-bit grayscale object ids (optional)
    intrinsics.json  {"fx","fy","cx","cy","width","height"}
    pose.json        {"objects": [{"id", "quat_wxyz", "t"}, ...]}
    gt_abc.raw       ground-truth coordinates, raw plane container
    uv.raw, xy.raw, pe.raw, nrm.raw   optional encoded planes

The raw plane container is a 16-byte little-endian header -- magic
"GABC", u32 height, u32 width, u32 plane count -- followed by the
planes as float32, planar, row-major.  All raw plane files share this
one container; the magic identifies the format, not the content.

Depth is quantized to millimeters and raw planes to float32 on disk,
so a save/load round trip is lossy at that precision; in memory
everything is float64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .geoimage import GeoImage
from .geometry import CameraIntrinsics, Pose
from .metrics import ModelPoints

RAW_MAGIC = b"GABC"
_HEADER = struct.Struct("<4sIII")

DEPTH_SCALE = 1000.0  # millimeters per meter


def write_planes_raw(path, planes: np.ndarray) -> None:
    """Write a (planes, H, W) stack into the raw plane container."""
    arr = np.ascontiguousarray(planes, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"expected (planes, H, W), got shape {arr.shape}")
    n, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RAW_MAGIC, h, w, n))
        fh.write(arr.tobytes())


def read_planes_raw(path) -> np.ndarray:
    """Read a raw plane container into a float64 (planes, H, W) array."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, h, w, n = _HEADER.unpack(head)
        if magic != RAW_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {RAW_MAGIC!r}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != n * h * w:
        raise ValueError(f"{path}: expected {n * h * w} values, got {data.size}")
    return data.reshape(n, h, w).astype(float)


def write_depth_png(path, depth_m: np.ndarray) -> None:
    mm = np.round(np.asarray(depth_m, dtype=float) * DEPTH_SCALE)
    if np.any(mm < 0) or np.any(mm > np.iinfo(np.uint16).max):
        raise ValueError("depth out of the 16-bit millimeter range [0, 65.535 m]")
    Image.fromarray(mm.astype(np.uint16)).save(path)


def read_depth_png(path) -> np.ndarray:
    arr = np.asarray(Image.open(path), dtype=float)
    return arr / DEPTH_SCALE


def write_rgb_png(path, rgb01: np.ndarray) -> None:
    arr = np.clip(np.round(np.asarray(rgb01, dtype=float) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(np.moveaxis(arr, 0, -1), mode="RGB").save(path)


def read_rgb_png(path) -> np.ndarray:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=float) / 255.0
    return np.moveaxis(arr, -1, 0)


def write_mask_png(path, mask: np.ndarray) -> None:
    ids = np.asarray(mask, dtype=float)
    Image.fromarray(ids.astype(np.uint16)).save(path)


def read_mask_png(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=float)


def write_intrinsics_json(path, K: CameraIntrinsics) -> None:
    Path(path).write_text(json.dumps(K.to_json_dict(), indent=2) + "\n")


def read_intrinsics_json(path) -> CameraIntrinsics:
    return CameraIntrinsics.from_json_dict(json.loads(Path(path).read_text()))


def write_pose_json(path, poses) -> None:
    """Write a single Pose or an {id: Pose} mapping."""
    if isinstance(poses, Pose):
        doc = poses.to_json_dict()
    else:
        doc = {
            "objects": [
                {"id": int(oid), **pose.to_json_dict()} for oid, pose in sorted(poses.items())
            ]
        }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_pose_json(path) -> dict[int, Pose]:
    """Read pose.json; a bare single-pose document loads as {1: pose}."""
    doc = json.loads(Path(path).read_text())
    if "objects" in doc:
        return {int(o["id"]): Pose.from_json_dict(o) for o in doc["objects"]}
    return {1: Pose.from_json_dict(doc)}


def save_archive(directory, img: GeoImage, K: CameraIntrinsics, poses) -> Path:
    """Write a frame archive; returns the directory path."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_depth_png(out / "depth.png", img.d)
    write_intrinsics_json(out / "intrinsics.json", K)
    write_pose_json(out / "pose.json", poses)
    if img.rgb is not None:
        write_rgb_png(out / "rgb.png", img.rgb)
    if img.mask is not None:
        write_mask_png(out / "mask.png", img.mask)
    if img.gt_abc is not None:
        write_planes_raw(out / "gt_abc.raw", img.gt_abc)
    if img.u is not None and img.v is not None:
        write_planes_raw(out / "uv.raw", np.stack([img.u, img.v]))
    if img.x is not None and img.y is not None:
        write_planes_raw(out / "xy.raw", np.stack([img.x, img.y]))
    if img.pe is not None:
        write_planes_raw(out / "pe.raw", img.pe)
    if img.nrm is not None:
        write_planes_raw(out / "nrm.raw", img.nrm)
    return out


def load_archive(directory) -> tuple[GeoImage, CameraIntrinsics, dict[int, Pose]]:
    src = Path(directory)
    depth_path = src / "depth.png"
    if not depth_path.exists():
        raise FileNotFoundError(f"{src}: archive has no depth.png")
    d = read_depth_png(depth_path)
    K = read_intrinsics_json(src / "intrinsics.json")
    poses = read_pose_json(src / "pose.json")
    planes: dict[str, np.ndarray | None] = {}
    planes["rgb"] = read_rgb_png(src / "rgb.png") if (src / "rgb.png").exists() else None
    planes["mask"] = read_mask_png(src / "mask.png") if (src / "mask.png").exists() else None
    if (src / "gt_abc.raw").exists():
        planes["gt_abc"] = read_planes_raw(src / "gt_abc.raw")
    if (src / "uv.raw").exists():
        uv = read_planes_raw(src / "uv.raw")
        planes["u"], planes["v"] = uv[0], uv[1]
    if (src / "xy.raw").exists():
        xy = read_planes_raw(src / "xy.raw")
        planes["x"], planes["y"] = xy[0], xy[1]
    if (src / "pe.raw").exists():
        planes["pe"] = read_planes_raw(src / "pe.raw")
    if (src / "nrm.raw").exists():
        planes["nrm"] = read_planes_raw(src / "nrm.raw")
    img = GeoImage(d=d, **{k: v for k, v in planes.items() if v is not None})
    return img, K, poses


def save_model(directory, model: ModelPoints) -> None:
    """ASCII 'a b c' point list plus a JSON sidecar with diameter,
    symmetry flag, and name."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    lines = "\n".join(f"{float(a)!r} {float(b)!r} {float(c)!r}" for a, b, c in model.points)
    (out / f"{model.name}.txt").write_text(lines + "\n")
    sidecar = {"diameter": model.diameter, "symmetric": model.symmetric, "name": model.name}
    (out / f"{model.name}.json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_model(directory, name: str) -> ModelPoints:
    src = Path(directory)
    pts = np.loadtxt(src / f"{name}.txt", dtype=float).reshape(-1, 3)
    meta = json.loads((src / f"{name}.json").read_text())
    return ModelPoints(
        points=pts,
        diameter=float(meta["diameter"]),
        symmetric=bool(meta["symmetric"]),
        name=str(meta.get("name", name)),
    )


def list_models(directory) -> list[str]:
    src = Path(directory)
    return sorted(p.stem for p in src.glob("*.txt") if (src / f"{p.stem}.json").exists())
