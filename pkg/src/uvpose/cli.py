"""Command-line surface tying the toolkit into reproducible experiments.

Subcommands: ``gen`` (scene config to frame archive), ``encode`` (add
coordinate channels), ``transform`` (apply a transform spec), ``solve``
(recover poses from an archive or a correspondence CSV), ``breakdown``
(the transform experiment matrix to CSV), ``eval`` (score predicted
poses against ground truth).

Conventions: every command writes a ``manifest.json`` (atomically)
alongside its primary output recording the tool version, a hash of the
effective configuration, seeds, inputs, outputs, and per-stage timings
in milliseconds.  All randomness flows from explicit seeds, CSV floats
use 6 significant digits with '.' decimals, and row order is
deterministic, so reruns are byte-identical.  Exit codes: 1 usage,
2 data error, 3 degenerate-math error.  The UVPOSE_THREADS environment
variable caps worker threads (0 or unset = auto).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, archive
from .breakdown import (
    CSV_COLUMNS,
    STANDARD_SPECS,
    run_breakdown_experiment,
)
from .errors import DataError, DegenerateError, MissingPlane
from .geoimage import PEConfig, encode_normals, encode_pe, encode_plain_uv, encode_xy
from .geometry import Pose
from .metrics import accuracy_curve, evaluate_object, occlusion_bins
from .scene import STANDARD_SEED, SceneConfig, render_scene, standard_scene
from .solver import Correspondences, robust_solve
from .transforms import TransformSpec

THREADS_ENV = "UVPOSE_THREADS"


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        raise DataError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    return os.cpu_count() or 1 if n <= 0 else n


class StageTimer:
    """Contiguous named stages; their sum tracks the wall-clock total."""

    def __init__(self):
        self.t0 = time.perf_counter()
        self.stages_ms: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t = time.perf_counter()
        try:
            yield
        finally:
            self.stages_ms[name] = self.stages_ms.get(name, 0.0) + (time.perf_counter() - t) * 1e3

    def total_ms(self) -> float:
        return (time.perf_counter() - self.t0) * 1e3


@dataclass
class RunManifest:
    tool_version: str
    command: str
    config_hash: str
    seed: int | None
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    stages_ms: dict[str, float] = field(default_factory=dict)
    total_ms: float = 0.0

    def write(self, path) -> None:
        """Atomic write: temp file in the target directory, then rename."""
        path = Path(path)
        doc = {
            "tool_version": self.tool_version,
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "stages_ms": self.stages_ms,
            "total_ms": self.total_ms,
        }
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(doc, indent=2) + "\n")
        os.replace(tmp, path)


def config_hash(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"{path}: file not found")
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON ({e})")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".6g")
    return str(x)


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _finish(manifest: RunManifest, timer: StageTimer, manifest_path) -> None:
    manifest.stages_ms = timer.stages_ms
    manifest.total_ms = timer.total_ms()
    manifest.write(manifest_path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    timer = StageTimer()
    with timer.stage("load_config"):
        doc = _load_json(args.config)
        if args.seed is not None:
            doc["seed"] = args.seed
        try:
            cfg = SceneConfig.from_json_dict(doc)
        except KeyError as e:
            raise DataError(f"{args.config}: missing field {e}")
    with timer.stage("render"):
        scene = render_scene(cfg)
    with timer.stage("write"):
        out = archive.save_archive(args.out, scene.image, cfg.K, scene.poses_by_id())
        for model in scene.models:
            archive.save_model(out / "models", model)
        gt_doc = {
            "objects": [
                {
                    "id": i + 1,
                    "name": scene.models[i].name,
                    **scene.poses[i].to_json_dict(),
                    "occlusion": cfg.occlusion_fraction,
                }
                for i in range(len(scene.models))
            ]
        }
        (out / "gt.json").write_text(json.dumps(gt_doc, indent=2) + "\n")
    manifest = RunManifest(
        tool_version=__version__,
        command="gen",
        config_hash=config_hash(cfg.to_json_dict()),
        seed=cfg.seed,
        inputs=[str(args.config)],
        outputs=[str(out)],
    )
    _finish(manifest, timer, out / "manifest.json")
    print(f"wrote archive {out} ({int(scene.image.valid.sum())} valid px)")
    return 0


def cmd_encode(args) -> int:
    timer = StageTimer()
    if not (args.uv or args.xy or args.pe or args.nrm):
        raise DataError("encode: pass at least one of --uv --xy --pe --nrm")
    with timer.stage("load"):
        img, K, poses = archive.load_archive(args.input)
    with timer.stage("encode"):
        if args.uv:
            img = encode_plain_uv(img)
        if args.xy:
            if img.u is None:
                raise MissingPlane(f"{args.input}: --xy needs U/V planes (add --uv)")
            img = encode_xy(img, K)
        if args.pe:
            if img.u is None:
                raise MissingPlane(f"{args.input}: --pe needs U/V planes (add --uv)")
            img = encode_pe(img, PEConfig(args.pe))
        if args.nrm:
            img = encode_normals(img, K)
    with timer.stage("write"):
        out = archive.save_archive(args.out, img, K, poses)
    manifest = RunManifest(
        tool_version=__version__,
        command="encode",
        config_hash=config_hash(
            {"uv": args.uv, "xy": args.xy, "pe": args.pe, "nrm": args.nrm}
        ),
        seed=None,
        inputs=[str(args.input)],
        outputs=[str(out)],
    )
    _finish(manifest, timer, out / "manifest.json")
    print(f"wrote encoded archive {out}")
    return 0


def cmd_transform(args) -> int:
    timer = StageTimer()
    with timer.stage("load"):
        img, K, poses = archive.load_archive(args.input)
        try:
            spec = TransformSpec.from_json(Path(args.spec).read_text())
        except FileNotFoundError:
            raise DataError(f"{args.spec}: file not found")
        except (KeyError, json.JSONDecodeError) as e:
            raise DataError(f"{args.spec}: bad transform spec ({e})")
    with timer.stage("apply"):
        from .transforms import apply_spec

        img = apply_spec(img, spec)
    with timer.stage("write"):
        out = archive.save_archive(args.out, img, K, poses)
    manifest = RunManifest(
        tool_version=__version__,
        command="transform",
        config_hash=config_hash(json.loads(spec.to_json())),
        seed=None,
        inputs=[str(args.input), str(args.spec)],
        outputs=[str(out)],
    )
    _finish(manifest, timer, out / "manifest.json")
    print(f"wrote transformed archive {out} ({img.width}x{img.height})")
    return 0


def _archive_correspondences(img, object_id: int, mode: str) -> Correspondences:
    if img.gt_abc is None:
        raise MissingPlane("solve: archive has no gt_abc.raw plane")
    if img.mask is None:
        raise MissingPlane("solve: archive has no mask.png plane")
    sel = img.valid & (img.mask == object_id)
    rows, cols = np.nonzero(sel)
    if rows.size < 3:
        raise DataError(f"solve: object {object_id} has {rows.size} valid pixels, need >= 3")
    if mode == "uv":
        if img.u is None:
            raise MissingPlane("solve: --mode uv needs uv.raw (run encode --uv first)")
        u, v = img.u[rows, cols], img.v[rows, cols]
    else:
        u, v = cols.astype(float), rows.astype(float)
    pixels = np.column_stack([u, v, img.d[rows, cols]])
    return Correspondences.from_pixels(img.gt_abc[:, rows, cols].T, pixels)


def cmd_solve(args) -> int:
    timer = StageTimer()
    out_path = Path(args.out)
    if args.csv:
        with timer.stage("load"):
            try:
                corr = Correspondences.from_csv(args.csv)
            except FileNotFoundError:
                raise DataError(f"{args.csv}: file not found")
            except ValueError as e:
                raise DataError(str(e))
            K = archive.read_intrinsics_json(args.intrinsics) if args.intrinsics else None
            if corr.pixels is not None and K is None:
                raise DataError(f"{args.csv}: pixel observations need --intrinsics")
        with timer.stage("solve"):
            pose = robust_solve(corr, K, iters=args.iters, trim_fraction=args.trim)
        with timer.stage("write"):
            archive.write_pose_json(out_path, pose)
        inputs = [str(args.csv)]
    else:
        if not args.input:
            raise DataError("solve: pass --in ARCHIVE or --csv FILE")
        with timer.stage("load"):
            img, K, gt_poses = archive.load_archive(args.input)
        with timer.stage("solve"):
            if args.object is not None:
                ids = [args.object]
            else:
                if img.mask is None:
                    raise MissingPlane(f"{args.input}: archive has no mask.png plane")
                ids = sorted(int(i) for i in np.unique(img.mask[img.valid & (img.mask > 0)]))
                if not ids:
                    raise DataError(f"{args.input}: no valid object pixels to solve from")
            solved: dict[int, Pose] = {}
            for oid in ids:
                corr = _archive_correspondences(img, oid, args.mode)
                solved[oid] = robust_solve(corr, K, iters=args.iters, trim_fraction=args.trim)
        with timer.stage("write"):
            archive.write_pose_json(out_path, solved)
        inputs = [str(args.input)]
    manifest = RunManifest(
        tool_version=__version__,
        command="solve",
        config_hash=config_hash(
            {"mode": args.mode, "trim": args.trim, "iters": args.iters, "object": args.object}
        ),
        seed=None,
        inputs=inputs,
        outputs=[str(out_path)],
    )
    _finish(manifest, timer, out_path.parent / (out_path.name + ".manifest.json"))
    print(f"wrote {out_path}")
    return 0


def cmd_breakdown(args) -> int:
    timer = StageTimer()
    with timer.stage("render"):
        scene = standard_scene(args.seed)
    with timer.stage("experiments"):
        if args.spec:
            try:
                specs = [(args.spec_id, TransformSpec.from_json(Path(args.spec).read_text()))]
            except FileNotFoundError:
                raise DataError(f"{args.spec}: file not found")
            except (KeyError, json.JSONDecodeError) as e:
                raise DataError(f"{args.spec}: bad transform spec ({e})")
        else:
            specs = list(STANDARD_SPECS)
        with ThreadPoolExecutor(max_workers=min(thread_cap(), len(specs))) as pool:
            results = list(
                pool.map(lambda sp: run_breakdown_experiment(scene, sp[1], sp[0]), specs)
            )
    with timer.stage("write"):
        rows = [row for res in results for row in res.csv_rows()]
        _write_csv(args.out, CSV_COLUMNS, rows)
    manifest = RunManifest(
        tool_version=__version__,
        command="breakdown",
        config_hash=config_hash({"seed": args.seed, "specs": [s for s, _ in specs]}),
        seed=args.seed,
        inputs=[str(args.spec)] if args.spec else [],
        outputs=[str(args.out)],
    )
    _finish(manifest, timer, Path(args.out).parent / (Path(args.out).name + ".manifest.json"))
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _read_gt_frame(path) -> list[dict]:
    doc = _load_json(path)
    if "objects" not in doc:
        raise DataError(f"{path}: missing field 'objects'")
    out = []
    for o in doc["objects"]:
        for key in ("id", "name", "quat_wxyz", "t"):
            if key not in o:
                raise DataError(f"{path}: object entry missing field {key!r}")
        out.append(
            {
                "id": int(o["id"]),
                "name": str(o["name"]),
                "pose": Pose.from_json_dict(o),
                "occlusion": float(o["occlusion"]) if "occlusion" in o else None,
            }
        )
    return out


def _collect_frames(gt_dir, pred_dir):
    """Frame ids from the gt layout: either <id>.json files or archive
    subdirectories containing gt.json."""
    gt_dir, pred_dir = Path(gt_dir), Path(pred_dir)
    frames = []
    json_files = sorted(p for p in gt_dir.glob("*.json") if p.name != "manifest.json")
    if json_files:
        frames = [(p.stem, p) for p in json_files]
    else:
        frames = [(d.name, d / "gt.json") for d in sorted(gt_dir.iterdir())
                  if d.is_dir() and (d / "gt.json").exists()]
    if not frames:
        raise DataError(f"{gt_dir}: no ground-truth frames (*.json or */gt.json)")
    out = []
    for frame_id, gt_path in frames:
        pred_path = pred_dir / f"{frame_id}.json"
        if not pred_path.exists():
            raise DataError(f"{pred_path}: missing prediction for frame {frame_id}")
        out.append((frame_id, gt_path, pred_path))
    return out


def cmd_eval(args) -> int:
    timer = StageTimer()
    out_dir = Path(args.out)
    with timer.stage("load"):
        frames = _collect_frames(args.gt, args.pred)
        by_object: dict[str, dict] = {}
        for frame_id, gt_path, pred_path in frames:
            gt_objects = _read_gt_frame(gt_path)
            preds = archive.read_pose_json(pred_path)
            for entry in gt_objects:
                if entry["id"] not in preds:
                    raise DataError(
                        f"{pred_path}: no prediction for object id {entry['id']} in frame {frame_id}"
                    )
                rec = by_object.setdefault(entry["name"], {"pairs": [], "occ": []})
                rec["pairs"].append((preds[entry["id"]], entry["pose"]))
                rec["occ"].append(entry["occlusion"])
        models = {}
        for name in by_object:
            try:
                models[name] = archive.load_model(args.models, name)
            except FileNotFoundError:
                raise DataError(f"{args.models}: no model files for object {name!r}")
    with timer.stage("score"):
        names = sorted(by_object)
        with ThreadPoolExecutor(max_workers=min(thread_cap(), len(names))) as pool:
            scored = dict(
                zip(
                    names,
                    pool.map(
                        lambda n: evaluate_object(
                            models[n], by_object[n]["pairs"], args.max_threshold
                        ),
                        names,
                    ),
                )
            )
    with timer.stage("write"):
        out_dir.mkdir(parents=True, exist_ok=True)
        report_columns = ("object", "n_frames", "adds_auc", "add_s_auc", "add_01d")
        rows = []
        for name in names:
            om = scored[name]
            rows.append(
                {
                    "object": name,
                    "n_frames": om.n_frames,
                    "adds_auc": om.adds_auc,
                    "add_s_auc": om.add_s_auc,
                    "add_01d": om.add_01d,
                }
            )
        rows.append(
            {
                "object": "ALL",
                "n_frames": sum(r["n_frames"] for r in rows),
                "adds_auc": float(np.mean([r["adds_auc"] for r in rows])),
                "add_s_auc": float(np.mean([r["add_s_auc"] for r in rows])),
                "add_01d": float(np.mean([r["add_01d"] for r in rows])),
            }
        )
        _write_csv(out_dir / "report.csv", report_columns, rows)

        curve_rows = []
        for name in names:
            om = scored[name]
            for metric, distances in (("adds", om.adds_distances), ("add_s", om.dispatch_distances)):
                for t, acc in accuracy_curve(distances, args.max_threshold):
                    curve_rows.append(
                        {"object": name, "metric": metric, "threshold": float(t),
                         "accuracy_pct": float(acc)}
                    )
        _write_csv(out_dir / "auc_curve.csv", ("object", "metric", "threshold", "accuracy_pct"),
                   curve_rows)

        occ_vals, occ_dists = [], []
        for name in names:
            om = scored[name]
            for occ, dist in zip(by_object[name]["occ"], om.adds_distances):
                if occ is not None:
                    occ_vals.append(occ)
                    occ_dists.append(float(dist))
        outputs = [str(out_dir / "report.csv"), str(out_dir / "auc_curve.csv")]
        if occ_vals:
            edges = [float(e) for e in args.occ_bins.split(",")]
            bins = occlusion_bins(occ_vals, occ_dists, edges, threshold=args.occ_threshold)
            occ_rows = [
                {
                    "bin_lo": b.lo,
                    "bin_hi": b.hi,
                    "accuracy_pct": b.accuracy if b.accuracy is not None else "",
                    "n_frames": b.count,
                }
                for b in bins
            ]
            _write_csv(out_dir / "occlusion.csv",
                       ("bin_lo", "bin_hi", "accuracy_pct", "n_frames"), occ_rows)
            outputs.append(str(out_dir / "occlusion.csv"))
    manifest = RunManifest(
        tool_version=__version__,
        command="eval",
        config_hash=config_hash(
            {
                "max_threshold": args.max_threshold,
                "occ_bins": args.occ_bins,
                "occ_threshold": args.occ_threshold,
            }
        ),
        seed=None,
        inputs=[str(args.gt), str(args.pred), str(args.models)],
        outputs=outputs,
    )
    _finish(manifest, timer, out_dir / "manifest.json")
    print(f"wrote {out_dir}/report.csv ({len(names)} objects, {len(frames)} frames)")
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="uvpose", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="render a scene config into a frame archive")
    g.add_argument("--config", required=True, help="SceneConfig JSON file")
    g.add_argument("--out", required=True, help="output archive directory")
    g.add_argument("--seed", type=int, default=None, help="override the config seed")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("encode", help="add coordinate channels to an archive")
    e.add_argument("--in", dest="input", required=True, help="input archive directory")
    e.add_argument("--out", required=True, help="output archive directory")
    e.add_argument("--uv", action="store_true", help="plain pixel-coordinate channels")
    e.add_argument("--xy", action="store_true", help="inverse-projected camera x/y channels")
    e.add_argument("--pe", type=int, default=0, metavar="D",
                   help="sinusoidal positional encoding with D channels (multiple of 4)")
    e.add_argument("--nrm", action="store_true", help="surface-normal channels")
    e.set_defaults(func=cmd_encode)

    t = sub.add_parser("transform", help="apply a transform spec to an archive")
    t.add_argument("--in", dest="input", required=True, help="input archive directory")
    t.add_argument("--spec", required=True, help="TransformSpec JSON file")
    t.add_argument("--out", required=True, help="output archive directory")
    t.set_defaults(func=cmd_transform)

    s = sub.add_parser("solve", help="recover poses from an archive or correspondence CSV")
    s.add_argument("--in", dest="input", default=None, help="input archive directory")
    s.add_argument("--csv", default=None, help="correspondence CSV (a,b,c,u,v,d[,w] or a,b,c,x,y,z[,w])")
    s.add_argument("--intrinsics", default=None, help="intrinsics JSON (required for pixel CSVs)")
    s.add_argument("--mode", choices=("builtin", "uv"), default="builtin",
                   help="pixel-coordinate source for archive solves")
    s.add_argument("--object", type=int, default=None, help="solve only this object id")
    s.add_argument("--trim", type=float, default=0.0, help="trim fraction in [0, 0.5)")
    s.add_argument("--iters", type=int, default=3, help="trimming iterations")
    s.add_argument("--out", required=True, help="output pose JSON")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("breakdown", help="run the transform experiment matrix to CSV")
    b.add_argument("--out", required=True, help="output CSV path")
    b.add_argument("--seed", type=int, default=STANDARD_SEED, help="scene seed")
    b.add_argument("--spec", default=None, help="run one TransformSpec JSON instead of the matrix")
    b.add_argument("--spec-id", default="custom", help="spec_id column value for --spec")
    b.set_defaults(func=cmd_breakdown)

    v = sub.add_parser("eval", help="score predicted poses against ground truth")
    v.add_argument("--gt", required=True,
                   help="ground-truth dir: <frame>.json files or archive dirs with gt.json")
    v.add_argument("--pred", required=True, help="predictions dir: <frame>.json pose files")
    v.add_argument("--models", required=True, help="model files dir (<name>.txt + <name>.json)")
    v.add_argument("--out", required=True, help="output report directory")
    v.add_argument("--max-threshold", type=float, default=0.1,
                   help="AUC integration limit in meters")
    v.add_argument("--occ-bins", default="0,0.2,0.4,0.6,0.8,1",
                   help="comma-separated occlusion bin edges")
    v.add_argument("--occ-threshold", type=float, default=0.02,
                   help="distance threshold for occlusion-bin accuracy, meters")
    v.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if not e.code else int(e.code)
    try:
        return args.func(args)
    except DegenerateError as e:
        print(f"uvpose {args.command}: degenerate input: {e}", file=sys.stderr)
        return 3
    except (DataError, OSError, KeyError, ValueError) as e:
        print(f"uvpose {args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
