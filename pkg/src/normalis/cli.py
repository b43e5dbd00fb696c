"""Benchmark command line: synth, estimate, bench, oracle-check.

Exit codes: 0 success, 1 metric/assertion failure, 2 usage or I/O error.
Reports are deterministic given (manifest, flags, seed); wall-time columns
are the one documented exception and live in their own CSV column.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as nio
from .candidates import Neighborhood, PixelCandidates
from .estimators import (
    ESTIMATOR_NAMES,
    EstimatorConfig,
    axial_optimal_inclination,
    estimate_normals,
    grid_search_inclination,
    inclination_objective,
)
from .geometry import CameraIntrinsics, DepthImage
from .gradients import kernel_by_name
from .metrics import (
    angular_error_map,
    max_angular_error,
    mean_angular_error,
    median_angular_error,
)
from .synthetic import (
    DihedralScene,
    NoiseSpec,
    SphereScene,
    add_noise,
    ground_truth_normals,
    plane_from_view,
    render_depth,
)

# salt separating the scene-parameter stream from the per-image noise
# stream (which uses the bare base^index key)
_SCENE_SALT = 0x9E3779B97F4A7C15

DEFAULT_SYNTH_CONFIG = {
    "width": 160,
    "height": 120,
    "fx": 100.0,
    "fy": 100.0,
    "u0": 80.0,
    "v0": 60.0,
    "planes": 100,
    "spheres": 0,
    "dihedrals": 0,
    "max_inclination_deg": 75.0,
    "depth_range": [2.0, 10.0],
    "sphere_radius_range": [0.5, 1.5],
    "dihedral_opening_deg": [20.0, 50.0],
    "band_halfwidth": 3,
    "noise_sigma": 0.0,
    "noise_mode": "fraction",
    "depth_format": "pfm-meters",
    "gt_format": "png",
    "seed": 0,
}

# piecewise-linear ramp through fixed anchor colors, applied over
# [0, 30] degrees and saturating; the full table is in docs/formats.md
ERROR_RAMP_ANCHORS = (
    (0.000, (68, 1, 84)),
    (0.143, (70, 50, 127)),
    (0.286, (54, 92, 141)),
    (0.429, (39, 127, 142)),
    (0.571, (31, 161, 135)),
    (0.714, (74, 194, 109)),
    (0.857, (159, 218, 58)),
    (1.000, (253, 231, 37)),
)
ERROR_RAMP_MAX_DEG = 30.0


def colorize_error(values, valid):
    """Map error degrees to the fixed ramp; invalid pixels go black."""
    t = np.clip(np.asarray(values, dtype=np.float64) / ERROR_RAMP_MAX_DEG, 0.0, 1.0)
    pos = np.array([a for a, _ in ERROR_RAMP_ANCHORS])
    cols = np.array([c for _, c in ERROR_RAMP_ANCHORS], dtype=np.float64)
    rgb = np.stack(
        [np.interp(t, pos, cols[:, i]) for i in range(3)], axis=-1
    )
    out = np.where(np.asarray(valid)[..., None], np.round(rgb), 0.0)
    return out.astype(np.uint8)


def _intrinsics_from_config(cfg) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=float(cfg["fx"]), fy=float(cfg["fy"]),
        u0=float(cfg["u0"]), v0=float(cfg["v0"]),
        width=int(cfg["width"]), height=int(cfg["height"]),
    )


def _sample_scene(kind: str, rng, cfg, intrinsics):
    if kind == "plane":
        theta = math.radians(rng.uniform(0.0, cfg["max_inclination_deg"]))
        phi = rng.uniform(0.0, 2.0 * math.pi)
        z0 = rng.uniform(*cfg["depth_range"])
        return plane_from_view(theta, phi, z0), {}
    if kind == "sphere":
        zc = rng.uniform(*cfg["depth_range"])
        r = min(rng.uniform(*cfg["sphere_radius_range"]), 0.4 * zc)
        lateral = 0.1 * zc
        center = (rng.uniform(-lateral, lateral), rng.uniform(-lateral, lateral), zc)
        return SphereScene(center, r), {}
    if kind == "dihedral":
        w = intrinsics.width
        split = w / 2.0 + rng.uniform(-w / 8.0, w / 8.0)
        depth = rng.uniform(*cfg["depth_range"])
        lo, hi = (math.radians(a) for a in cfg["dihedral_opening_deg"])
        first = rng.uniform(lo, hi)
        second = -rng.uniform(lo, hi)
        tilt = rng.uniform(-0.3, 0.3)
        scene = DihedralScene.crease(intrinsics, split, depth, first, second, tilt)
        meta = {
            "ridge_axis": "u",
            "ridge_pos": split,
            "band_halfwidth": int(cfg["band_halfwidth"]),
        }
        return scene, meta
    raise ValueError(kind)


def _write_depth(depth: DepthImage, fmt: str, intrinsics, path: Path):
    if fmt == "pfm-meters":
        nio.write_depth_pfm(depth, path)
    elif fmt == "png16-millimeters":
        nio.write_depth_png16(depth, path)
    elif fmt == "pfm-disparity":
        # synthetic stereo with a 0.5 m baseline; the scale is irrelevant
        # to the estimators and never recorded
        disp = np.where(depth.valid, 0.5 * intrinsics.fx / depth.values, 0.0)
        nio.write_pfm(path, disp.astype(np.float32))
    else:
        raise ValueError(f"unknown depth_format {fmt!r}")


def cmd_synth(args) -> int:
    cfg = dict(DEFAULT_SYNTH_CONFIG)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in ("planes", "spheres", "dihedrals", "seed", "band_halfwidth"):
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if args.noise_sigma is not None:
        cfg["noise_sigma"] = args.noise_sigma
    if args.noise_mode is not None:
        cfg["noise_mode"] = args.noise_mode
    if args.depth_format is not None:
        cfg["depth_format"] = args.depth_format
    if args.size is not None:
        w, _, h = args.size.partition("x")
        cfg["width"], cfg["height"] = int(w), int(h)
        cfg["u0"], cfg["v0"] = int(w) / 2.0, int(h) / 2.0
    if args.focal is not None:
        cfg["fx"] = cfg["fy"] = args.focal

    counts = [("plane", cfg["planes"]), ("sphere", cfg["spheres"]),
              ("dihedral", cfg["dihedrals"])]
    total = sum(n for _, n in counts)
    if total <= 0:
        raise ValueError("refusing to write an empty suite: no scenes requested")
    intrinsics = _intrinsics_from_config(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    base_seed = int(cfg["seed"])
    entries = []
    index = 0
    for kind, n in counts:
        for i in range(n):
            image_seed = base_seed ^ index
            rng = np.random.Generator(np.random.Philox(key=image_seed ^ _SCENE_SALT))
            scene, meta = _sample_scene(kind, rng, cfg, intrinsics)
            depth = render_depth(scene, intrinsics)
            if cfg["noise_sigma"] > 0:
                depth = add_noise(depth, NoiseSpec(
                    sigma=cfg["noise_sigma"], mode=cfg["noise_mode"],
                    seed=image_seed,
                ))
            gt = ground_truth_normals(scene, intrinsics)
            eid = f"{kind}_{i:03d}"
            depth_ext = "pfm" if cfg["depth_format"].startswith("pfm") else "png"
            depth_path = out_dir / f"{eid}_depth.{depth_ext}"
            _write_depth(depth, cfg["depth_format"], intrinsics, depth_path)
            gt_path = out_dir / f"{eid}_normals.{cfg['gt_format']}"
            if cfg["gt_format"] == "pfm":
                nio.encode_normal_pfm(gt, gt_path)
            else:
                nio.encode_normal_png(gt, gt_path)
            entries.append(nio.ManifestEntry(
                id=eid,
                depth_path=depth_path,
                depth_format=cfg["depth_format"],
                intrinsics=intrinsics,
                gt_normal_path=gt_path,
                meta=meta,
            ))
            index += 1
    manifest_path = out_dir / "manifest.json"
    nio.save_manifest(nio.DatasetManifest(tuple(entries)), manifest_path)
    print(f"wrote {total} scenes to {out_dir} (manifest: {manifest_path})")
    return 0


def _build_config(args) -> EstimatorConfig:
    return EstimatorConfig(
        estimator=getattr(args, "estimator", "sne+"),
        kernel=kernel_by_name(args.kernel),
        neighborhood=Neighborhood.ring(args.neighborhood_radius),
    )


def cmd_estimate(args) -> int:
    path = Path(args.depth)
    if not path.is_file():
        raise FileNotFoundError(f"depth file not found: {path}")
    fmt = args.format
    if fmt is None:
        fmt = "pfm-meters" if path.suffix.lower() == ".pfm" else "png16-millimeters"
    entry_like = {
        "pfm-meters": nio.read_depth_pfm,
        "png16-millimeters": nio.read_depth_png16,
        "pfm-disparity": nio.read_disparity_pfm,
    }
    image = entry_like[fmt](path)
    intrinsics = CameraIntrinsics(
        fx=args.fx, fy=args.fy, u0=args.u0, v0=args.v0,
        width=image.width, height=image.height,
    )
    config = _build_config(args)
    normals = estimate_normals(image, intrinsics, config)
    out = Path(args.out)
    if out.suffix.lower() == ".pfm":
        nio.encode_normal_pfm(normals, out)
    else:
        nio.encode_normal_png(normals, out)
    if args.preview:
        rgb = np.clip(np.round((normals.values + 1.0) * 0.5 * 255.0), 0, 255)
        rgb = np.where(normals.valid[..., None], rgb, 0.0).astype(np.uint8)
        from . import _png

        _png.write_png(args.preview, rgb)
    print(f"wrote {out} ({normals.valid_count()} valid pixels, {config.estimator})")
    return 0


def _band_masks(entry, shape):
    meta = entry.meta or {}
    if "ridge_axis" not in meta:
        return None, None
    h, w = shape
    pos = float(meta["ridge_pos"])
    half = float(meta.get("band_halfwidth", 3))
    if meta["ridge_axis"] == "u":
        coord = np.arange(w, dtype=np.float64)[None, :]
    else:
        coord = np.arange(h, dtype=np.float64)[:, None]
    band = np.broadcast_to(np.abs(coord - pos) <= half, (h, w))
    return band, ~band


def _bench_entry(task):
    """Run all estimators on one manifest entry; returns plain-dict rows."""
    entry, estimator_names, kernel_name, radius, reps, want_errors = task
    try:
        image = nio.load_entry_depth(entry)
        gt = None
        if entry.gt_normal_path is not None:
            gt = nio.read_normal_map(entry.gt_normal_path)
    except Exception as exc:  # a broken entry fails its rows, not the run
        return [
            {"entry_id": entry.id, "estimator": name, "status": "failed",
             "reason": f"{type(exc).__name__}: {exc}"}
            for name in estimator_names
        ]
    rows = []
    for name in estimator_names:
        row = {"entry_id": entry.id, "estimator": name}
        try:
            config = EstimatorConfig(
                estimator=name,
                kernel=kernel_by_name(kernel_name),
                neighborhood=Neighborhood.ring(radius),
            )
            times = []
            normals = None
            for _ in range(max(1, reps)):
                t0 = time.perf_counter()
                normals = estimate_normals(image, entry.intrinsics, config)
                times.append((time.perf_counter() - t0) * 1e3)
            row["ms_per_image"] = float(np.median(times))
            row["valid_px"] = normals.valid_count()
            if gt is not None:
                errors = angular_error_map(normals, gt)
                row["ea_mean_deg"] = mean_angular_error(errors)
                row["ea_median_deg"] = median_angular_error(errors)
                row["ea_max_deg"] = max_angular_error(errors)
                band, offband = _band_masks(entry, errors.shape)
                if band is not None:
                    bvalid = errors.valid & band
                    ovalid = errors.valid & offband
                    if bvalid.any():
                        row["band_ea_mean_deg"] = float(
                            math.fsum(errors.values[bvalid]) / bvalid.sum()
                        )
                    if ovalid.any():
                        row["offband_ea_mean_deg"] = float(
                            math.fsum(errors.values[ovalid]) / ovalid.sum()
                        )
                if want_errors:
                    row["_errors"] = (errors.values.copy(), errors.valid.copy())
        except Exception as exc:  # recorded, never aborts the suite
            row["status"] = "failed"
            row["reason"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


CSV_COLUMNS = [
    "entry_id", "estimator", "ea_mean_deg", "ea_median_deg", "ea_max_deg",
    "valid_px", "ms_per_image",
]
BAND_COLUMNS = ["band_ea_mean_deg", "offband_ea_mean_deg"]


def cmd_bench(args) -> int:
    manifest = nio.load_manifest(args.manifest)
    if len(manifest) == 0:
        raise ValueError(f"{args.manifest}: manifest has no entries")
    estimators = [e.strip() for e in args.estimators.split(",") if e.strip()]
    if not estimators:
        raise ValueError("at least one estimator is required")
    for name in estimators:
        if name not in ESTIMATOR_NAMES:
            raise ValueError(
                f"unknown estimator {name!r}; choose from {ESTIMATOR_NAMES}"
            )
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("NORMALIS_JOBS", "1"))
    tasks = [
        (entry, tuple(estimators), args.kernel, args.neighborhood_radius,
         args.timing_reps, bool(args.emit_error_maps))
        for entry in manifest
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_entry = list(pool.map(_bench_entry, tasks))
    else:
        per_entry = [_bench_entry(t) for t in tasks]
    rows = [row for chunk in per_entry for row in chunk]
    rows.sort(key=lambda r: (r["entry_id"], r["estimator"]))

    if args.emit_error_maps:
        emap_dir = Path(args.emit_error_maps)
        emap_dir.mkdir(parents=True, exist_ok=True)
        from . import _png

        for row in rows:
            if "_errors" in row:
                values, valid = row["_errors"]
                safe = row["estimator"].replace("+", "plus")
                _png.write_png(
                    emap_dir / f"{row['entry_id']}__{safe}.png",
                    colorize_error(values, valid),
                )
    for row in rows:
        row.pop("_errors", None)

    has_band = any("band_ea_mean_deg" in r for r in rows)
    columns = CSV_COLUMNS + (BAND_COLUMNS if has_band else [])
    if args.out_csv:
        with open(args.out_csv, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(c)) for c in columns])

    failures = [r for r in rows if r.get("status") == "failed"]
    aggregates = {}
    for name in estimators:
        scored = [r for r in rows
                  if r["estimator"] == name and "ea_mean_deg" in r]
        timed = [r for r in rows
                 if r["estimator"] == name and "ms_per_image" in r]
        agg = {"entries": sum(1 for r in rows if r["estimator"] == name)}
        if scored:
            agg["ea_mean_deg_avg"] = math.fsum(
                r["ea_mean_deg"] for r in scored) / len(scored)
            band_rows = [r for r in scored if "band_ea_mean_deg" in r]
            if band_rows:
                agg["band_ea_mean_deg_avg"] = math.fsum(
                    r["band_ea_mean_deg"] for r in band_rows) / len(band_rows)
        if timed:
            agg["ms_per_image_median"] = float(
                np.median([r["ms_per_image"] for r in timed]))
        aggregates[name] = agg
    report = {
        "manifest": str(args.manifest),
        "estimators": estimators,
        "kernel": args.kernel,
        "neighborhood_radius": args.neighborhood_radius,
        "seed": args.seed,
        "rows": rows,
        "aggregates": aggregates,
        "failures": [
            {"entry_id": r["entry_id"], "estimator": r["estimator"],
             "reason": r["reason"]}
            for r in failures
        ],
    }
    if args.out_json:
        with open(args.out_json, "w", encoding="ascii") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    print(f"benchmarked {len(manifest)} entries x {len(estimators)} estimators"
          f" ({len(failures)} failures)")
    for name, agg in aggregates.items():
        bits = [f"{name}:"]
        if "ea_mean_deg_avg" in agg:
            bits.append(f"e_A={agg['ea_mean_deg_avg']:.4f} deg")
        if "band_ea_mean_deg_avg" in agg:
            bits.append(f"band e_A={agg['band_ea_mean_deg_avg']:.4f} deg")
        if "ms_per_image_median" in agg:
            bits.append(f"{agg['ms_per_image_median']:.2f} ms/image")
        print("  " + " ".join(bits))
    return 1 if failures else 0


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_oracle_check(args) -> int:
    if args.trials < 1:
        raise ValueError("--trials must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    worst_angle = 0.0
    worst_deficit = 0.0
    failures = 0
    for _ in range(args.trials):
        k = int(rng.integers(1, 9))
        angles = rng.uniform(0.0, 2.0 * math.pi, size=k)
        cands = PixelCandidates(phi=0.0, a=np.sin(angles), nz=np.cos(angles))
        solution = axial_optimal_inclination(cands)
        theta_grid = grid_search_inclination(cands, args.grid_step)
        delta = abs(solution.theta - theta_grid) % math.pi
        delta = min(delta, math.pi - delta)
        deficit = float(
            inclination_objective(theta_grid, cands.a, cands.nz)
        ) - solution.objective
        worst_angle = max(worst_angle, delta)
        worst_deficit = max(worst_deficit, deficit)
        if deficit > 1e-9 or delta > args.grid_step:
            failures += 1
    status = "PASS" if failures == 0 else "FAIL"
    print(f"oracle-check: {args.trials} trials, grid step {args.grid_step:g}")
    print(f"  max |theta_closed - theta_grid| (mod pi): {worst_angle:.3e} rad")
    print(f"  max objective deficit vs grid: {worst_deficit:.3e}")
    print(f"  {status} ({failures} violations)")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="normalis",
        description="Depth-to-surface-normal estimation benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene suite")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--planes", type=int, default=None)
    p.add_argument("--spheres", type=int, default=None)
    p.add_argument("--dihedrals", type=int, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--noise-mode", choices=["absolute", "fraction"], default=None)
    p.add_argument("--depth-format", choices=list(nio.DEPTH_FORMATS), default=None)
    p.add_argument("--band-halfwidth", dest="band_halfwidth", type=int, default=None)
    p.add_argument("--size", help="WxH, e.g. 160x120")
    p.add_argument("--focal", type=float, help="focal length in pixels")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="estimate one normal map")
    p.add_argument("depth", help="input depth/disparity file")
    p.add_argument("--format", choices=list(nio.DEPTH_FORMATS), default=None,
                   help="default: by file extension")
    p.add_argument("--fx", type=float, required=True)
    p.add_argument("--fy", type=float, required=True)
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--estimator", choices=list(ESTIMATOR_NAMES), default="sne+")
    p.add_argument("--kernel", choices=["central", "sobel", "prewitt"],
                   default="central")
    p.add_argument("--neighborhood-radius", type=int, default=1)
    p.add_argument("--out", required=True, help="output normal map (.png or .pfm)")
    p.add_argument("--preview", help="optional 8-bit RGB visualization PNG")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="run estimators over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--estimators", default="sne+",
                   help="comma-separated estimator names")
    p.add_argument("--kernel", choices=["central", "sobel", "prewitt"],
                   default="central")
    p.add_argument("--neighborhood-radius", type=int, default=1)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.add_argument("--emit-error-maps", metavar="DIR",
                   help="write per-entry error-map PNGs here")
    p.add_argument("--seed", type=int, default=0,
                   help="recorded in the report for provenance")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel entries (default: NORMALIS_JOBS or 1)")
    p.add_argument("--timing-reps", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check",
                       help="closed-form inclination vs. grid search")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
