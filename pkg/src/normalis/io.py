"""File formats: PFM float maps, 16-bit depth PNG, normal PNG, manifests.

Byte-level layouts are documented in docs/formats.md.  Ingest never
fabricates data: samples outside a format's valid range become invalid
pixels, not sentinel numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _png
from .geometry import CameraIntrinsics, DepthImage, DisparityImage, NormalMap

__all__ = [
    "read_pfm",
    "write_pfm",
    "read_depth_pfm",
    "write_depth_pfm",
    "read_disparity_pfm",
    "read_depth_png16",
    "write_depth_png16",
    "encode_normal_png",
    "decode_normal_png",
    "encode_normal_pfm",
    "decode_normal_pfm",
    "read_normal_map",
    "DEPTH_FORMATS",
    "ManifestEntry",
    "DatasetManifest",
    "load_manifest",
    "save_manifest",
    "load_entry_depth",
]

DEPTH_FORMATS = ("pfm-meters", "png16-millimeters", "pfm-disparity")


# ---------------------------------------------------------------------------
# PFM

def write_pfm(path, data, scale: float = -1.0) -> None:
    """Write a float32 raster (H, W) or (H, W, 3) as PFM.

    Rows are stored bottom-up; the sign of ``scale`` encodes endianness
    (negative = little-endian).
    """
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        magic = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"PFM stores (H, W) or (H, W, 3) rasters, got {arr.shape}")
    if scale == 0:
        raise ValueError("scale must be nonzero")
    h, w = arr.shape[:2]
    payload = np.flipud(arr).astype("<f4" if scale < 0 else ">f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(magic + b"\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(f"{float(scale)!r}\n".encode("ascii"))
        fh.write(payload)


def read_pfm(path):
    """Read a PFM file into a float32 array (H, W) or (H, W, 3)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4 and pos < len(blob):
        # header tokens are whitespace-separated; payload starts right
        # after the single whitespace byte that ends the scale token
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            break
        tokens.append(blob[start:pos])
    if len(tokens) < 4:
        raise ValueError(f"{path}: truncated PFM header")
    pos += 1  # the whitespace byte terminating the scale token
    magic = tokens[0]
    if magic == b"Pf":
        channels = 1
    elif magic == b"PF":
        channels = 3
    else:
        raise ValueError(f"{path}: bad PFM magic {magic!r}")
    try:
        w, h = int(tokens[1]), int(tokens[2])
        scale = float(tokens[3])
    except ValueError:
        raise ValueError(f"{path}: malformed PFM header") from None
    if w <= 0 or h <= 0 or scale == 0:
        raise ValueError(f"{path}: malformed PFM header")
    expected = w * h * channels * 4
    payload = blob[pos : pos + expected]
    if len(payload) != expected:
        raise ValueError(
            f"{path}: truncated PFM payload ({len(payload)} of {expected} bytes)"
        )
    dt = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(payload, dtype=dt).astype(np.float32)
    arr = arr.reshape((h, w) if channels == 1 else (h, w, channels))
    return np.flipud(arr).copy()


def read_depth_pfm(path) -> DepthImage:
    """PFM depth in meters; non-positive/non-finite samples become invalid."""
    return DepthImage(read_pfm(path).astype(np.float64), copy=False)


def write_depth_pfm(depth: DepthImage, path) -> None:
    values = np.where(depth.valid, depth.values, 0.0).astype(np.float32)
    write_pfm(path, values)


def read_disparity_pfm(path) -> DisparityImage:
    """PFM disparity in pixels; non-positive samples become invalid."""
    return DisparityImage(read_pfm(path).astype(np.float64), copy=False)


# ---------------------------------------------------------------------------
# 16-bit depth PNG (millimeter convention)

def write_depth_png16(depth: DepthImage, path) -> None:
    """Quantize depth to whole millimeters; invalid pixels store 0.

    Depths above 65.535 m saturate, and depths below half a millimeter
    round to the invalid sentinel; both are limits of the format.
    """
    mm = np.round(np.where(depth.valid, depth.values, 0.0) * 1000.0)
    mm = np.clip(mm, 0, 65535).astype(np.uint16)
    _png.write_png(path, mm)


def read_depth_png16(path) -> DepthImage:
    """16-bit single-channel PNG, millimeters; value 0 marks invalid."""
    arr = _png.read_png(path)
    if arr.ndim != 2 or arr.dtype != np.uint16:
        raise ValueError(f"{path}: expected a 16-bit single-channel PNG")
    return DepthImage(arr.astype(np.float64) / 1000.0, arr != 0, copy=False)


# ---------------------------------------------------------------------------
# normal maps

def encode_normal_png(normals: NormalMap, path) -> None:
    """16-bit RGBA PNG: channel = round((n+1)/2 * 65535), alpha 0 = invalid."""
    quant = np.round((normals.values + 1.0) * 0.5 * 65535.0)
    quant = np.clip(np.where(np.isfinite(quant), quant, 0.0), 0, 65535)
    rgba = np.zeros((*normals.shape, 4), dtype=np.uint16)
    rgba[..., :3] = quant.astype(np.uint16)
    rgba[..., 3] = np.where(normals.valid, 65535, 0)
    rgba[~normals.valid, :3] = 0
    _png.write_png(path, rgba)


def decode_normal_png(path) -> NormalMap:
    arr = _png.read_png(path)
    if arr.ndim != 3 or arr.shape[2] != 4 or arr.dtype != np.uint16:
        raise ValueError(f"{path}: expected a 16-bit RGBA PNG")
    valid = arr[..., 3] != 0
    n = arr[..., :3].astype(np.float64) / 65535.0 * 2.0 - 1.0
    norm = np.linalg.norm(n, axis=-1)
    valid &= norm > 0
    n = n / np.where(norm > 0, norm, 1.0)[..., None]
    n[~valid] = 0.0
    return NormalMap(n, valid, copy=False)


def encode_normal_pfm(normals: NormalMap, path) -> None:
    """Lossless 3-channel PFM alternative; invalid pixels store zeros."""
    values = np.where(normals.valid[..., None], normals.values, 0.0)
    write_pfm(path, values.astype(np.float32))


def decode_normal_pfm(path) -> NormalMap:
    arr = read_pfm(path)
    if arr.ndim != 3:
        raise ValueError(f"{path}: expected a 3-channel PFM")
    n = arr.astype(np.float64)
    norm = np.linalg.norm(n, axis=-1)
    valid = norm > 0
    n = n / np.where(valid, norm, 1.0)[..., None]
    n[~valid] = 0.0
    return NormalMap(n, valid, copy=False)


def read_normal_map(path) -> NormalMap:
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return decode_normal_pfm(path)
    return decode_normal_png(path)


# ---------------------------------------------------------------------------
# dataset manifests

@dataclass(frozen=True)
class ManifestEntry:
    """One dataset item: depth file, its format and intrinsics, optional GT."""

    id: str
    depth_path: Path
    depth_format: str
    intrinsics: CameraIntrinsics
    gt_normal_path: Path | None = None
    gt_mask_path: Path | None = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def _intrinsics_to_dict(k: CameraIntrinsics) -> dict:
    return {
        "fx": k.fx, "fy": k.fy, "u0": k.u0, "v0": k.v0,
        "width": k.width, "height": k.height,
    }


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Serialize to JSON with a stable field order (byte-deterministic)."""
    base = Path(path).parent
    items = []
    for e in manifest:
        item = {
            "id": e.id,
            "depth_path": _relativize(e.depth_path, base),
            "depth_format": e.depth_format,
            "intrinsics": _intrinsics_to_dict(e.intrinsics),
        }
        if e.gt_normal_path is not None:
            item["gt_normal_path"] = _relativize(e.gt_normal_path, base)
        if e.gt_mask_path is not None:
            item["gt_mask_path"] = _relativize(e.gt_mask_path, base)
        if e.meta:
            item["meta"] = e.meta
        items.append(item)
    with open(path, "w", encoding="ascii") as fh:
        json.dump({"entries": items}, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _relativize(p: Path, base: Path) -> str:
    p = Path(p)
    try:
        return p.relative_to(base).as_posix()
    except ValueError:
        return p.as_posix()


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a manifest; referenced files must exist."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed manifest: {exc}") from None
    if not isinstance(doc, dict) or "entries" not in doc:
        raise ValueError(f"{path}: manifest must be an object with 'entries'")
    base = path.parent
    seen = set()
    entries = []
    for raw in doc["entries"]:
        try:
            eid = raw["id"]
            depth_rel = raw["depth_path"]
            fmt = raw["depth_format"]
            kd = raw["intrinsics"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: entry missing field {exc}") from None
        if eid in seen:
            raise ValueError(f"{path}: duplicate entry id {eid!r}")
        seen.add(eid)
        if fmt not in DEPTH_FORMATS:
            raise ValueError(
                f"{path}: entry {eid!r} has unknown depth_format {fmt!r}"
            )
        intr = CameraIntrinsics(
            fx=float(kd["fx"]), fy=float(kd["fy"]),
            u0=float(kd["u0"]), v0=float(kd["v0"]),
            width=int(kd["width"]), height=int(kd["height"]),
        )
        paths = {"depth_path": base / depth_rel}
        for key in ("gt_normal_path", "gt_mask_path"):
            paths[key] = (base / raw[key]) if raw.get(key) else None
        for key, p in paths.items():
            if p is not None and not p.is_file():
                raise ValueError(f"{path}: entry {eid!r} {key} missing: {p}")
        entries.append(ManifestEntry(
            id=eid,
            depth_path=paths["depth_path"],
            depth_format=fmt,
            intrinsics=intr,
            gt_normal_path=paths["gt_normal_path"],
            gt_mask_path=paths["gt_mask_path"],
            meta=dict(raw.get("meta", {})),
        ))
    return DatasetManifest(tuple(entries))


def load_entry_depth(entry: ManifestEntry):
    """Load an entry's depth file as the image type its format implies."""
    if entry.depth_format == "pfm-meters":
        return read_depth_pfm(entry.depth_path)
    if entry.depth_format == "png16-millimeters":
        return read_depth_png16(entry.depth_path)
    if entry.depth_format == "pfm-disparity":
        return read_disparity_pfm(entry.depth_path)
    raise ValueError(f"unknown depth_format {entry.depth_format!r}")
