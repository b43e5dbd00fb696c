"""Pinhole camera model, image containers, and normal orientation.

Conventions used by every module in this package:

  - images are row-major and indexed ``[v, u]`` with ``u`` = column and
    ``v`` = row
  - the camera looks down +z; x grows with u, y grows with v
  - depth is metric (meters) in memory; file readers convert on ingest
  - reported normals are unit length and camera-facing: ``n . q <= 0`` at
    the observed point q, which on well-posed geometry means ``n_z <= 0``;
    exact ties are broken toward ``n_z <= 0``, then ``n_y <= 0``, then
    ``n_x >= 0`` so outputs are deterministic
  - an operation consuming an invalid pixel produces an invalid pixel,
    never a sentinel value
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CameraIntrinsics",
    "DepthImage",
    "InverseDepthImage",
    "DisparityImage",
    "NormalMap",
    "back_project",
    "project",
    "ray_grid",
    "to_inverse_depth",
    "inverse_to_depth",
    "disparity_as_inverse_depth",
    "orient_toward_camera",
]

UNIT_NORM_ATOL = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    u0: float
    v0: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.u0 < self.width and 0 <= self.v0 < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")

    @property
    def shape(self):
        return (self.height, self.width)


def _readonly(a):
    a.setflags(write=False)
    return a


def _as_f64(a, copy):
    """float64 C-order array; ``copy=False`` adopts a fresh caller array."""
    out = np.asarray(a, dtype=np.float64, order="C")
    if copy and out is a:
        out = out.copy()
    return out




class _ScalarImage:
    """Dense float raster plus validity mask; immutable after construction.

    Pixels whose value is non-finite (or non-positive, for the subclasses
    that require positivity) are forced invalid on construction, so the
    class invariants hold no matter what mask the caller supplied.
    """

    _requires_positive = True

    def __init__(self, values, valid=None, copy=True):
        values = _as_f64(values, copy)
        if values.ndim != 2:
            raise ValueError(f"expected a 2-d raster, got shape {values.shape}")
        with np.errstate(invalid="ignore"):
            mask = np.isfinite(values)
            if self._requires_positive:
                mask &= values > 0
        if valid is not None:
            given = np.asarray(valid, dtype=bool)
            if given.shape != values.shape:
                raise ValueError("valid mask shape must match values")
            mask &= given
        self.values = _readonly(values)
        self.valid = _readonly(mask)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def valid_count(self) -> int:
        return int(self.valid.sum())


class DepthImage(_ScalarImage):
    """Per-pixel depth z in meters; valid pixels are finite and > 0."""


class InverseDepthImage(_ScalarImage):
    """Per-pixel 1/z in 1/meters; valid pixels are finite and > 0."""


class DisparityImage(_ScalarImage):
    """Per-pixel stereo disparity in pixels; valid pixels are finite and > 0.

    Disparity is a positively scaled inverse depth (the scale is the
    focal-length times baseline product); the estimators are exactly
    invariant to that scale, so disparity can be consumed without knowing it.
    """


class NormalMap:
    """Per-pixel unit surface normals with a validity mask.

    Valid pixels must be unit length within ``UNIT_NORM_ATOL``.  The
    camera-facing convention (``n_z <= 0``) holds wherever the producing
    geometry is well posed -- see :func:`convention_violations` for a check;
    grazing or heavily perturbed pixels may legitimately land on the other
    side of the horizon, so it is not a construction-time error.
    """

    def __init__(self, values, valid=None, copy=True):
        values = _as_f64(values, copy)
        if values.ndim != 3 or values.shape[2] != 3:
            raise ValueError(f"expected an (H, W, 3) array, got shape {values.shape}")
        norm_sq = np.einsum("...i,...i->...", values, values)
        mask = np.isfinite(norm_sq)
        if valid is not None:
            given = np.asarray(valid, dtype=bool)
            if given.shape != values.shape[:2]:
                raise ValueError("valid mask shape must match values")
            mask &= given
        # |norm - 1| <= atol checked on the squared norm to skip the sqrt
        deviation = np.abs(np.where(mask, norm_sq, 1.0) - 1.0)
        if float(deviation.max(initial=0.0)) > UNIT_NORM_ATOL * (2.0 + UNIT_NORM_ATOL):
            raise ValueError(
                f"valid normals must be unit length within {UNIT_NORM_ATOL:g}"
            )
        self.values = _readonly(values)
        self.valid = _readonly(mask)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape[:2]

    def valid_count(self) -> int:
        return int(self.valid.sum())

    def convention_violations(self) -> int:
        """Count valid pixels that break the camera-facing sign convention."""
        nx, ny, nz = (self.values[..., i] for i in range(3))
        bad = nz > 0
        tie = nz == 0
        bad |= tie & (ny > 0)
        bad |= tie & (ny == 0) & (nx < 0)
        return int((bad & self.valid).sum())


def back_project(u, v, z, intrinsics: CameraIntrinsics):
    """Lift pixel coordinates (u, v) at depth z to a camera-frame 3D point.

    Accepts scalars or broadcastable arrays; returns an array with a
    trailing axis of length 3.  Raises on non-finite or non-positive depth.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)) or not np.all(z > 0):
        raise ValueError("depth must be finite and positive")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = (u - intrinsics.u0) * z / intrinsics.fx
    y = (v - intrinsics.v0) * z / intrinsics.fy
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def project(point, intrinsics: CameraIntrinsics):
    """Project camera-frame 3D points to pixel coordinates (u, v)."""
    p = np.asarray(point, dtype=np.float64)
    z = p[..., 2]
    if not np.all(np.isfinite(z)) or not np.all(z > 0):
        raise ValueError("points must have finite positive z")
    u = intrinsics.u0 + intrinsics.fx * p[..., 0] / z
    v = intrinsics.v0 + intrinsics.fy * p[..., 1] / z
    return u, v


def ray_grid(intrinsics: CameraIntrinsics):
    """Per-column and per-row ray slopes ((u-u0)/fx, (v-v0)/fy).

    The returned 1-d vectors broadcast to the tangent of the viewing angle
    of each pixel center; the ray through pixel (u, v) is (ru[u], rv[v], 1).
    """
    ru = (np.arange(intrinsics.width, dtype=np.float64) - intrinsics.u0) / intrinsics.fx
    rv = (np.arange(intrinsics.height, dtype=np.float64) - intrinsics.v0) / intrinsics.fy
    return ru, rv


def to_inverse_depth(depth: DepthImage) -> InverseDepthImage:
    """Map valid depths z to 1/z; invalid pixels stay invalid."""
    out = np.full(depth.shape, np.nan)
    np.divide(1.0, depth.values, out=out, where=depth.valid)
    return InverseDepthImage(out, depth.valid, copy=False)


def inverse_to_depth(inv: InverseDepthImage) -> DepthImage:
    """Map valid inverse depths back to depth; invalid pixels stay invalid."""
    out = np.full(inv.shape, np.nan)
    np.divide(1.0, inv.values, out=out, where=inv.valid)
    return DepthImage(out, inv.valid, copy=False)


def disparity_as_inverse_depth(disparity: DisparityImage) -> InverseDepthImage:
    """Reinterpret disparity as inverse depth, values copied verbatim.

    The unknown positive scale between disparity and true 1/z cancels in
    every candidate normalization downstream, so the resulting normal maps
    are identical to the metric ones.
    """
    return InverseDepthImage(disparity.values, disparity.valid)


def orient_toward_camera(normal, point):
    """Return the unit representative of +-normal that faces the camera.

    The sign is chosen so the dot product with the observed point is
    negative.  An exact tie (the surface seen edge-on) falls back to the
    deterministic component convention n_z <= 0, then n_y <= 0, then
    n_x >= 0.
    """
    n = np.asarray(normal, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(n)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("cannot orient a zero or non-finite vector")
    n = n / norm
    q = np.asarray(point, dtype=np.float64).reshape(3)
    d = float(n @ q)
    if d > 0:
        return -n
    if d == 0:
        if n[2] > 0 or (n[2] == 0 and (n[1] > 0 or (n[1] == 0 and n[0] < 0))):
            return -n
    return n
