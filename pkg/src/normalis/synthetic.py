"""Analytic scenes rendered to depth images with exact ground-truth normals.

Rays are cast through pixel centers at integer coordinates, so a plane's
rendered inverse depth is exactly affine in (u, v) -- the structural fact
the whole gradient pipeline rests on -- and plane recovery is limited only
by floating-point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, DepthImage, NormalMap, ray_grid

__all__ = [
    "PlaneScene",
    "SphereScene",
    "DihedralScene",
    "NoiseSpec",
    "plane_from_view",
    "render_depth",
    "ground_truth_normals",
    "surface_depth_at",
    "add_noise",
]


@dataclass(frozen=True)
class PlaneScene:
    """Plane n . q + offset = 0 with unit normal n.

    The normal is stored camera-facing (n . q < 0 on the plane, i.e.
    offset > 0); pixels whose ray does not hit the front side at positive
    depth render invalid, so steep planes may fill only part of the frame.
    """

    normal: tuple
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("plane normal must be a nonzero finite vector")
        n = n / norm
        d = float(self.offset) / norm
        if d == 0.0:
            raise ValueError("plane must not pass through the camera center")
        if d < 0.0:
            n, d = -n, -d
        object.__setattr__(self, "normal", tuple(n))
        object.__setattr__(self, "offset", d)

    @classmethod
    def through_point(cls, point, normal) -> "PlaneScene":
        point = np.asarray(point, dtype=np.float64)
        normal = np.asarray(normal, dtype=np.float64)
        return cls(tuple(normal), float(-normal @ point))


def plane_from_view(inclination: float, azimuth: float, depth_at_principal: float) -> PlaneScene:
    """Plane with the given normal angles passing through (0, 0, z0).

    ``inclination`` is the angle of the normal from the optical axis in
    radians (must stay below pi/2 so the principal pixel sees the plane).
    """
    if not 0.0 <= inclination < math.pi / 2:
        raise ValueError("inclination must be in [0, pi/2)")
    if depth_at_principal <= 0:
        raise ValueError("principal-point depth must be positive")
    n = np.array([
        math.sin(inclination) * math.cos(azimuth),
        math.sin(inclination) * math.sin(azimuth),
        math.cos(inclination),
    ])
    return PlaneScene.through_point((0.0, 0.0, depth_at_principal), n)


@dataclass(frozen=True)
class SphereScene:
    """Sphere fully in front of the camera; rays keep the near intersection."""

    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(x) for x in np.asarray(self.center, dtype=np.float64).reshape(3))
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if c[2] - self.radius <= 0:
            raise ValueError("sphere must lie entirely in front of the camera")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class DihedralScene:
    """Two planes split along an image-space line (the ridge).

    ``first`` governs pixels with coordinate < split on ``axis`` ("u" or
    "v"), ``second`` the rest.  The crease constructor joins the halves
    along a shared 3D line so depth is continuous across the ridge while
    the normal jumps -- the ambiguity case candidate-based estimators
    struggle with.
    """

    first: PlaneScene
    second: PlaneScene
    axis: str
    split: float

    def __post_init__(self):
        if self.axis not in ("u", "v"):
            raise ValueError("axis must be 'u' or 'v'")

    @classmethod
    def crease(cls, intrinsics: CameraIntrinsics, split_u: float, ridge_depth: float,
               opening_first: float, opening_second: float,
               ridge_tilt: float = 0.0) -> "DihedralScene":
        """Two planes meeting exactly along the ray line u = split_u.

        The ridge is the 3D line through (split_u, v0) at ``ridge_depth``
        with image-vertical direction (tilted by ``ridge_tilt`` in y per
        unit z); each half-plane is the ridge line swept at its opening
        angle, measured around the ridge direction.
        """
        a = (split_u - intrinsics.u0) / intrinsics.fx
        q0 = ridge_depth * np.array([a, 0.0, 1.0])
        t = np.array([a, ridge_tilt, 1.0])
        t = t / np.linalg.norm(t)
        # orthonormal frame around the ridge direction
        h = np.array([1.0, 0.0, 0.0]) - t[0] * t
        h = h / np.linalg.norm(h)
        g = np.cross(t, h)
        planes = []
        for ang in (opening_first, opening_second):
            n = math.cos(ang) * h + math.sin(ang) * g
            planes.append(PlaneScene.through_point(q0, n))
        return cls(planes[0], planes[1], "u", float(split_u))


@dataclass(frozen=True)
class NoiseSpec:
    """Seeded Gaussian depth noise, absolute (meters) or fraction-of-depth."""

    sigma: float
    mode: str = "fraction"
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.mode not in ("absolute", "fraction"):
            raise ValueError("mode must be 'absolute' or 'fraction'")


def _plane_depth(plane: PlaneScene, ru, rv):
    """Depth of the ray (ru, rv, 1) hitting the plane; NaN when behind."""
    n = np.asarray(plane.normal)
    denom = n[0] * ru + n[1] * rv + n[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = -plane.offset / denom
    return np.where(np.isfinite(z) & (z > 0), z, np.nan)


def _sphere_depth(sphere: SphereScene, ru, rv):
    """Near-intersection depth of the ray (ru, rv, 1) with the sphere."""
    c = np.asarray(sphere.center)
    ru, rv = np.broadcast_arrays(ru, rv)
    w2 = ru * ru + rv * rv + 1.0
    wc = ru * c[0] + rv * c[1] + c[2]
    disc = wc * wc - w2 * (c @ c - sphere.radius**2)
    with np.errstate(invalid="ignore"):
        z = (wc - np.sqrt(disc)) / w2
    return np.where((disc >= 0) & (z > 0), z, np.nan)


def surface_depth_at(scene, intrinsics: CameraIntrinsics, u, v):
    """Ray-cast depth at (fractional) pixel coordinates; NaN where no hit."""
    ru = (np.asarray(u, dtype=np.float64) - intrinsics.u0) / intrinsics.fx
    rv = (np.asarray(v, dtype=np.float64) - intrinsics.v0) / intrinsics.fy
    if isinstance(scene, PlaneScene):
        return _plane_depth(scene, ru, rv)
    if isinstance(scene, SphereScene):
        return _sphere_depth(scene, ru, rv)
    if isinstance(scene, DihedralScene):
        za = _plane_depth(scene.first, ru, rv)
        zb = _plane_depth(scene.second, ru, rv)
        coord = np.asarray(u if scene.axis == "u" else v, dtype=np.float64)
        return np.where(coord < scene.split, za, zb)
    raise TypeError(f"unsupported scene type {type(scene).__name__}")


def render_depth(scene, intrinsics: CameraIntrinsics) -> DepthImage:
    """Per-pixel depth of the ray-scene intersection through pixel centers.

    Raises when nothing is visible (scene behind the camera); individual
    rays that miss the scene or exit behind it render invalid.
    """
    u = np.arange(intrinsics.width, dtype=np.float64)[None, :]
    v = np.arange(intrinsics.height, dtype=np.float64)[:, None]
    uu, vv = np.broadcast_arrays(u, v)
    z = surface_depth_at(scene, intrinsics, uu, vv)
    if not np.any(np.isfinite(z) & (z > 0)):
        raise ValueError("scene is not visible from the camera")
    return DepthImage(z, copy=False)


def ground_truth_normals(scene, intrinsics: CameraIntrinsics) -> NormalMap:
    """Analytic camera-facing normals wherever render_depth is valid."""
    depth = render_depth(scene, intrinsics)
    h, w = depth.shape
    out = np.zeros((h, w, 3))
    if isinstance(scene, PlaneScene):
        out[depth.valid] = scene.normal
    elif isinstance(scene, DihedralScene):
        u = np.arange(w)[None, :]
        v = np.arange(h)[:, None]
        coord = u if scene.axis == "u" else v
        left = np.broadcast_to(coord < scene.split, (h, w))
        out[depth.valid & left] = scene.first.normal
        out[depth.valid & ~left] = scene.second.normal
    elif isinstance(scene, SphereScene):
        ru, rv = ray_grid(intrinsics)
        z = np.where(depth.valid, depth.values, np.nan)
        c = np.asarray(scene.center)
        n = np.stack([ru[None, :] * z - c[0], rv[:, None] * z - c[1], z - c[2]], axis=-1)
        # outward sphere normals at near intersections already face the camera
        n /= scene.radius
        out[depth.valid] = n[depth.valid]
    else:
        raise TypeError(f"unsupported scene type {type(scene).__name__}")
    return NormalMap(out, depth.valid, copy=False)


def add_noise(depth: DepthImage, spec: NoiseSpec) -> DepthImage:
    """Additive seeded Gaussian noise on depth; perturbed z <= 0 goes invalid.

    Uses a counter-based generator so the draw is independent of any
    processing order.
    """
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    eps = rng.standard_normal(depth.shape)
    sigma = spec.sigma * depth.values if spec.mode == "fraction" else spec.sigma
    noisy = np.where(depth.valid, depth.values + sigma * eps, np.nan)
    return DepthImage(noisy, depth.valid, copy=False)
