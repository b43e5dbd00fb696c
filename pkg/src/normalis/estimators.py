"""Normal-map estimators: the closed-form axial method and its baselines.

The axial estimator ("sne+") treats candidate normals as undirected axes.
Writing a candidate as (A_i, nz_i) = (sin t_i, cos t_i) along the shared
azimuth, the inclination is chosen to maximize the concentration objective

    F(t) = sum_i (A_i sin t + nz_i cos t)^2
         = const + (R/2) cos(2t - 2t*)          (doubled-angle identity)

so the maximizer has the closed form t* = atan2(S, C) / 2 lifted to
[0, pi), with S = 2 sum A_i nz_i and C = sum (nz_i^2 - A_i^2).  Because F
is quadratic in the candidates it is blind to their signs, which is what
makes the method immune to the >90-degree ambiguity that breaks averaging
baselines near creases and occlusions.

Baselines:

  - "sne":  flip every division-form candidate to the halfspace of the
    first one, average, normalize (embodies the all-pairs-within-90-degrees
    hypothesis and its failure mode near ambiguities)
  - "3f2n-mean" / "3f2n-median": mean or median filter over the raw
    division-form nz candidates, assembled with the scaled gradient
  - "planepca": smallest principal component of the back-projected points
    in a square window
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _pykernels
from .candidates import (
    EPS_CANDIDATE,
    EPS_DZ,
    EPS_GRADIENT,
    Neighborhood,
    PixelCandidates,
    candidates_at,
)
from .geometry import (
    CameraIntrinsics,
    DepthImage,
    DisparityImage,
    InverseDepthImage,
    NormalMap,
    back_project,
    inverse_to_depth,
    orient_toward_camera,
    ray_grid,
    to_inverse_depth,
)
from .gradients import CENTRAL_DIFFERENCE, GradientKernel, compute_gradients

__all__ = [
    "ESTIMATOR_NAMES",
    "EstimatorConfig",
    "InclinationSolution",
    "inclination_objective",
    "axial_optimal_inclination",
    "grid_search_inclination",
    "estimate_normals",
    "estimate_normals_reference",
    "plane_pca_normal",
]

ESTIMATOR_NAMES = ("sne+", "sne", "3f2n-mean", "3f2n-median", "planepca")


@dataclass(frozen=True)
class EstimatorConfig:
    """Everything that selects and parameterizes a normal estimator."""

    estimator: str = "sne+"
    kernel: GradientKernel = CENTRAL_DIFFERENCE
    neighborhood: Neighborhood = field(default_factory=Neighborhood.ring)
    pca_window: int = 5
    eps_g: float = EPS_GRADIENT
    eps_v: float = EPS_CANDIDATE
    eps_z: float = EPS_DZ
    backend: str | None = None  # None = best available kernel backend

    def __post_init__(self):
        if self.estimator not in ESTIMATOR_NAMES:
            raise ValueError(
                f"unknown estimator {self.estimator!r}; choose from {ESTIMATOR_NAMES}"
            )
        if self.pca_window < 3 or self.pca_window % 2 == 0:
            raise ValueError("pca_window must be odd and >= 3")


@dataclass(frozen=True)
class InclinationSolution:
    """Optimal inclination in [0, pi], its branch index, and the objective."""

    theta: float
    branch: int
    objective: float


def inclination_objective(theta, a: np.ndarray, nz: np.ndarray):
    """Concentration objective sum((A sin t + nz cos t)^2), vectorized in t."""
    t = np.asarray(theta, dtype=np.float64)
    proj = a * np.sin(t)[..., None] + nz * np.cos(t)[..., None]
    return np.sum(proj * proj, axis=-1)


def _closed_form_theta(a: np.ndarray, nz: np.ndarray) -> float:
    s = 2.0 * float(np.sum(a * nz))
    c = float(np.sum(nz * nz - a * a))
    theta = 0.5 * math.atan2(s, c)
    if theta < 0.0:
        theta += math.pi
    return theta


def axial_optimal_inclination(c: PixelCandidates) -> InclinationSolution:
    """Inclination that maximizes candidate concentration, in closed form.

    The doubled-angle construction theta = atan2(S, C)/2 lifted to [0, pi)
    is the production path; the branch index reported alongside is the one
    an arctan-plus-half-pi two-branch construction would pick, and the two
    agree to rounding (see the tests for the cross-check).
    """
    if c.count == 0:
        raise ValueError("cannot optimize over an empty candidate set")
    theta = _closed_form_theta(c.a, c.nz)
    objective = float(inclination_objective(theta, c.a, c.nz))
    # branch relative to the arctan principal value in (-pi/4, pi/4]
    s = 2.0 * float(np.sum(c.a * c.nz))
    d = float(np.sum(c.nz * c.nz - c.a * c.a))
    if d != 0.0:
        principal = 0.5 * math.atan(s / d)
    else:
        principal = math.copysign(math.pi / 4.0, s) if s != 0.0 else 0.0
    base = principal % math.pi
    dist0 = min(abs(theta - base), math.pi - abs(theta - base))
    alt = (principal + math.pi / 2.0) % math.pi
    dist1 = min(abs(theta - alt), math.pi - abs(theta - alt))
    branch = 0 if dist0 <= dist1 else 1
    return InclinationSolution(theta=theta, branch=branch, objective=objective)


def grid_search_inclination(c: PixelCandidates, step: float = 1e-3) -> float:
    """Brute-force argmax of the concentration objective over [0, pi].

    Independent oracle for :func:`axial_optimal_inclination`; ties resolve
    to the smallest angle.
    """
    if not 0.0 < step <= 0.01:
        raise ValueError("step must be in (0, 0.01]")
    if c.count == 0:
        raise ValueError("cannot optimize over an empty candidate set")
    n = int(math.floor(math.pi / step)) + 1
    thetas = np.arange(n, dtype=np.float64) * step
    values = inclination_objective(thetas, c.a, c.nz)
    return float(thetas[int(np.argmax(values))])


def plane_pca_normal(points) -> np.ndarray:
    """Unit normal of the best-fit plane through >= 3 points, camera-oriented.

    Smallest-eigenvalue eigenvector of the centered covariance; degenerate
    (collinear or too few) point sets raise.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < 3:
        raise ValueError("plane fit needs at least 3 points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    scale = float(eigvals[-1])
    if scale <= 0.0 or eigvals[1] <= 1e-12 * scale:
        raise ValueError("degenerate point set: rank < 2")
    return orient_toward_camera(eigvecs[:, 0], centroid)


def _resolve_depth(image):
    """Return (depth_values, inverse_image, valid) for any accepted input.

    Disparity is reinterpreted as inverse depth; the positive scale it
    carries cancels in the candidate normalization downstream.
    """
    if isinstance(image, DepthImage):
        inv = to_inverse_depth(image)
        return image.values, inv, inv.valid
    if isinstance(image, DisparityImage):
        inv = InverseDepthImage(image.values, image.valid)
        return inverse_to_depth(inv).values, inv, inv.valid
    if isinstance(image, InverseDepthImage):
        return inverse_to_depth(image).values, image, image.valid
    raise TypeError(f"unsupported image type {type(image).__name__}")


def estimate_normals(image, intrinsics: CameraIntrinsics,
                     config: EstimatorConfig | None = None) -> NormalMap:
    """Estimate a camera-facing unit normal map from depth or disparity.

    Per-pixel failures (no usable neighbors, degenerate windows) invalidate
    the pixel and never abort the run; frontoparallel pixels yield
    (0, 0, -1).
    """
    if config is None:
        config = EstimatorConfig()
    if image.shape != intrinsics.shape:
        raise ValueError(
            f"image shape {image.shape} does not match intrinsics "
            f"{intrinsics.shape}"
        )
    z, inverse, valid = _resolve_depth(image)
    if config.estimator == "planepca":
        return _estimate_plane_pca(z, valid, intrinsics, config)
    grads = compute_gradients(inverse, config.kernel, backend=config.backend)
    if config.estimator == "sne+":
        from . import kernels

        normals, out_valid, _ = kernels.sne_plus_normals(
            np.where(valid, z, 0.0),
            valid,
            grads.gu,
            grads.gv,
            grads.valid,
            intrinsics.fx,
            intrinsics.fy,
            intrinsics.u0,
            intrinsics.v0,
            config.neighborhood.as_array(),
            config.eps_g,
            config.eps_v,
            backend=config.backend,
        )
        return NormalMap(normals, out_valid, copy=False)
    if config.estimator == "sne":
        return _estimate_sign_aligned(z, valid, grads, intrinsics, config)
    return _estimate_filtered(z, valid, grads, intrinsics, config)


def _division_candidate_volume(z, valid, grads, intrinsics, config):
    """Per-offset raw division-form nz, shape (H, W, k); NaN marks unusable.

    Shared by the sign-aligned and filtered baselines.  Also returns the
    scaled gradient (p, q) and the live (non-frontoparallel, valid) mask.
    """
    h, w = z.shape
    guv = np.where(grads.valid, grads.gu, 0.0)
    gvv = np.where(grads.valid, grads.gv, 0.0)
    p = intrinsics.fx * guv
    q = intrinsics.fy * gvv
    base = valid & grads.valid
    fronto = base & (np.abs(p) < config.eps_g) & (np.abs(q) < config.eps_g)
    live = base & ~fronto
    cu = np.arange(w, dtype=np.float64) - intrinsics.u0
    cv = (np.arange(h, dtype=np.float64) - intrinsics.v0)[:, None]
    zq = np.where(valid, z, 0.0)
    offsets = config.neighborhood.offsets
    raw_nz = np.full((h, w, len(offsets)), np.nan)
    for i, (du, dv) in enumerate(offsets):
        zn, nok = _pykernels.shifted(zq, valid, du, dv)
        fxdx = (cu + du) * zn - cu * zq
        fydy = (cv + dv) * zn - cv * zq
        dz = zn - zq
        ok = live & nok & (np.abs(dz) >= config.eps_z)
        nz = -(fxdx * guv + fydy * gvv) / np.where(ok, dz, 1.0)
        raw_nz[..., i] = np.where(ok, nz, np.nan)
    return raw_nz, p, q, live, fronto


def _orient_field(nx, ny, nz, intrinsics):
    """Vectorized camera-facing orientation with the component tie-break."""
    ru, rv = ray_grid(intrinsics)
    dot = nx * ru + ny * rv[:, None] + nz
    flip = dot > 0
    tie = dot == 0
    flip |= tie & ((nz > 0) | ((nz == 0) & ((ny > 0) | ((ny == 0) & (nx < 0)))))
    sgn = np.where(flip, -1.0, 1.0)
    return np.stack([nx * sgn, ny * sgn, nz * sgn], axis=-1)


def _assemble(nx, ny, nz, out_valid, fronto, intrinsics):
    normals = _orient_field(nx, ny, nz, intrinsics)
    normals[fronto] = (0.0, 0.0, -1.0)
    normals[~out_valid] = 0.0
    return NormalMap(normals, out_valid, copy=False)


def _estimate_filtered(z, valid, grads, intrinsics, config):
    """Mean/median filter over raw division-form nz ("3f2n-*")."""
    raw_nz, p, q, live, fronto = _division_candidate_volume(
        z, valid, grads, intrinsics, config
    )
    reduce_ = np.nanmean if config.estimator == "3f2n-mean" else np.nanmedian
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        phi_z = reduce_(raw_nz, axis=2)
    usable = live & np.isfinite(phi_z)
    norm = np.sqrt(p * p + q * q + np.where(usable, phi_z, 0.0) ** 2)
    norm = np.where(norm > 0, norm, 1.0)
    nx = np.where(usable, p / norm, 0.0)
    ny = np.where(usable, q / norm, 0.0)
    nz = np.where(usable, np.where(usable, phi_z, 0.0) / norm, -1.0)
    out_valid = fronto | usable
    return _assemble(nx, ny, nz, out_valid, fronto, intrinsics)


def _estimate_sign_aligned(z, valid, grads, intrinsics, config):
    """Flip-to-first averaging of unit division-form candidates ("sne")."""
    raw_nz, p, q, live, fronto = _division_candidate_volume(
        z, valid, grads, intrinsics, config
    )
    h, w, k = raw_nz.shape
    ok = np.isfinite(raw_nz)
    # unit candidates: (p, q, nz)/norm per offset
    norm = np.sqrt(p[..., None] ** 2 + q[..., None] ** 2 + np.where(ok, raw_nz, 0.0) ** 2)
    norm = np.where(ok & (norm > 0), norm, np.nan)
    cx = p[..., None] / norm
    cy = q[..., None] / norm
    cz = np.where(ok, raw_nz, 0.0) / norm
    # align every candidate with the first usable one
    first = np.argmax(ok, axis=2)
    take = lambda c: np.take_along_axis(c, first[..., None], axis=2)[..., 0]
    rx, ry, rz = take(cx), take(cy), take(cz)
    dots = cx * rx[..., None] + cy * ry[..., None] + cz * rz[..., None]
    sgn = np.where(dots < 0, -1.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mx = np.nanmean(cx * sgn, axis=2)
        my = np.nanmean(cy * sgn, axis=2)
        mz = np.nanmean(cz * sgn, axis=2)
    mnorm = np.sqrt(mx * mx + my * my + mz * mz)
    usable = live & ok.any(axis=2) & np.isfinite(mnorm) & (mnorm > 0)
    mnorm = np.where(usable, mnorm, 1.0)
    nx = np.where(usable, mx / mnorm, 0.0)
    ny = np.where(usable, my / mnorm, 0.0)
    nz = np.where(usable, mz / mnorm, -1.0)
    out_valid = fronto | usable
    return _assemble(nx, ny, nz, out_valid, fronto, intrinsics)


def _estimate_plane_pca(z, valid, intrinsics, config):
    """Smallest principal component of back-projected window points."""
    h, w = z.shape
    win = config.pca_window
    r = win // 2
    ru, rv = ray_grid(intrinsics)
    zq = np.where(valid, z, 0.0)
    x = ru[None, :] * zq
    y = rv[:, None] * zq
    out = np.zeros((h, w, 3))
    out_valid = np.zeros((h, w), dtype=bool)
    if h < win or w < win:
        return NormalMap(out, out_valid, copy=False)
    stack = np.stack([x, y, zq], axis=-1)
    from numpy.lib.stride_tricks import sliding_window_view

    # chunk rows to keep the materialized window tensor small
    chunk = max(1, int(4e6 // (w * win * win)))
    for r0 in range(r, h - r, chunk):
        r1 = min(r0 + chunk, h - r)
        rows = slice(r0 - r, r1 + r)
        wins = sliding_window_view(stack[rows], (win, win), axis=(0, 1))
        wmask = sliding_window_view(valid[rows], (win, win), axis=(0, 1))
        pts = wins.reshape(*wins.shape[:2], 3, win * win)
        m = wmask.reshape(*wmask.shape[:2], 1, win * win).astype(np.float64)
        cnt = m[:, :, 0, :].sum(axis=-1)
        cnt_safe = np.maximum(cnt, 1.0)
        mean = (pts * m).sum(axis=-1) / cnt_safe[..., None]
        centered = (pts - mean[..., None]) * m
        cov = centered @ centered.transpose(0, 1, 3, 2)
        eigvals, eigvecs = np.linalg.eigh(cov)
        normal = eigvecs[..., :, 0]
        scale = eigvals[..., 2]
        good = (
            valid[r0:r1, r : w - r]
            & (cnt >= 3)
            & (scale > 0)
            & (eigvals[..., 1] > 1e-12 * scale)
        )
        block = slice(r0, r1)
        out[block, r : w - r] = normal
        out_valid[block, r : w - r] = good
    nx, ny, nz = out[..., 0], out[..., 1], out[..., 2]
    normals = _orient_field(nx, ny, nz, intrinsics)
    normals[~out_valid] = 0.0
    return NormalMap(normals, out_valid, copy=False)


def estimate_normals_reference(image, intrinsics: CameraIntrinsics,
                               config: EstimatorConfig | None = None) -> NormalMap:
    """Slow per-pixel composition of the axial pipeline, for cross-checks.

    Builds candidates pixel by pixel and solves each inclination with
    :func:`axial_optimal_inclination`; the production kernel must agree
    with this path to rounding.
    """
    if config is None:
        config = EstimatorConfig()
    if config.estimator != "sne+":
        raise ValueError("the reference path covers the axial estimator only")
    z, inverse, valid = _resolve_depth(image)
    depth = DepthImage(np.where(valid, z, np.nan), valid)
    grads = compute_gradients(inverse, config.kernel)
    h, w = depth.shape
    out = np.zeros((h, w, 3))
    out_valid = np.zeros((h, w), dtype=bool)
    for v in range(h):
        for u in range(w):
            if not (depth.valid[v, u] and grads.valid[v, u]):
                continue
            try:
                cands = candidates_at(
                    (u, v), depth, grads, intrinsics, config.neighborhood,
                    eps_g=config.eps_g, eps_v=config.eps_v,
                )
            except ValueError:
                continue
            if cands.frontoparallel:
                out[v, u] = (0.0, 0.0, -1.0)
                out_valid[v, u] = True
                continue
            sol = axial_optimal_inclination(cands)
            n = np.array([
                math.sin(sol.theta) * math.cos(cands.phi),
                math.sin(sol.theta) * math.sin(cands.phi),
                math.cos(sol.theta),
            ])
            q = back_project(u, v, depth.values[v, u], intrinsics)
            out[v, u] = orient_toward_camera(n, q)
            out_valid[v, u] = True
    return NormalMap(out, out_valid, copy=False)
