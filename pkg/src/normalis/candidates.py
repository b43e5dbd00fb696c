"""Per-pixel surface-normal candidate construction.

Every neighbor p_i of an observed point q contributes one candidate normal
that shares the pixel's gradient-derived tangential direction but has its
own z component.  Candidates are built in a homogeneous (dz-scaled) form

    v_i = (fx*gu*dz_i,  fy*gv*dz_i,  -(fx*dx_i*gu + fy*dy_i*gv))

which is a scalar multiple of the division form whenever dz_i != 0 and
stays finite when dz_i == 0, where the axis degenerates to (0, 0, +-1).
Sign-sensitive consumers use :func:`division_candidates_at`, which keeps
the division form and guards |dz_i| instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, DepthImage, back_project
from .gradients import GradientField

__all__ = [
    "EPS_GRADIENT",
    "EPS_CANDIDATE",
    "EPS_DZ",
    "Neighborhood",
    "PixelCandidates",
    "azimuth",
    "is_frontoparallel",
    "candidates_at",
    "division_candidates_at",
]

# Degeneracy cut-offs. Below EPS_GRADIENT (per component of the scaled
# gradient, in 1/m) a pixel counts as frontoparallel; candidates whose
# homogeneous norm falls under EPS_CANDIDATE are dropped; division-form
# consumers skip neighbors with |dz| < EPS_DZ meters.
EPS_GRADIENT = 1e-12
EPS_CANDIDATE = 1e-12
EPS_DZ = 1e-9


@dataclass(frozen=True)
class Neighborhood:
    """Integer pixel displacements defining the neighbor set P of a pixel."""

    offsets: tuple

    def __post_init__(self):
        offs = tuple((int(du), int(dv)) for du, dv in self.offsets)
        if not offs:
            raise ValueError("neighborhood must be nonempty")
        if (0, 0) in offs:
            raise ValueError("neighborhood must not contain (0, 0)")
        if len(set(offs)) != len(offs):
            raise ValueError("neighborhood offsets must be unique")
        object.__setattr__(self, "offsets", offs)

    @classmethod
    def ring(cls, radius: int = 1) -> "Neighborhood":
        """Chebyshev ring: all offsets with max(|du|, |dv|) == radius.

        radius 1 is the 8-connected default.  Offsets are ordered row-major
        (by dv, then du) so "first neighbor" is deterministic.
        """
        if radius < 1:
            raise ValueError("radius must be >= 1")
        offs = [
            (du, dv)
            for dv in range(-radius, radius + 1)
            for du in range(-radius, radius + 1)
            if max(abs(du), abs(dv)) == radius
        ]
        return cls(tuple(offs))

    @property
    def k(self) -> int:
        return len(self.offsets)

    def as_array(self) -> np.ndarray:
        return np.array(self.offsets, dtype=np.int64)


@dataclass(frozen=True)
class PixelCandidates:
    """Azimuth plus the unit axial candidates (A_i, nz_i) of one pixel.

    A_i is the signed magnitude of candidate i along the shared azimuth
    direction and nz_i its z component; each pair satisfies
    A_i^2 + nz_i^2 = 1.  ``frontoparallel`` marks pixels whose scaled
    gradient vanished (empty candidate list, azimuth 0 by convention).
    """

    phi: float
    a: np.ndarray
    nz: np.ndarray
    frontoparallel: bool = False

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=np.float64))
        nz = np.atleast_1d(np.asarray(self.nz, dtype=np.float64))
        if a.shape != nz.shape or a.ndim != 1:
            raise ValueError("a and nz must be 1-d arrays of equal length")
        if a.size and np.max(np.abs(a * a + nz * nz - 1.0)) > 1e-9:
            raise ValueError("candidates must be unit length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "nz", nz)

    @property
    def count(self) -> int:
        return self.a.size

    @classmethod
    def from_inclinations(cls, thetas, phi: float = 0.0) -> "PixelCandidates":
        """Build unit candidates (sin t, cos t) from inclination angles."""
        t = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
        return cls(phi=phi, a=np.sin(t), nz=np.cos(t))


def azimuth(g_u: float, g_v: float, intrinsics: CameraIntrinsics,
            eps_g: float = EPS_GRADIENT) -> float:
    """Azimuth of the normal's image-plane projection, in [0, 2*pi).

    Defined as atan2(fy*gv, fx*gu); 0 when both scaled components are
    below eps_g (the frontoparallel case).
    """
    p = intrinsics.fx * g_u
    q = intrinsics.fy * g_v
    if abs(p) < eps_g and abs(q) < eps_g:
        return 0.0
    phi = float(np.arctan2(q, p)) % (2.0 * np.pi)
    # a tiny negative angle can round up to exactly 2*pi after the modulo
    return 0.0 if phi >= 2.0 * np.pi else phi


def is_frontoparallel(g_u: float, g_v: float, intrinsics: CameraIntrinsics,
                      eps_g: float = EPS_GRADIENT) -> bool:
    """True when the scaled gradient vanishes and no azimuth is defined."""
    return abs(intrinsics.fx * g_u) < eps_g and abs(intrinsics.fy * g_v) < eps_g


def _neighbor_deltas(q_pixel, depth, intrinsics, neighborhood):
    """Back-projected displacement p_i - q for each valid neighbor."""
    u, v = q_pixel
    zq = depth.values[v, u]
    pq = back_project(u, v, zq, intrinsics)
    deltas = []
    for du, dv in neighborhood.offsets:
        un, vn = u + du, v + dv
        if not (0 <= un < depth.width and 0 <= vn < depth.height):
            continue
        if not depth.valid[vn, un]:
            continue
        pn = back_project(un, vn, depth.values[vn, un], intrinsics)
        deltas.append(pn - pq)
    return deltas


def candidates_at(
    q_pixel,
    depth: DepthImage,
    grads: GradientField,
    intrinsics: CameraIntrinsics,
    neighborhood: Neighborhood | None = None,
    eps_g: float = EPS_GRADIENT,
    eps_v: float = EPS_CANDIDATE,
) -> PixelCandidates:
    """Unit axial candidates at pixel (u, v), one per usable neighbor.

    Requires a valid pixel with a valid gradient; raises if no neighbor is
    usable.  Frontoparallel pixels return the flag and no candidates.
    """
    u, v = q_pixel
    if not depth.valid[v, u]:
        raise ValueError(f"pixel ({u}, {v}) is invalid")
    if not grads.valid[v, u]:
        raise ValueError(f"gradient at ({u}, {v}) is invalid")
    if neighborhood is None:
        neighborhood = Neighborhood.ring(1)
    g_u = grads.gu[v, u]
    g_v = grads.gv[v, u]
    phi = azimuth(g_u, g_v, intrinsics, eps_g)
    if is_frontoparallel(g_u, g_v, intrinsics, eps_g):
        return PixelCandidates(phi=0.0, a=[], nz=[], frontoparallel=True)
    p = intrinsics.fx * g_u
    q = intrinsics.fy * g_v
    cphi, sphi = np.cos(phi), np.sin(phi)
    a_list, nz_list = [], []
    deltas = _neighbor_deltas(q_pixel, depth, intrinsics, neighborhood)
    for dx, dy, dz in deltas:
        cand = np.array([p * dz, q * dz, -(p * dx + q * dy)])
        norm = np.linalg.norm(cand)
        if norm < eps_v:
            continue
        cand /= norm
        a_list.append(cand[0] * cphi + cand[1] * sphi)
        nz_list.append(cand[2])
    if not a_list:
        raise ValueError(f"pixel ({u}, {v}) has no usable neighbor")
    return PixelCandidates(phi=phi, a=a_list, nz=nz_list)


def division_candidates_at(
    q_pixel,
    depth: DepthImage,
    grads: GradientField,
    intrinsics: CameraIntrinsics,
    neighborhood: Neighborhood | None = None,
    eps_z: float = EPS_DZ,
):
    """Division-form candidates for sign-sensitive estimators.

    Returns (unit_vectors (k', 3), raw_nz (k',)): the unit candidate
    normals with the tangential part fixed to +(fx*gu, fy*gv), and the raw
    (unnormalized) z components.  Neighbors with |dz| < eps_z are skipped;
    the homogeneous form has no such singularity, which is why the axial
    estimator does not use this path.
    """
    u, v = q_pixel
    if neighborhood is None:
        neighborhood = Neighborhood.ring(1)
    p = intrinsics.fx * grads.gu[v, u]
    q = intrinsics.fy * grads.gv[v, u]
    vecs, raw = [], []
    for dx, dy, dz in _neighbor_deltas(q_pixel, depth, intrinsics, neighborhood):
        if abs(dz) < eps_z:
            continue
        nz = -(p * dx + q * dy) / dz
        cand = np.array([p, q, nz])
        norm = np.linalg.norm(cand)
        if norm == 0.0:
            continue
        vecs.append(cand / norm)
        raw.append(nz)
    return np.array(vecs).reshape(-1, 3), np.array(raw)
