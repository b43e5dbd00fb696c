"""Backend dispatch for the per-pixel hot kernels.

At import time the compiled extension (normalis._cykernels) is preferred;
if it is missing, or the NORMALIS_FORCE_FALLBACK environment variable is
set to a non-empty value, the pure numpy implementation takes over.  Both
backends compute the same expressions in the same order, so their outputs
agree to a few ulps; ``benchmarks/bench_backends.py`` compares their
speed.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:  # pragma: no cover - absence is environment-specific
    from . import _cykernels
except ImportError:  # pragma: no cover
    _cykernels = None

if os.environ.get("NORMALIS_FORCE_FALLBACK"):
    _cykernels = None

DEFAULT_BACKEND = "compiled" if _cykernels is not None else "numpy"

__all__ = [
    "DEFAULT_BACKEND",
    "available_backends",
    "stencil_gradients",
    "sne_plus_normals",
]


def available_backends():
    return ("compiled", "numpy") if _cykernels is not None else ("numpy",)


def _resolve(backend):
    name = backend or DEFAULT_BACKEND
    if name == "compiled":
        if _cykernels is None:
            raise RuntimeError(
                "compiled kernels are unavailable; build the extension or "
                "use backend='numpy'"
            )
        return name
    if name == "numpy":
        return name
    raise ValueError(f"unknown backend {backend!r}")


def _c2d(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _mask(a):
    return np.ascontiguousarray(a, dtype=bool).view(np.uint8)


def stencil_gradients(values, valid, sten_u, sten_v, footprint, backend=None):
    """Masked gradient-stencil correlation; see GradientKernel for layout."""
    if _resolve(backend) == "compiled":
        return _cykernels.stencil_gradients(
            _c2d(values), _mask(valid), _c2d(sten_u), _c2d(sten_v), _mask(footprint)
        )
    return _pykernels.stencil_gradients(
        np.asarray(values, dtype=np.float64),
        np.asarray(valid, dtype=bool),
        np.asarray(sten_u, dtype=np.float64),
        np.asarray(sten_v, dtype=np.float64),
        np.asarray(footprint, dtype=bool),
    )


def sne_plus_normals(z, zvalid, gu, gv, gvalid, fx, fy, u0, v0, offsets,
                     eps_g, eps_v, backend=None):
    """Whole-image closed-form axial normal estimation.

    Returns (normals (H, W, 3), valid, frontoparallel).  Per-pixel
    independent: partitioning the image into row slabs (with a halo
    covering the neighbor offsets) and stitching reproduces the full-frame
    result exactly.
    """
    offs = np.ascontiguousarray(offsets, dtype=np.int64)
    if _resolve(backend) == "compiled":
        return _cykernels.sne_plus_normals(
            _c2d(z), _mask(zvalid), _c2d(gu), _c2d(gv), _mask(gvalid),
            float(fx), float(fy), float(u0), float(v0), offs,
            float(eps_g), float(eps_v),
        )
    return _pykernels.sne_plus_normals(
        np.asarray(z, dtype=np.float64),
        np.asarray(zvalid, dtype=bool),
        np.asarray(gu, dtype=np.float64),
        np.asarray(gv, dtype=np.float64),
        np.asarray(gvalid, dtype=bool),
        float(fx), float(fy), float(u0), float(v0), offs,
        float(eps_g), float(eps_v),
    )
