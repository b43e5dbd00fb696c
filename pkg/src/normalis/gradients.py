"""Discrete gradient filtering of inverse-depth images.

Every stencil is normalized to unit effective step: filtering the affine
field a + b*u returns exactly b, so all kernels agree exactly on planar
(affine inverse-depth) surfaces and candidate directions never depend on
kernel gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import InverseDepthImage, _as_f64, _readonly

__all__ = [
    "GradientKernel",
    "GradientField",
    "CENTRAL_DIFFERENCE",
    "SOBEL",
    "PREWITT",
    "kernel_by_name",
    "compute_gradients",
]


@dataclass(frozen=True)
class GradientKernel:
    """A pair of correlation stencils for d/du and d/dv plus their footprint.

    ``horizontal[dv+r, du+r]`` is the weight applied to the pixel at offset
    (du, dv) when computing the u-derivative at the center (correlation, no
    stencil flip).  ``footprint`` marks the offsets that must be valid for
    the output pixel to be valid; it always includes the center.
    """

    name: str
    horizontal: np.ndarray
    vertical: np.ndarray
    footprint: np.ndarray

    def __post_init__(self):
        h = np.array(self.horizontal, dtype=np.float64)
        v = np.array(self.vertical, dtype=np.float64)
        fp = np.array(self.footprint, dtype=bool)
        if h.shape != v.shape or h.shape != fp.shape:
            raise ValueError("stencils and footprint must share one shape")
        if h.shape[0] != h.shape[1] or h.shape[0] % 2 != 1:
            raise ValueError("stencils must be square with odd extent")
        r = h.shape[0] // 2
        du = np.arange(-r, r + 1)[None, :]
        dv = np.arange(-r, r + 1)[:, None]
        for sten, slope in ((h, du), (v, dv)):
            if abs(sten.sum()) > 1e-12:
                raise ValueError("stencil coefficients must sum to zero")
            if abs((sten * slope).sum() - 1.0) > 1e-12:
                raise ValueError("stencil must have unit response to a unit ramp")
        if not fp[r, r]:
            raise ValueError("footprint must include the center pixel")
        if (((h != 0) | (v != 0)) & ~fp).any():
            raise ValueError("footprint must cover every nonzero coefficient")
        object.__setattr__(self, "horizontal", _readonly(h))
        object.__setattr__(self, "vertical", _readonly(v))
        object.__setattr__(self, "footprint", _readonly(fp))

    @property
    def radius(self) -> int:
        return self.horizontal.shape[0] // 2


def _plus_footprint():
    fp = np.zeros((3, 3), dtype=bool)
    fp[1, :] = True
    fp[:, 1] = True
    return fp


CENTRAL_DIFFERENCE = GradientKernel(
    name="central",
    horizontal=[[0, 0, 0], [-0.5, 0, 0.5], [0, 0, 0]],
    vertical=[[0, -0.5, 0], [0, 0, 0], [0, 0.5, 0]],
    footprint=_plus_footprint(),
)

SOBEL = GradientKernel(
    name="sobel",
    horizontal=np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]) / 8.0,
    vertical=np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]]) / 8.0,
    footprint=np.ones((3, 3), dtype=bool),
)

PREWITT = GradientKernel(
    name="prewitt",
    horizontal=np.array([[-1, 0, 1], [-1, 0, 1], [-1, 0, 1]]) / 6.0,
    vertical=np.array([[-1, -1, -1], [0, 0, 0], [1, 1, 1]]) / 6.0,
    footprint=np.ones((3, 3), dtype=bool),
)

_KERNELS = {k.name: k for k in (CENTRAL_DIFFERENCE, SOBEL, PREWITT)}


def kernel_by_name(name: str) -> GradientKernel:
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(
            f"unknown gradient kernel {name!r}; choose from {sorted(_KERNELS)}"
        ) from None


class GradientField:
    """Per-pixel (d(1/z)/du, d(1/z)/dv) with a validity mask.

    A pixel is valid only if every pixel under the stencil footprint is
    valid and inside the image: the mask is the erosion of the input mask
    by the footprint, with no border extrapolation.
    """

    def __init__(self, gu, gv, valid, copy=True):
        gu = _as_f64(gu, copy)
        gv = _as_f64(gv, copy)
        given = np.asarray(valid, dtype=bool)
        if gu.shape != gv.shape or gu.shape != given.shape or gu.ndim != 2:
            raise ValueError("gu, gv and valid must share one 2-d shape")
        mask = np.isfinite(gu + gv) & given
        self.gu = _readonly(gu)
        self.gv = _readonly(gv)
        self.valid = _readonly(mask)

    @property
    def height(self):
        return self.gu.shape[0]

    @property
    def width(self):
        return self.gu.shape[1]

    @property
    def shape(self):
        return self.gu.shape


def compute_gradients(
    img: InverseDepthImage,
    kernel: GradientKernel = CENTRAL_DIFFERENCE,
    backend: str | None = None,
) -> GradientField:
    """Filter an inverse-depth image into a gradient field.

    Border pixels whose stencil exits the image are invalid, as are pixels
    whose footprint touches an invalid input pixel.
    """
    extent = kernel.horizontal.shape[0]
    if img.height < extent or img.width < extent:
        raise ValueError(
            f"image {img.shape} smaller than the {extent}x{extent} stencil"
        )
    from . import kernels

    gu, gv, gvalid = kernels.stencil_gradients(
        img.values,
        img.valid,
        kernel.horizontal,
        kernel.vertical,
        kernel.footprint,
        backend=backend,
    )
    # kernel outputs are fresh arrays; adopt them without copying
    return GradientField(gu, gv, gvalid, copy=False)
