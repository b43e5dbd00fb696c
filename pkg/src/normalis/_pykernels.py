"""Pure numpy implementations of the per-pixel hot kernels.

These are the fallback backend behind :mod:`normalis.kernels` and the
semantic reference for the compiled backend: both loop over neighbor
offsets in the same order and evaluate the same expressions so results
agree to the last few ulps.  Everything here is per-pixel independent, so
row-partitioned execution (with a one-pixel halo for the stencils and the
neighbor ring) reproduces the unpartitioned output exactly.
"""

from __future__ import annotations

import numpy as np


def shifted(values: np.ndarray, valid: np.ndarray, du: int, dv: int):
    """values/valid of the pixel at offset (du, dv), aligned to each pixel.

    Out-of-border slots are invalid with value 0.
    """
    h, w = values.shape
    out = np.zeros((h, w), dtype=np.float64)
    ok = np.zeros((h, w), dtype=bool)
    ys = slice(max(0, dv), h + min(0, dv))
    xs = slice(max(0, du), w + min(0, du))
    yd = slice(max(0, -dv), h + min(0, -dv))
    xd = slice(max(0, -du), w + min(0, -du))
    out[yd, xd] = values[ys, xs]
    ok[yd, xd] = valid[ys, xs]
    return out, ok


def stencil_gradients(values, valid, sten_u, sten_v, footprint):
    """Correlate a masked raster with a gradient stencil pair.

    Returns (gu, gv, gvalid); gvalid is the erosion of the input mask by
    the footprint (border counts as invalid).
    """
    h, w = values.shape
    r = sten_u.shape[0] // 2
    gu = np.zeros((h, w), dtype=np.float64)
    gv = np.zeros((h, w), dtype=np.float64)
    gvalid = np.ones((h, w), dtype=bool)
    safe = np.where(valid, values, 0.0)
    for dv in range(-r, r + 1):
        for du in range(-r, r + 1):
            cu = sten_u[dv + r, du + r]
            cv = sten_v[dv + r, du + r]
            fp = footprint[dv + r, du + r]
            if cu == 0.0 and cv == 0.0 and not fp:
                continue
            sv, sok = shifted(safe, valid, du, dv)
            if cu != 0.0:
                gu += cu * sv
            if cv != 0.0:
                gv += cv * sv
            if fp:
                gvalid &= sok
    # match the compiled backend bit for bit, including invalid slots
    gu[~gvalid] = 0.0
    gv[~gvalid] = 0.0
    return gu, gv, gvalid


def sne_plus_normals(z, zvalid, gu, gv, gvalid, fx, fy, u0, v0, offsets, eps_g, eps_v):
    """Closed-form axial normal estimation over a whole image.

    For each pixel, the unit candidate axes contributed by the neighbor
    offsets are accumulated through the doubled-angle sums S = 2*sum(A*nz)
    and C = sum(nz^2 - A^2); the inclination maximizing the concentration
    objective sum((A sin t + nz cos t)^2) is the half angle of (C, S),
    recovered without trigonometry, and combined with the gradient
    azimuth.  Output normals are unit and oriented toward the camera.

    Returns (normals (H, W, 3), valid, frontoparallel) arrays.
    """
    h, w = z.shape
    cu = np.arange(w, dtype=np.float64) - u0
    cv = (np.arange(h, dtype=np.float64) - v0)[:, None]
    rx = cu / fx
    ry = cv / fy
    zq = np.where(zvalid, z, 0.0)
    guv = np.where(gvalid, gu, 0.0)
    gvv = np.where(gvalid, gv, 0.0)

    p = fx * guv
    q = fy * gvv
    base = zvalid & gvalid
    fronto = base & (np.abs(p) < eps_g) & (np.abs(q) < eps_g)
    live = base & ~fronto

    ell = np.sqrt(p * p + q * q)
    ell_safe = np.where(live, ell, 1.0)
    e = cu * guv + cv * gvv

    s_an = np.zeros((h, w), dtype=np.float64)
    s_d = np.zeros((h, w), dtype=np.float64)
    count = np.zeros((h, w), dtype=np.int64)
    eps_v2 = eps_v * eps_v
    for du, dv in offsets:
        zn, nok = shifted(zq, zvalid, int(du), int(dv))
        dz = zn - zq
        f = du * guv + dv * gvv
        wnum = dz * e + zn * f
        a = dz * ell
        aa = a * a
        ww = wnum * wnum
        r2 = aa + ww
        ok = live & nok & (r2 >= eps_v2)
        inv = 1.0 / np.where(ok, r2, 1.0)
        s_an += np.where(ok, a * wnum * inv, 0.0)
        s_d += np.where(ok, (ww - aa) * inv, 0.0)
        count += ok

    # half angle of the doubled-angle vector (C, S); the plateau S = C = 0
    # resolves to inclination 0 and (C, S) = (-rad, 0) to pi/2
    s2 = -2.0 * s_an
    c2 = s_d
    rad = np.sqrt(s2 * s2 + c2 * c2)
    hx = rad + c2
    hy = s2
    m = np.sqrt(hx * hx + hy * hy)
    inv_m = 1.0 / np.where(m > 0.0, m, 1.0)
    cos_t = np.where(m > 0.0, hx * inv_m, np.where(rad > 0.0, 0.0, 1.0))
    sin_t = np.where(m > 0.0, hy * inv_m, np.where(rad > 0.0, 1.0, 0.0))
    lift = sin_t < 0.0
    sin_t = np.where(lift, -sin_t, sin_t)
    cos_t = np.where(lift, -cos_t, cos_t)

    s_over_ell = sin_t / ell_safe
    nx = s_over_ell * p
    ny = s_over_ell * q
    nz = cos_t
    nx = np.where(fronto, 0.0, nx)
    ny = np.where(fronto, 0.0, ny)
    nz = np.where(fronto, -1.0, nz)

    out_valid = fronto | (live & (count > 0))

    # camera-facing orientation; exact ties fall back to component signs
    dot = nx * rx + ny * ry + nz
    flip = dot > 0
    tie = dot == 0
    flip |= tie & ((nz > 0) | ((nz == 0) & ((ny > 0) | ((ny == 0) & (nx < 0)))))
    sgn = np.where(flip, -1.0, 1.0)
    normals = np.stack([nx * sgn, ny * sgn, nz * sgn], axis=-1)
    normals[~out_valid] = 0.0
    return normals, out_valid, fronto & out_valid
