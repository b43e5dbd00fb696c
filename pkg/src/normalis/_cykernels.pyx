# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel kernels.

Semantics mirror normalis._pykernels expression for expression (same
neighbor order, same operation order) so the two backends agree bit for
bit on positive rasters; the build disables FP contraction for the same
reason.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def stencil_gradients(const double[:, ::1] values, const cnp.uint8_t[:, ::1] valid,
                      const double[:, ::1] sten_u, const double[:, ::1] sten_v,
                      const cnp.uint8_t[:, ::1] footprint):
    cdef Py_ssize_t h = values.shape[0]
    cdef Py_ssize_t w = values.shape[1]
    cdef Py_ssize_t r = sten_u.shape[0] // 2
    cdef cnp.ndarray[double, ndim=2] gu = np.zeros((h, w), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] gv = np.zeros((h, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] gvalid = np.zeros((h, w), dtype=np.uint8)
    cdef double[:, ::1] gu_v = gu
    cdef double[:, ::1] gv_v = gv
    cdef cnp.uint8_t[:, ::1] ok_v = gvalid
    # flatten the stencil into entry lists once, scanning dv outer du inner
    # (the accumulation order the numpy backend uses)
    cdef Py_ssize_t side = 2 * r + 1
    cdef Py_ssize_t max_entries = side * side
    cdef cnp.ndarray[cnp.int64_t, ndim=1] edu = np.empty(max_entries, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] edv = np.empty(max_entries, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] ecu = np.empty(max_entries, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ecv = np.empty(max_entries, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fdu = np.empty(max_entries, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fdv = np.empty(max_entries, dtype=np.int64)
    cdef Py_ssize_t ne = 0, nf = 0
    cdef Py_ssize_t di, dj
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            if footprint[di + r, dj + r]:
                fdv[nf] = di
                fdu[nf] = dj
                nf += 1
            if sten_u[di + r, dj + r] != 0.0 or sten_v[di + r, dj + r] != 0.0:
                edv[ne] = di
                edu[ne] = dj
                ecu[ne] = sten_u[di + r, dj + r]
                ecv[ne] = sten_v[di + r, dj + r]
                ne += 1
    cdef cnp.int64_t[::1] edu_v = edu, edv_v = edv, fdu_v = fdu, fdv_v = fdv
    cdef double[::1] ecu_v = ecu, ecv_v = ecv
    cdef Py_ssize_t i, j, t, ii, jj
    cdef double acc_u, acc_v, val, cu, cv
    cdef bint good
    for i in range(r, h - r):
        for j in range(r, w - r):
            good = 1
            for t in range(nf):
                if not valid[i + fdv_v[t], j + fdu_v[t]]:
                    good = 0
                    break
            if not good:
                continue
            acc_u = 0.0
            acc_v = 0.0
            for t in range(ne):
                ii = i + edv_v[t]
                jj = j + edu_v[t]
                if valid[ii, jj]:
                    val = values[ii, jj]
                else:
                    val = 0.0
                cu = ecu_v[t]
                cv = ecv_v[t]
                if cu != 0.0:
                    acc_u = acc_u + cu * val
                if cv != 0.0:
                    acc_v = acc_v + cv * val
            gu_v[i, j] = acc_u
            gv_v[i, j] = acc_v
            ok_v[i, j] = 1
    return gu, gv, gvalid.astype(bool)


cdef inline void _solve_pixel(double s_an, double s_d, double p, double q,
                              double ell, double rx, double ry,
                              double* out) nogil:
    """Inclination from the doubled-angle sums, azimuth from (p, q),
    camera-facing orientation against the pixel ray (rx, ry, 1)."""
    cdef double s2 = -2.0 * s_an
    cdef double c2 = s_d
    cdef double rad = sqrt(s2 * s2 + c2 * c2)
    cdef double hx = rad + c2
    cdef double hy = s2
    cdef double m = sqrt(hx * hx + hy * hy)
    cdef double cos_t, sin_t, inv_m, s_over_ell
    cdef double nx, ny, nz, dot, sgn
    if m > 0.0:
        inv_m = 1.0 / m
        cos_t = hx * inv_m
        sin_t = hy * inv_m
    elif rad > 0.0:
        cos_t = 0.0
        sin_t = 1.0
    else:
        cos_t = 1.0
        sin_t = 0.0
    if sin_t < 0.0:
        sin_t = -sin_t
        cos_t = -cos_t
    s_over_ell = sin_t / ell
    nx = s_over_ell * p
    ny = s_over_ell * q
    nz = cos_t
    dot = nx * rx + ny * ry + nz
    if dot > 0.0:
        sgn = -1.0
    elif dot == 0.0 and (nz > 0.0 or (nz == 0.0 and (ny > 0.0 or (ny == 0.0 and nx < 0.0)))):
        sgn = -1.0
    else:
        sgn = 1.0
    out[0] = nx * sgn
    out[1] = ny * sgn
    out[2] = nz * sgn


def sne_plus_normals(const double[:, ::1] z, const cnp.uint8_t[:, ::1] zvalid,
                     const double[:, ::1] gu, const double[:, ::1] gv,
                     const cnp.uint8_t[:, ::1] gvalid,
                     double fx, double fy, double u0, double v0,
                     const long long[:, ::1] offsets,
                     double eps_g, double eps_v):
    cdef Py_ssize_t h = z.shape[0]
    cdef Py_ssize_t w = z.shape[1]
    cdef Py_ssize_t k = offsets.shape[0]
    cdef cnp.ndarray[double, ndim=3] normals = np.zeros((h, w, 3), dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out_valid = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] fronto = np.zeros((h, w), dtype=np.uint8)
    cdef double[:, :, ::1] n_v = normals
    cdef cnp.uint8_t[:, ::1] ov_v = out_valid
    cdef cnp.uint8_t[:, ::1] fp_v = fronto
    cdef cnp.ndarray[double, ndim=1] cu_arr = np.arange(w, dtype=np.float64) - u0
    cdef cnp.ndarray[double, ndim=1] cv_arr = np.arange(h, dtype=np.float64) - v0
    cdef double[::1] cu = cu_arr
    cdef double[::1] cv = cv_arr
    cdef cnp.ndarray[double, ndim=1] rx_arr = cu_arr / fx
    cdef cnp.ndarray[double, ndim=1] ry_arr = cv_arr / fy
    cdef double[::1] rx = rx_arr
    cdef double[::1] ry = ry_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] odu = np.ascontiguousarray(
        np.asarray(offsets)[:, 0], dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] odv = np.ascontiguousarray(
        np.asarray(offsets)[:, 1], dtype=np.int64)
    cdef cnp.int64_t[::1] du_v = odu
    cdef cnp.int64_t[::1] dv_v = odv
    cdef cnp.ndarray[double, ndim=1] odu_d = odu.astype(np.float64)
    cdef cnp.ndarray[double, ndim=1] odv_d = odv.astype(np.float64)
    cdef double[::1] duf = odu_d
    cdef double[::1] dvf = odv_d
    cdef Py_ssize_t pad = 0
    cdef Py_ssize_t t
    for t in range(k):
        if abs(du_v[t]) > pad:
            pad = abs(du_v[t])
        if abs(dv_v[t]) > pad:
            pad = abs(dv_v[t])
    cdef double eps_v2 = eps_v * eps_v
    cdef Py_ssize_t i, j, ii, jj
    cdef double pp, qq, absp, absq, ell, e, zq, zn, dz, f, wnum
    cdef double a, aa, ww, r2, inv, s_an, s_d, guv, gvv
    cdef int count
    cdef bint interior
    for i in range(h):
        for j in range(w):
            if not (zvalid[i, j] and gvalid[i, j]):
                continue
            guv = gu[i, j]
            gvv = gv[i, j]
            pp = fx * guv
            qq = fy * gvv
            absp = pp if pp >= 0.0 else -pp
            absq = qq if qq >= 0.0 else -qq
            if absp < eps_g and absq < eps_g:
                n_v[i, j, 0] = 0.0
                n_v[i, j, 1] = 0.0
                n_v[i, j, 2] = -1.0
                ov_v[i, j] = 1
                fp_v[i, j] = 1
                continue
            ell = sqrt(pp * pp + qq * qq)
            e = cu[j] * guv + cv[i] * gvv
            zq = z[i, j]
            s_an = 0.0
            s_d = 0.0
            count = 0
            interior = pad <= i < h - pad and pad <= j < w - pad
            for t in range(k):
                ii = i + dv_v[t]
                jj = j + du_v[t]
                if not interior:
                    if ii < 0 or ii >= h or jj < 0 or jj >= w:
                        continue
                if not zvalid[ii, jj]:
                    continue
                zn = z[ii, jj]
                dz = zn - zq
                f = duf[t] * guv + dvf[t] * gvv
                wnum = dz * e + zn * f
                a = dz * ell
                aa = a * a
                ww = wnum * wnum
                r2 = aa + ww
                if r2 < eps_v2:
                    continue
                inv = 1.0 / r2
                s_an = s_an + a * wnum * inv
                s_d = s_d + (ww - aa) * inv
                count = count + 1
            if count == 0:
                continue
            _solve_pixel(s_an, s_d, pp, qq, ell, rx[j], ry[i], &n_v[i, j, 0])
            ov_v[i, j] = 1
    return normals, out_valid.astype(bool), fronto.astype(bool)
