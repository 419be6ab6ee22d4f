# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: B-spline warp sampling, exact EDT, joint label fusion.

Semantics mirror quadseg._kernels_py operation-for-operation; warp sampling
and the distance transform are arranged to agree bitwise with the numpy
twins (same expressions, float64 intermediates, no FP contraction).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, sqrt, pow, INFINITY

cnp.import_array()

BACKEND = "cython"


cdef inline void _basis4(double u, double* b) noexcept nogil:
    cdef double t = 1.0 - u
    b[0] = t * t * t / 6.0
    b[1] = (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0
    b[2] = (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0
    b[3] = u * u * u / 6.0


cdef inline double _clampd(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline Py_ssize_t _clampi(Py_ssize_t v, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def bspline_displacement(points, grid_origin, grid_spacing, disp):
    """Displacement vectors at world points (n, 3), xyz order, mm."""
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, :, :, ::1] d = np.ascontiguousarray(disp, dtype=np.float64)
    cdef double gox = grid_origin[0], goy = grid_origin[1], goz = grid_origin[2]
    cdef double gsx = grid_spacing[0], gsy = grid_spacing[1], gsz = grid_spacing[2]
    cdef Py_ssize_t n = pts.shape[0]
    out_arr = np.zeros((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double bx[4]
    cdef double by[4]
    cdef double bz[4]
    cdef double gx, gy, gz, w
    cdef Py_ssize_t i, ix, iy, iz, di, dj, dk
    with nogil:
        for i in range(n):
            gx = (pts[i, 0] - gox) / gsx
            gy = (pts[i, 1] - goy) / gsy
            gz = (pts[i, 2] - goz) / gsz
            ix = <Py_ssize_t>floor(gx)
            iy = <Py_ssize_t>floor(gy)
            iz = <Py_ssize_t>floor(gz)
            _basis4(gx - <double>ix, bx)
            _basis4(gy - <double>iy, by)
            _basis4(gz - <double>iz, bz)
            for dk in range(4):
                for dj in range(4):
                    for di in range(4):
                        w = bx[di] * by[dj] * bz[dk]
                        out[i, 0] = out[i, 0] + w * d[iz - 1 + dk, iy - 1 + dj, ix - 1 + di, 0]
                        out[i, 1] = out[i, 1] + w * d[iz - 1 + dk, iy - 1 + dj, ix - 1 + di, 1]
                        out[i, 2] = out[i, 2] + w * d[iz - 1 + dk, iy - 1 + dj, ix - 1 + di, 2]
    return out_arr


cdef inline double _disp_component(
    double[:, :, :, ::1] d, double* bx, double* by, double* bz,
    Py_ssize_t ix, Py_ssize_t iy, Py_ssize_t iz, int axis,
) noexcept nogil:
    cdef double acc = 0.0
    cdef double w
    cdef Py_ssize_t di, dj, dk
    for dk in range(4):
        for dj in range(4):
            for di in range(4):
                w = bx[di] * by[dj] * bz[dk]
                acc = acc + w * d[iz - 1 + dk, iy - 1 + dj, ix - 1 + di, axis]
    return acc


cdef inline void _axis_base(double g, Py_ssize_t n, Py_ssize_t* i0, Py_ssize_t* i1, double* u) noexcept nogil:
    cdef Py_ssize_t top = n - 2
    if top < 0:
        top = 0
    cdef Py_ssize_t i = <Py_ssize_t>floor(g)
    i = _clampi(i, 0, top)
    i0[0] = i
    u[0] = g - <double>i
    i1[0] = i + 1
    if i1[0] > n - 1:
        i1[0] = n - 1


cdef inline double _trilinear_f32(
    float[:, :, ::1] data, double gx, double gy, double gz,
    Py_ssize_t nx, Py_ssize_t ny, Py_ssize_t nz,
) noexcept nogil:
    cdef Py_ssize_t ix0, ix1, iy0, iy1, iz0, iz1
    cdef double ux, uy, uz
    _axis_base(gx, nx, &ix0, &ix1, &ux)
    _axis_base(gy, ny, &iy0, &iy1, &uy)
    _axis_base(gz, nz, &iz0, &iz1, &uz)
    cdef double d000 = <double>data[iz0, iy0, ix0]
    cdef double d001 = <double>data[iz0, iy0, ix1]
    cdef double d010 = <double>data[iz0, iy1, ix0]
    cdef double d011 = <double>data[iz0, iy1, ix1]
    cdef double d100 = <double>data[iz1, iy0, ix0]
    cdef double d101 = <double>data[iz1, iy0, ix1]
    cdef double d110 = <double>data[iz1, iy1, ix0]
    cdef double d111 = <double>data[iz1, iy1, ix1]
    return (
        (d000 * (1.0 - ux) + d001 * ux) * (1.0 - uy)
        + (d010 * (1.0 - ux) + d011 * ux) * uy
    ) * (1.0 - uz) + (
        (d100 * (1.0 - ux) + d101 * ux) * (1.0 - uy)
        + (d110 * (1.0 - ux) + d111 * ux) * uy
    ) * uz


def warp_volume(data, nearest, spacing, origin, grid_origin, grid_spacing, disp):
    """Backward-warp a (nz, ny, nx) array; out-of-volume samples become 0."""
    arr = np.ascontiguousarray(data)
    if arr.dtype == np.uint8:
        return _warp_u8(arr, bool(nearest), spacing, origin, grid_origin, grid_spacing, disp)
    return _warp_f32(
        np.ascontiguousarray(arr, dtype=np.float32),
        bool(nearest), spacing, origin, grid_origin, grid_spacing, disp,
    )


cdef _warp_f32(data, bint nearest, spacing, origin, grid_origin, grid_spacing, disp):
    cdef float[:, :, ::1] src = data
    cdef double[:, :, :, ::1] d = np.ascontiguousarray(disp, dtype=np.float64)
    cdef Py_ssize_t nz = src.shape[0], ny = src.shape[1], nx = src.shape[2]
    out_arr = np.zeros((nz, ny, nx), dtype=np.float32)
    cdef float[:, :, ::1] out = out_arr
    cdef double sx = spacing[0], sy = spacing[1], sz = spacing[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double gox = grid_origin[0], goy = grid_origin[1], goz = grid_origin[2]
    cdef double gsx = grid_spacing[0], gsy = grid_spacing[1], gsz = grid_spacing[2]
    cdef double bx[4]
    cdef double by[4]
    cdef double bz[4]
    cdef double px, py, pz, fgx, fgy, fgz, dx, dy, dz, gx, gy, gz
    cdef Py_ssize_t x, y, z, cix, ciy, ciz, rx, ry, rz
    with nogil:
        for z in range(nz):
            pz = oz + (<double>z) * sz
            for y in range(ny):
                py = oy + (<double>y) * sy
                for x in range(nx):
                    px = ox + (<double>x) * sx
                    fgx = (px - gox) / gsx
                    fgy = (py - goy) / gsy
                    fgz = (pz - goz) / gsz
                    cix = <Py_ssize_t>floor(fgx)
                    ciy = <Py_ssize_t>floor(fgy)
                    ciz = <Py_ssize_t>floor(fgz)
                    _basis4(fgx - <double>cix, bx)
                    _basis4(fgy - <double>ciy, by)
                    _basis4(fgz - <double>ciz, bz)
                    dx = _disp_component(d, bx, by, bz, cix, ciy, ciz, 0)
                    dy = _disp_component(d, bx, by, bz, cix, ciy, ciz, 1)
                    dz = _disp_component(d, bx, by, bz, cix, ciy, ciz, 2)
                    gx = (<double>x) + dx / sx
                    gy = (<double>y) + dy / sy
                    gz = (<double>z) + dz / sz
                    if (
                        gx >= 0.0 and gx <= nx - 1.0
                        and gy >= 0.0 and gy <= ny - 1.0
                        and gz >= 0.0 and gz <= nz - 1.0
                    ):
                        if nearest:
                            rx = _clampi(<Py_ssize_t>floor(gx + 0.5), 0, nx - 1)
                            ry = _clampi(<Py_ssize_t>floor(gy + 0.5), 0, ny - 1)
                            rz = _clampi(<Py_ssize_t>floor(gz + 0.5), 0, nz - 1)
                            out[z, y, x] = src[rz, ry, rx]
                        else:
                            out[z, y, x] = <float>_trilinear_f32(src, gx, gy, gz, nx, ny, nz)
    return out_arr


cdef _warp_u8(data, bint nearest, spacing, origin, grid_origin, grid_spacing, disp):
    if not nearest:
        raise ValueError("uint8 volumes must be warped with nearest interpolation")
    cdef unsigned char[:, :, ::1] src = data
    cdef double[:, :, :, ::1] d = np.ascontiguousarray(disp, dtype=np.float64)
    cdef Py_ssize_t nz = src.shape[0], ny = src.shape[1], nx = src.shape[2]
    out_arr = np.zeros((nz, ny, nx), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr
    cdef double sx = spacing[0], sy = spacing[1], sz = spacing[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double gox = grid_origin[0], goy = grid_origin[1], goz = grid_origin[2]
    cdef double gsx = grid_spacing[0], gsy = grid_spacing[1], gsz = grid_spacing[2]
    cdef double bx[4]
    cdef double by[4]
    cdef double bz[4]
    cdef double px, py, pz, fgx, fgy, fgz, dx, dy, dz, gx, gy, gz
    cdef Py_ssize_t x, y, z, cix, ciy, ciz, rx, ry, rz
    with nogil:
        for z in range(nz):
            pz = oz + (<double>z) * sz
            for y in range(ny):
                py = oy + (<double>y) * sy
                for x in range(nx):
                    px = ox + (<double>x) * sx
                    fgx = (px - gox) / gsx
                    fgy = (py - goy) / gsy
                    fgz = (pz - goz) / gsz
                    cix = <Py_ssize_t>floor(fgx)
                    ciy = <Py_ssize_t>floor(fgy)
                    ciz = <Py_ssize_t>floor(fgz)
                    _basis4(fgx - <double>cix, bx)
                    _basis4(fgy - <double>ciy, by)
                    _basis4(fgz - <double>ciz, bz)
                    dx = _disp_component(d, bx, by, bz, cix, ciy, ciz, 0)
                    dy = _disp_component(d, bx, by, bz, cix, ciy, ciz, 1)
                    dz = _disp_component(d, bx, by, bz, cix, ciy, ciz, 2)
                    gx = (<double>x) + dx / sx
                    gy = (<double>y) + dy / sy
                    gz = (<double>z) + dz / sz
                    if (
                        gx >= 0.0 and gx <= nx - 1.0
                        and gy >= 0.0 and gy <= ny - 1.0
                        and gz >= 0.0 and gz <= nz - 1.0
                    ):
                        rx = _clampi(<Py_ssize_t>floor(gx + 0.5), 0, nx - 1)
                        ry = _clampi(<Py_ssize_t>floor(gy + 0.5), 0, ny - 1)
                        rz = _clampi(<Py_ssize_t>floor(gz + 0.5), 0, nz - 1)
                        out[z, y, x] = src[rz, ry, rx]
    return out_arr


def ffd_ssd_grad(fixed, moving, mgrad, spacing, origin, grid_origin, grid_spacing, disp):
    """Sum-of-squared-differences and gradient wrt control displacements."""
    cdef float[:, :, ::1] fx = np.ascontiguousarray(fixed, dtype=np.float32)
    cdef float[:, :, ::1] mv = np.ascontiguousarray(moving, dtype=np.float32)
    cdef float[:, :, :, ::1] mg = np.ascontiguousarray(mgrad, dtype=np.float32)
    cdef double[:, :, :, ::1] d = np.ascontiguousarray(disp, dtype=np.float64)
    cdef Py_ssize_t nz = fx.shape[0], ny = fx.shape[1], nx = fx.shape[2]
    grad_arr = np.zeros((d.shape[0], d.shape[1], d.shape[2], 3), dtype=np.float64)
    cdef double[:, :, :, ::1] grad = grad_arr
    cdef double sx = spacing[0], sy = spacing[1], sz = spacing[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double gox = grid_origin[0], goy = grid_origin[1], goz = grid_origin[2]
    cdef double gsx = grid_spacing[0], gsy = grid_spacing[1], gsz = grid_spacing[2]
    cdef double bx[4]
    cdef double by[4]
    cdef double bz[4]
    cdef double coef[3]
    cdef double px, py, pz, fgx, fgy, fgz, dx, dy, dz, gx, gy, gz
    cdef double warped, r, w, ssd = 0.0
    cdef bint valid
    cdef Py_ssize_t x, y, z, cix, ciy, ciz, di, dj, dk, a
    with nogil:
        for z in range(nz):
            pz = oz + (<double>z) * sz
            for y in range(ny):
                py = oy + (<double>y) * sy
                for x in range(nx):
                    px = ox + (<double>x) * sx
                    fgx = (px - gox) / gsx
                    fgy = (py - goy) / gsy
                    fgz = (pz - goz) / gsz
                    cix = <Py_ssize_t>floor(fgx)
                    ciy = <Py_ssize_t>floor(fgy)
                    ciz = <Py_ssize_t>floor(fgz)
                    _basis4(fgx - <double>cix, bx)
                    _basis4(fgy - <double>ciy, by)
                    _basis4(fgz - <double>ciz, bz)
                    dx = _disp_component(d, bx, by, bz, cix, ciy, ciz, 0)
                    dy = _disp_component(d, bx, by, bz, cix, ciy, ciz, 1)
                    dz = _disp_component(d, bx, by, bz, cix, ciy, ciz, 2)
                    gx = (<double>x) + dx / sx
                    gy = (<double>y) + dy / sy
                    gz = (<double>z) + dz / sz
                    valid = (
                        gx >= 0.0 and gx <= nx - 1.0
                        and gy >= 0.0 and gy <= ny - 1.0
                        and gz >= 0.0 and gz <= nz - 1.0
                    )
                    if valid:
                        warped = _trilinear_f32(mv, gx, gy, gz, nx, ny, nz)
                    else:
                        warped = 0.0
                    r = warped - <double>fx[z, y, x]
                    ssd = ssd + r * r
                    if not valid:
                        continue
                    coef[0] = 2.0 * r * _trilinear_f32(mg[0], gx, gy, gz, nx, ny, nz) / sx
                    coef[1] = 2.0 * r * _trilinear_f32(mg[1], gx, gy, gz, nx, ny, nz) / sy
                    coef[2] = 2.0 * r * _trilinear_f32(mg[2], gx, gy, gz, nx, ny, nz) / sz
                    for dk in range(4):
                        for dj in range(4):
                            for di in range(4):
                                w = bx[di] * by[dj] * bz[dk]
                                for a in range(3):
                                    grad[ciz - 1 + dk, ciy - 1 + dj, cix - 1 + di, a] += w * coef[a]
    return ssd, grad_arr


def edt_sq(mask, spacing):
    """Exact squared Euclidean distance (mm^2) to the nearest True voxel."""
    m = np.ascontiguousarray(np.asarray(mask, dtype=bool), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] mk = m
    cdef Py_ssize_t nz = mk.shape[0], ny = mk.shape[1], nx = mk.shape[2]
    d_arr = np.empty((nz, ny, nx), dtype=np.float64)
    cdef double[:, :, ::1] dcur = d_arr
    cdef double sx = spacing[0], sy = spacing[1], sz = spacing[2]
    cdef Py_ssize_t x, y, z, s
    cdef double best, cand, diff, v
    with nogil:
        for z in range(nz):
            for y in range(ny):
                for x in range(nx):
                    dcur[z, y, x] = 0.0 if mk[z, y, x] else INFINITY

    out_arr = np.empty((nz, ny, nx), dtype=np.float64)
    cdef double[:, :, ::1] dnew = out_arr

    if nx > 1:
        with nogil:
            for z in range(nz):
                for y in range(ny):
                    for x in range(nx):
                        best = INFINITY
                        for s in range(nx):
                            v = dcur[z, y, s]
                            if v == INFINITY:
                                continue
                            diff = (<double>(x - s)) * sx
                            cand = v + diff * diff
                            if cand < best:
                                best = cand
                        dnew[z, y, x] = best
        dcur, dnew = dnew, dcur
        d_arr, out_arr = out_arr, d_arr
    if ny > 1:
        with nogil:
            for z in range(nz):
                for x in range(nx):
                    for y in range(ny):
                        best = INFINITY
                        for s in range(ny):
                            v = dcur[z, s, x]
                            if v == INFINITY:
                                continue
                            diff = (<double>(y - s)) * sy
                            cand = v + diff * diff
                            if cand < best:
                                best = cand
                        dnew[z, y, x] = best
        dcur, dnew = dnew, dcur
        d_arr, out_arr = out_arr, d_arr
    if nz > 1:
        with nogil:
            for y in range(ny):
                for x in range(nx):
                    for z in range(nz):
                        best = INFINITY
                        for s in range(nz):
                            v = dcur[s, y, x]
                            if v == INFINITY:
                                continue
                            diff = (<double>(z - s)) * sz
                            cand = v + diff * diff
                            if cand < best:
                                best = cand
                        dnew[z, y, x] = best
        dcur, dnew = dnew, dcur
        d_arr, out_arr = out_arr, d_arr
    return d_arr


cdef int _cholesky_solve(double* m, double* l, double* w, Py_ssize_t n) noexcept nogil:
    """Solve M w = 1 with M SPD; returns 0 on success, 1 on failure."""
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(n):
        for j in range(i + 1):
            s = m[i * n + j]
            for k in range(j):
                s -= l[i * n + k] * l[j * n + k]
            if i == j:
                if s <= 0.0:
                    return 1
                l[i * n + i] = sqrt(s)
            else:
                l[i * n + j] = s / l[j * n + j]
    # L y = 1
    for i in range(n):
        s = 1.0
        for k in range(i):
            s -= l[i * n + k] * w[k]
        w[i] = s / l[i * n + i]
    # L^T w = y
    for i in range(n - 1, -1, -1):
        s = w[i]
        for k in range(i + 1, n):
            s -= l[k * n + i] * w[k]
        w[i] = s / l[i * n + i]
    return 0


def jlf_fuse(target, atlas_imgs, atlas_labels, rp, rs, beta, eps, z_lo, z_hi, num_labels=5):
    """Joint label fusion over the axial slab [z_lo, z_hi); see numpy twin."""
    cdef float[:, :, ::1] t = np.ascontiguousarray(target, dtype=np.float32)
    cdef float[:, :, :, ::1] aimg = np.ascontiguousarray(atlas_imgs, dtype=np.float32)
    cdef unsigned char[:, :, :, ::1] alab = np.ascontiguousarray(atlas_labels, dtype=np.uint8)
    cdef Py_ssize_t na = aimg.shape[0], nz = aimg.shape[1], ny = aimg.shape[2], nx = aimg.shape[3]
    cdef Py_ssize_t crp = rp, crs = rs, czlo = z_lo, czhi = z_hi, nl = num_labels
    cdef double cbeta = beta, ceps = eps
    lab_arr = np.zeros((czhi - czlo, ny, nx), dtype=np.uint8)
    votes_arr = np.zeros((nl, czhi - czlo, ny, nx), dtype=np.float32)
    cdef unsigned char[:, :, ::1] out_lab = lab_arr
    cdef float[:, :, :, ::1] votes = votes_arr

    cdef Py_ssize_t pside = 2 * crp + 1
    cdef Py_ssize_t psz = pside * pside * pside
    cdef double[::1] tp = np.empty(psz, dtype=np.float64)
    cdef double[::1] absr = np.empty(na * psz, dtype=np.float64)
    cdef double[::1] mmat = np.empty(na * na, dtype=np.float64)
    cdef double[::1] lmat = np.empty(na * na, dtype=np.float64)
    cdef double[::1] wvec = np.empty(na, dtype=np.float64)
    cdef double[::1] vote = np.empty(nl, dtype=np.float64)
    cdef Py_ssize_t[::1] boff = np.empty(na * 3, dtype=np.intp)

    cdef int fail = 0
    cdef Py_ssize_t x, y, z, i, j, k, px_, py_, pz_, ox_, oy_, oz_, idx
    cdef Py_ssize_t bo_x, bo_y, bo_z, li, best_lab
    cdef unsigned char first
    cdef bint unanimous
    cdef double sad, best_sad, s, wsum, bestv, av
    with nogil:
            for z in range(czlo, czhi):
                for y in range(ny):
                    for x in range(nx):
                        first = alab[0, z, y, x]
                        unanimous = True
                        for i in range(1, na):
                            if alab[i, z, y, x] != first:
                                unanimous = False
                                break
                        if unanimous:
                            out_lab[z - czlo, y, x] = first
                            votes[first, z - czlo, y, x] = 1.0
                            continue
                        # target patch
                        idx = 0
                        for pz_ in range(-crp, crp + 1):
                            for py_ in range(-crp, crp + 1):
                                for px_ in range(-crp, crp + 1):
                                    tp[idx] = <double>t[
                                        _clampi(z + pz_, 0, nz - 1),
                                        _clampi(y + py_, 0, ny - 1),
                                        _clampi(x + px_, 0, nx - 1),
                                    ]
                                    idx += 1
                        # per-atlas local search (lexicographic offsets, strict improvement)
                        for i in range(na):
                            best_sad = INFINITY
                            bo_x = 0
                            bo_y = 0
                            bo_z = 0
                            for ox_ in range(-crs, crs + 1):
                                for oy_ in range(-crs, crs + 1):
                                    for oz_ in range(-crs, crs + 1):
                                        sad = 0.0
                                        idx = 0
                                        for pz_ in range(-crp, crp + 1):
                                            for py_ in range(-crp, crp + 1):
                                                for px_ in range(-crp, crp + 1):
                                                    av = <double>aimg[
                                                        i,
                                                        _clampi(z + oz_ + pz_, 0, nz - 1),
                                                        _clampi(y + oy_ + py_, 0, ny - 1),
                                                        _clampi(x + ox_ + px_, 0, nx - 1),
                                                    ]
                                                    sad = sad + fabs(av - tp[idx])
                                                    idx += 1
                                        if sad < best_sad:
                                            best_sad = sad
                                            bo_x = ox_
                                            bo_y = oy_
                                            bo_z = oz_
                            boff[i * 3 + 0] = bo_x
                            boff[i * 3 + 1] = bo_y
                            boff[i * 3 + 2] = bo_z
                            idx = 0
                            for pz_ in range(-crp, crp + 1):
                                for py_ in range(-crp, crp + 1):
                                    for px_ in range(-crp, crp + 1):
                                        av = <double>aimg[
                                            i,
                                            _clampi(z + bo_z + pz_, 0, nz - 1),
                                            _clampi(y + bo_y + py_, 0, ny - 1),
                                            _clampi(x + bo_x + px_, 0, nx - 1),
                                        ]
                                        absr[i * psz + idx] = fabs(av - tp[idx])
                                        idx += 1
                        # dependency matrix
                        for i in range(na):
                            for j in range(i + 1):
                                s = 0.0
                                for k in range(psz):
                                    s += absr[i * psz + k] * absr[j * psz + k]
                                if cbeta == 1.0:
                                    pass
                                elif cbeta == 2.0:
                                    s = s * s
                                else:
                                    s = pow(s, cbeta)
                                mmat[i * na + j] = s
                                mmat[j * na + i] = s
                            mmat[i * na + i] += ceps
                        if _cholesky_solve(&mmat[0], &lmat[0], &wvec[0], na):
                            fail = 1
                            break
                        wsum = 0.0
                        for i in range(na):
                            wsum += wvec[i]
                        for i in range(na):
                            wvec[i] = wvec[i] / wsum
                        for k in range(nl):
                            vote[k] = 0.0
                        for i in range(na):
                            li = alab[
                                i,
                                _clampi(z + boff[i * 3 + 2], 0, nz - 1),
                                _clampi(y + boff[i * 3 + 1], 0, ny - 1),
                                _clampi(x + boff[i * 3 + 0], 0, nx - 1),
                            ]
                            vote[li] += wvec[i]
                        best_lab = 0
                        bestv = vote[0]
                        for k in range(1, nl):
                            if vote[k] > bestv:
                                bestv = vote[k]
                                best_lab = k
                        for k in range(nl):
                            votes[k, z - czlo, y, x] = <float>vote[k]
                        out_lab[z - czlo, y, x] = <unsigned char>best_lab
                    if fail:
                        break
                if fail:
                    break
    if fail:
        raise np.linalg.LinAlgError("joint weight solve failed; raise epsilon")
    return lab_arr, votes_arr
