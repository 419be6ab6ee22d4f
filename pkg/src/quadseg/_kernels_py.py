"""Pure-numpy twins of the compiled kernels.

Each function here has the same name, signature and semantics as its Cython
counterpart in ``_kernels.pyx``. Arithmetic is structured operation-for-
operation like the C code (same accumulation order, float64 intermediates)
so that warp sampling and the distance transform agree bitwise across
backends; the JLF solve differs only at rounding level.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _basis4(u: np.ndarray):
    """Uniform cubic B-spline basis values for fractional positions u."""
    t = 1.0 - u
    b0 = t * t * t / 6.0
    b1 = (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0
    b2 = (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0
    b3 = u * u * u / 6.0
    return b0, b1, b2, b3


def bspline_displacement(points, grid_origin, grid_spacing, disp):
    """Displacement vectors at world points (n, 3), xyz order, mm.

    ``disp`` is the control lattice shaped (gz, gy, gx, 3). Callers must have
    verified coverage: floor(g)-1 >= 0 and floor(g)+2 <= gdim-1 per axis.
    """
    pts = np.asarray(points, dtype=np.float64)
    disp = np.asarray(disp, dtype=np.float64)
    g = (pts - np.asarray(grid_origin, dtype=np.float64)) / np.asarray(
        grid_spacing, dtype=np.float64
    )
    i0 = np.floor(g).astype(np.int64)
    u = g - i0
    bx = _basis4(u[:, 0])
    by = _basis4(u[:, 1])
    bz = _basis4(u[:, 2])
    ix = i0[:, 0] - 1
    iy = i0[:, 1] - 1
    iz = i0[:, 2] - 1
    out = np.zeros((pts.shape[0], 3), dtype=np.float64)
    for dk in range(4):
        for dj in range(4):
            for di in range(4):
                w = bx[di] * by[dj] * bz[dk]
                out += w[:, None] * disp[iz + dk, iy + dj, ix + di]
    return out


def _sample_grid_coords(shape, spacing, origin, grid_origin, grid_spacing, disp):
    """Warp sampling positions in index space for every voxel, plus validity."""
    nz, ny, nx = shape
    zz, yy, xx = np.meshgrid(
        np.arange(nz, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nx, dtype=np.float64),
        indexing="ij",
    )
    pts = np.empty((nz * ny * nx, 3), dtype=np.float64)
    pts[:, 0] = origin[0] + xx.ravel() * spacing[0]
    pts[:, 1] = origin[1] + yy.ravel() * spacing[1]
    pts[:, 2] = origin[2] + zz.ravel() * spacing[2]
    d = bspline_displacement(pts, grid_origin, grid_spacing, disp)
    gx = xx.ravel() + d[:, 0] / spacing[0]
    gy = yy.ravel() + d[:, 1] / spacing[1]
    gz = zz.ravel() + d[:, 2] / spacing[2]
    valid = (
        (gx >= 0.0)
        & (gx <= nx - 1.0)
        & (gy >= 0.0)
        & (gy <= ny - 1.0)
        & (gz >= 0.0)
        & (gz <= nz - 1.0)
    )
    return gx, gy, gz, valid


def _axis_base(g, n):
    """Lower interpolation index and fractional offset, edge-safe."""
    i0 = np.floor(g).astype(np.int64)
    top = max(n - 2, 0)
    i0 = np.clip(i0, 0, top)
    u = g - i0
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, u


def _trilinear(data, gx, gy, gz):
    nz, ny, nx = data.shape
    ix0, ix1, ux = _axis_base(gx, nx)
    iy0, iy1, uy = _axis_base(gy, ny)
    iz0, iz1, uz = _axis_base(gz, nz)
    d = data.astype(np.float64, copy=False)
    d000 = d[iz0, iy0, ix0]
    d001 = d[iz0, iy0, ix1]
    d010 = d[iz0, iy1, ix0]
    d011 = d[iz0, iy1, ix1]
    d100 = d[iz1, iy0, ix0]
    d101 = d[iz1, iy0, ix1]
    d110 = d[iz1, iy1, ix0]
    d111 = d[iz1, iy1, ix1]
    return (
        (d000 * (1.0 - ux) + d001 * ux) * (1.0 - uy)
        + (d010 * (1.0 - ux) + d011 * ux) * uy
    ) * (1.0 - uz) + (
        (d100 * (1.0 - ux) + d101 * ux) * (1.0 - uy)
        + (d110 * (1.0 - ux) + d111 * ux) * uy
    ) * uz


def warp_volume(data, nearest, spacing, origin, grid_origin, grid_spacing, disp):
    """Backward-warp a (nz, ny, nx) array; out-of-volume samples become 0."""
    shape = data.shape
    gx, gy, gz, valid = _sample_grid_coords(
        shape, spacing, origin, grid_origin, grid_spacing, disp
    )
    flat_valid = valid
    if nearest:
        out = np.zeros(gx.shape, dtype=data.dtype)
        rx = np.floor(gx + 0.5).astype(np.int64)
        ry = np.floor(gy + 0.5).astype(np.int64)
        rz = np.floor(gz + 0.5).astype(np.int64)
        rx = np.clip(rx, 0, shape[2] - 1)
        ry = np.clip(ry, 0, shape[1] - 1)
        rz = np.clip(rz, 0, shape[0] - 1)
        vals = data[rz[flat_valid], ry[flat_valid], rx[flat_valid]]
        out[flat_valid] = vals
    else:
        vals = _trilinear(data, gx, gy, gz)
        vals[~flat_valid] = 0.0
        out = vals.astype(data.dtype)
    return out.reshape(shape)


def ffd_ssd_grad(fixed, moving, mgrad, spacing, origin, grid_origin, grid_spacing, disp):
    """Sum-of-squared-differences and its gradient wrt control displacements.

    ``mgrad`` holds the three central-difference gradients of ``moving`` in
    index units, shaped (3, nz, ny, nx). Returns (ssd, grad) where grad has
    the control lattice shape (gz, gy, gx, 3), float64.
    """
    shape = fixed.shape
    gx, gy, gz, valid = _sample_grid_coords(
        shape, spacing, origin, grid_origin, grid_spacing, disp
    )
    warped = _trilinear(moving, gx, gy, gz)
    warped[~valid] = 0.0
    r = warped - fixed.astype(np.float64, copy=False).ravel()
    ssd = float(np.dot(r, r))

    gvals = []
    for a in range(3):
        s = _trilinear(mgrad[a], gx, gy, gz)
        s[~valid] = 0.0
        gvals.append(s)

    # Positions where the displacement was evaluated (fixed voxel grid).
    nz, ny, nx = shape
    zz, yy, xx = np.meshgrid(
        np.arange(nz, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nx, dtype=np.float64),
        indexing="ij",
    )
    px = (origin[0] + xx.ravel() * spacing[0] - grid_origin[0]) / grid_spacing[0]
    py = (origin[1] + yy.ravel() * spacing[1] - grid_origin[1]) / grid_spacing[1]
    pz = (origin[2] + zz.ravel() * spacing[2] - grid_origin[2]) / grid_spacing[2]
    i0 = np.floor(px).astype(np.int64)
    j0 = np.floor(py).astype(np.int64)
    k0 = np.floor(pz).astype(np.int64)
    bx = _basis4(px - i0)
    by = _basis4(py - j0)
    bz = _basis4(pz - k0)

    coef = [2.0 * r * gvals[a] / spacing[a] for a in range(3)]
    grad = np.zeros(disp.shape, dtype=np.float64)
    gzd, gyd, gxd, _ = disp.shape
    lin = ((k0 - 1) * gyd + (j0 - 1)) * gxd + (i0 - 1)
    flat = grad.reshape(-1, 3)
    for dk in range(4):
        for dj in range(4):
            for di in range(4):
                w = bx[di] * by[dj] * bz[dk]
                idx = lin + (dk * gyd + dj) * gxd + di
                for a in range(3):
                    np.add.at(flat[:, a], idx, w * coef[a])
    return ssd, grad


def edt_sq(mask, spacing):
    """Exact squared Euclidean distance (mm^2) to the nearest True voxel.

    Separable full-scan passes in x, then y, then z order so each candidate
    value accumulates as ((dx*sx)^2 + (dy*sy)^2) + (dz*sz)^2 with the same
    association order the brute-force oracle uses.
    """
    m = np.asarray(mask, dtype=bool)
    nz, ny, nx = m.shape
    sx, sy, sz = (float(s) for s in spacing)
    d = np.where(m, 0.0, np.inf)

    for axis, (n, s) in ((2, (nx, sx)), (1, (ny, sy)), (0, (nz, sz))):
        if n == 1:
            continue
        moved = np.moveaxis(d, axis, -1)  # (..., n)
        idx = np.arange(n, dtype=np.float64)
        diff = (idx[:, None] - idx[None, :]) * s
        cost = diff * diff  # (n_out, n_src)
        flat = moved.reshape(-1, n)
        out = np.empty_like(flat)
        step = max(1, 2_000_000 // (n * n))
        for start in range(0, flat.shape[0], step):
            block = flat[start : start + step]
            out[start : start + step] = np.min(
                block[:, None, :] + cost[None, :, :], axis=2
            )
        d = np.moveaxis(out.reshape(moved.shape), -1, axis)
    return d


def _spd_solve(m, rhs):
    return np.linalg.solve(m, rhs)


def _entrywise_pow(m, beta):
    # integer exponents via repeated multiply, matching the C kernel exactly
    if beta == 1.0:
        return m
    if beta == 2.0:
        return m * m
    return m**beta


def jlf_fuse(target, atlas_imgs, atlas_labels, rp, rs, beta, eps, z_lo, z_hi, num_labels=5):
    """Joint label fusion over the axial slab [z_lo, z_hi).

    Returns (labels, votes) for the slab, shapes (z_hi-z_lo, ny, nx) and
    (num_labels, z_hi-z_lo, ny, nx). Unanimous voxels are emitted directly;
    the remaining ones run local search, the pairwise-residual dependency
    matrix and the regularized joint weight solve.
    """
    t = np.asarray(target, dtype=np.float64)
    aimg = np.asarray(atlas_imgs, dtype=np.float64)
    alab = np.asarray(atlas_labels)
    na, nz, ny, nx = aimg.shape
    out_lab = np.zeros((z_hi - z_lo, ny, nx), dtype=np.uint8)
    votes = np.zeros((num_labels, z_hi - z_lo, ny, nx), dtype=np.float32)

    offs = [
        (ox, oy, oz)
        for ox in range(-rs, rs + 1)
        for oy in range(-rs, rs + 1)
        for oz in range(-rs, rs + 1)
    ]
    offs.sort()
    pr = range(-rp, rp + 1)

    def patch(vol, cx, cy, cz):
        xi = np.clip(np.array([cx + p for p in pr]), 0, nx - 1)
        yi = np.clip(np.array([cy + p for p in pr]), 0, ny - 1)
        zi = np.clip(np.array([cz + p for p in pr]), 0, nz - 1)
        return vol[np.ix_(zi, yi, xi)].ravel()

    rhs = np.ones(na, dtype=np.float64)
    for z in range(z_lo, z_hi):
        for y in range(ny):
            for x in range(nx):
                lvals = alab[:, z, y, x]
                if np.all(lvals == lvals[0]):
                    out_lab[z - z_lo, y, x] = lvals[0]
                    votes[lvals[0], z - z_lo, y, x] = 1.0
                    continue
                tp = patch(t, x, y, z)
                best_offs = []
                residuals = np.empty((na, tp.size), dtype=np.float64)
                for i in range(na):
                    best = np.inf
                    best_o = (0, 0, 0)
                    for ox, oy, oz in offs:
                        ap = patch(aimg[i], x + ox, y + oy, z + oz)
                        sad = float(np.sum(np.abs(ap - tp)))
                        if sad < best:
                            best = sad
                            best_o = (ox, oy, oz)
                    best_offs.append(best_o)
                    ap = patch(aimg[i], x + best_o[0], y + best_o[1], z + best_o[2])
                    residuals[i] = ap - tp
                absr = np.abs(residuals)
                m = absr @ absr.T
                m = _entrywise_pow(m, beta)
                m[np.arange(na), np.arange(na)] += eps
                w = _spd_solve(m, rhs)
                w = w / w.sum()
                vote = np.zeros(num_labels, dtype=np.float64)
                for i, (ox, oy, oz) in enumerate(best_offs):
                    li = alab[
                        i,
                        min(max(z + oz, 0), nz - 1),
                        min(max(y + oy, 0), ny - 1),
                        min(max(x + ox, 0), nx - 1),
                    ]
                    vote[li] += w[i]
                votes[:, z - z_lo, y, x] = vote
                out_lab[z - z_lo, y, x] = int(np.argmax(vote))
    return out_lab, votes
