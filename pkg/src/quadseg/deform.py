"""Cubic B-spline free-form deformation: fields, warping, random warps.

A field is a lattice of control-point displacement vectors. The deformation
at a world point x is the tensor-product cubic B-spline interpolation of the
4x4x4 surrounding control displacements, and volumes are warped backward:
the output voxel at x samples the input at x + displacement(x).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from quadseg._backend import get_kernels
from quadseg.volume import LabelVolume, Volume


class FieldDomainError(Exception):
    """Query point or parameter outside the valid domain."""


@dataclass
class BSplineField:
    grid_dims: tuple[int, int, int]      # control points per axis (gx, gy, gz)
    grid_spacing: tuple[float, float, float]  # mm per control cell
    grid_origin: tuple[float, float, float]   # world position of control point 0
    displacements: np.ndarray = dc_field(repr=False)  # (gz, gy, gx, 3) mm

    def __post_init__(self):
        gx, gy, gz = self.grid_dims
        if min(gx, gy, gz) < 4:
            raise FieldDomainError(f"grid needs >= 4 control points per axis, got {self.grid_dims}")
        self.displacements = np.ascontiguousarray(self.displacements, dtype=np.float64)
        if self.displacements.shape != (gz, gy, gx, 3):
            raise FieldDomainError(
                f"displacement lattice shape {self.displacements.shape} != {(gz, gy, gx, 3)}"
            )
        if not np.all(np.isfinite(self.displacements)):
            raise FieldDomainError("non-finite control displacement")

    def copy(self) -> "BSplineField":
        return BSplineField(
            self.grid_dims, self.grid_spacing, self.grid_origin, self.displacements.copy()
        )


def bspline_weights(u: float) -> tuple[float, float, float, float]:
    """Uniform cubic B-spline basis values at fractional position u in [0, 1)."""
    if not (0.0 <= u < 1.0):
        raise FieldDomainError(f"u={u} outside [0, 1)")
    t = 1.0 - u
    b0 = t * t * t / 6.0
    b1 = (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0
    b2 = (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0
    b3 = u * u * u / 6.0
    return b0, b1, b2, b3


def field_for_geometry(
    dims, spacing, origin=(0.0, 0.0, 0.0), grid_spacing_mm: float = 16.0
) -> BSplineField:
    """Zero field whose lattice covers the volume plus a one-cell margin."""
    gdims = []
    gorigin = []
    for n, s, o in zip(dims, spacing, origin):
        extent = (n - 1) * s
        # voxel x=0 maps to grid coordinate 1; the far edge needs index+2 inside
        gdims.append(int(np.ceil(extent / grid_spacing_mm)) + 5)
        gorigin.append(o - grid_spacing_mm)
    gx, gy, gz = gdims
    disp = np.zeros((gz, gy, gx, 3), dtype=np.float64)
    return BSplineField(
        (gx, gy, gz),
        (grid_spacing_mm, grid_spacing_mm, grid_spacing_mm),
        tuple(gorigin),
        disp,
    )


def _coverage_ok(f: BSplineField, points: np.ndarray) -> bool:
    g = (points - np.asarray(f.grid_origin)) / np.asarray(f.grid_spacing)
    i0 = np.floor(g)
    gd = np.asarray(f.grid_dims, dtype=np.float64)
    return bool(np.all(i0 >= 1) and np.all(i0 + 2 <= gd - 1))


def displacement_at(f: BSplineField, point) -> np.ndarray:
    """Displacement (mm, xyz) at one world point."""
    pts = np.asarray(point, dtype=np.float64).reshape(1, 3)
    if not _coverage_ok(f, pts):
        raise FieldDomainError(f"point {point} outside grid coverage")
    k = get_kernels()
    return k.bspline_displacement(pts, f.grid_origin, f.grid_spacing, f.displacements)[0]


def displacement_field(f: BSplineField, points: np.ndarray) -> np.ndarray:
    """Displacements at many world points, shape (n, 3)."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if not _coverage_ok(f, pts):
        raise FieldDomainError("points outside grid coverage")
    k = get_kernels()
    return k.bspline_displacement(pts, f.grid_origin, f.grid_spacing, f.displacements)


def _check_volume_coverage(v, f: BSplineField):
    corners = np.array(
        [
            [
                v.origin[0] + ix * v.spacing[0] * (v.dims[0] - 1),
                v.origin[1] + iy * v.spacing[1] * (v.dims[1] - 1),
                v.origin[2] + iz * v.spacing[2] * (v.dims[2] - 1),
            ]
            for ix in (0, 1)
            for iy in (0, 1)
            for iz in (0, 1)
        ]
    )
    if not _coverage_ok(f, corners):
        raise FieldDomainError("field does not cover the volume")


def apply_warp(
    v: Volume | LabelVolume, f: BSplineField, interp: str = "linear"
) -> Volume | LabelVolume:
    """Warp a volume through the field (backward sampling).

    Intensity volumes use linear interpolation, label volumes must use
    nearest; out-of-volume samples become background (0).
    """
    if interp not in ("linear", "nearest"):
        raise ValueError(f"interp must be 'linear' or 'nearest', got {interp!r}")
    if v.kind == "label" and interp != "nearest":
        raise ValueError("label volumes must be warped with nearest interpolation")
    _check_volume_coverage(v, f)
    k = get_kernels()
    warped = k.warp_volume(
        v.data,
        interp == "nearest",
        v.spacing,
        v.origin,
        f.grid_origin,
        f.grid_spacing,
        f.displacements,
    )
    return v.copy_with(warped)


def random_field(
    dims,
    spacing,
    origin=(0.0, 0.0, 0.0),
    grid_spacing_mm: float = 16.0,
    max_disp: float = 4.0,
    seed: int = 0,
) -> BSplineField:
    """i.i.d. uniform control displacements in [-max_disp, +max_disp]^3.

    max_disp is capped at 0.4x the control spacing, which keeps the warp
    fold-free (positive Jacobian everywhere).
    """
    if max_disp < 0:
        raise FieldDomainError("max_disp must be >= 0")
    if max_disp > 0.4 * grid_spacing_mm:
        raise FieldDomainError(
            f"max_disp {max_disp} exceeds fold-free bound {0.4 * grid_spacing_mm}"
        )
    f = field_for_geometry(dims, spacing, origin, grid_spacing_mm)
    rng = np.random.default_rng(seed)
    f.displacements[...] = rng.uniform(-max_disp, max_disp, size=f.displacements.shape)
    return f


def subdivide_field(f: BSplineField) -> BSplineField:
    """Halve the control spacing without changing the deformation.

    Exact dyadic refinement of uniform cubic B-splines: even points take
    (1, 6, 1)/8 of their neighbors, odd points (1, 1)/2. One extrapolated
    control point is appended per side first so the edge stencils are
    well-defined; those pads only influence the lattice outside the
    originally covered domain, so the warp is reproduced exactly inside it.
    """
    d = f.displacements

    def refine(arr, axis):
        a = np.moveaxis(arr, axis, 0)
        n = a.shape[0]
        lo = (2.0 * a[0] - a[1])[None]
        hi = (2.0 * a[-1] - a[-2])[None]
        e = np.concatenate([lo, a, hi], axis=0)
        even = (e[:-2] + 6.0 * e[1:-1] + e[2:]) / 8.0  # at old integer positions
        odd = (e[1:-2] + e[2:-1]) / 2.0                # at old half positions
        out = np.empty((2 * n - 1,) + a.shape[1:], dtype=arr.dtype)
        out[0::2] = even
        out[1::2] = odd
        return np.moveaxis(out, 0, axis)

    r = refine(refine(refine(d, 0), 1), 2)
    gx, gy, gz = f.grid_dims
    new_dims = (2 * gx - 1, 2 * gy - 1, 2 * gz - 1)
    new_spacing = tuple(s / 2.0 for s in f.grid_spacing)
    return BSplineField(new_dims, new_spacing, f.grid_origin, r)
