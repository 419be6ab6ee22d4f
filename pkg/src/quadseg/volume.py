"""3-D intensity/label volumes, axial slicing, mirroring and QVOL file I/O.

Conventions used throughout the package:
  * arrays are stored as ``data[z, y, x]`` so that ``data[k]`` is axial slice k
  * ``dims`` is always reported as ``(nx, ny, nz)``, ``spacing`` as
    ``(sx, sy, sz)`` in mm, ``origin`` as ``(ox, oy, oz)`` in mm
  * the on-disk payload is x-fastest, which is exactly the C-order ravel of
    a ``(nz, ny, nx)`` array.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

NUM_LABELS = 5  # background + 4 muscle heads
QVOL_MAGIC = b"QVOL"


class VolumeError(Exception):
    """Base class for volume-related failures."""


class QvolFormatError(VolumeError):
    """Malformed QVOL header; carries the offending field name."""

    def __init__(self, fieldname: str, message: str):
        self.fieldname = fieldname
        super().__init__(f"bad QVOL field '{fieldname}': {message}")


class QvolTruncationError(VolumeError):
    """Payload length does not match the header dims."""


class LabelDomainError(VolumeError):
    """Label value outside {0..4}."""


class ShapeError(VolumeError):
    """Inconsistent geometry between volumes or slices."""


def _check_geometry(dims, spacing, origin):
    if len(dims) != 3 or any(int(d) <= 0 for d in dims):
        raise VolumeError(f"dims must be three positive ints, got {dims}")
    if len(spacing) != 3 or any(not (float(s) > 0) for s in spacing):
        raise VolumeError(f"spacing must be three positive floats, got {spacing}")
    if len(origin) != 3:
        raise VolumeError(f"origin must have three components, got {origin}")


@dataclass
class Volume:
    """Scalar intensity volume (float32), immutable by convention."""

    dims: tuple[int, int, int]          # (nx, ny, nz)
    spacing: tuple[float, float, float]  # mm
    origin: tuple[float, float, float]   # mm
    data: np.ndarray = field(repr=False)  # shape (nz, ny, nx), float32

    def __post_init__(self):
        _check_geometry(self.dims, self.spacing, self.origin)
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        nx, ny, nz = self.dims
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.shape != (nz, ny, nx):
            if self.data.size == nx * ny * nz:
                self.data = self.data.reshape(nz, ny, nx)
            else:
                raise ShapeError(
                    f"data has {self.data.size} values, dims {self.dims} need {nx * ny * nz}"
                )
        if not np.all(np.isfinite(self.data)):
            raise VolumeError("volume contains non-finite intensities")

    @property
    def kind(self) -> str:
        return "intensity"

    def same_geometry(self, other) -> bool:
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.origin == other.origin
        )

    def copy_with(self, data: np.ndarray) -> "Volume":
        return Volume(self.dims, self.spacing, self.origin, data)


@dataclass
class LabelVolume:
    """Integer label volume, values restricted to {0..4}."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    data: np.ndarray = field(repr=False)  # shape (nz, ny, nx), uint8

    def __post_init__(self):
        _check_geometry(self.dims, self.spacing, self.origin)
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        nx, ny, nz = self.dims
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise LabelDomainError("label values outside uint8 range")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr)
        if arr.shape != (nz, ny, nx):
            if arr.size == nx * ny * nz:
                arr = arr.reshape(nz, ny, nx)
            else:
                raise ShapeError(
                    f"labels have {arr.size} values, dims {self.dims} need {nx * ny * nz}"
                )
        if arr.max(initial=0) >= NUM_LABELS:
            raise LabelDomainError(
                f"label value {int(arr.max())} outside 0..{NUM_LABELS - 1}"
            )
        self.data = arr

    @property
    def kind(self) -> str:
        return "label"

    def same_geometry(self, other) -> bool:
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.origin == other.origin
        )

    def copy_with(self, data: np.ndarray) -> "LabelVolume":
        return LabelVolume(self.dims, self.spacing, self.origin, data)


@dataclass
class Slice2D:
    """Single axial plane extracted from a volume."""

    dims: tuple[int, int]            # (nx, ny)
    spacing: tuple[float, float]     # (sx, sy) mm
    data: np.ndarray                 # shape (ny, nx)
    slice_index: int

    def __post_init__(self):
        nx, ny = self.dims
        if self.data.shape != (ny, nx):
            raise ShapeError(f"slice data shape {self.data.shape} != (ny={ny}, nx={nx})")


def extract_axial_slices(v: Volume | LabelVolume) -> list[Slice2D]:
    """Split a volume into its nz axial planes, in increasing z order."""
    nx, ny, nz = v.dims
    sx, sy, _ = v.spacing
    return [Slice2D((nx, ny), (sx, sy), v.data[k], k) for k in range(nz)]


def restack(
    slices: list[Slice2D],
    spacing_z: float,
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> Volume | LabelVolume:
    """Inverse of extract_axial_slices; slice order defines increasing z."""
    if not slices:
        raise ShapeError("cannot restack an empty slice list")
    first = slices[0]
    for s in slices[1:]:
        if s.dims != first.dims or s.spacing != first.spacing:
            raise ShapeError(
                f"heterogeneous slices: {s.dims}/{s.spacing} vs {first.dims}/{first.spacing}"
            )
    nx, ny = first.dims
    data = np.stack([s.data for s in slices], axis=0)
    dims = (nx, ny, len(slices))
    spacing = (first.spacing[0], first.spacing[1], float(spacing_z))
    if data.dtype == np.uint8:
        return LabelVolume(dims, spacing, origin, data)
    return Volume(dims, spacing, origin, data)


def mirror_x(v: Volume | LabelVolume) -> Volume | LabelVolume:
    """Reflect along x. Applying twice gives back the original volume."""
    return v.copy_with(v.data[:, :, ::-1].copy())


# ---------------------------------------------------------------------------
# QVOL file format
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = ("dims", "spacing", "origin", "dtype", "kind")


def save_volume(v: Volume | LabelVolume, path) -> None:
    dtype = "u8" if v.kind == "label" else "f32"
    header = {
        "dims": list(v.dims),
        "spacing": list(v.spacing),
        "origin": list(v.origin),
        "dtype": dtype,
        "kind": v.kind,
    }
    hbytes = json.dumps(header).encode("utf-8")
    if v.kind == "label":
        payload = v.data.tobytes()
    else:
        payload = v.data.astype("<f4", copy=False).tobytes()
    with open(path, "wb") as f:
        f.write(QVOL_MAGIC)
        f.write(struct.pack("<I", len(hbytes)))
        f.write(hbytes)
        f.write(payload)


def load_volume(path) -> Volume | LabelVolume:
    """Read a QVOL file. Round-trips with save_volume bit-exactly."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8 or raw[:4] != QVOL_MAGIC:
        raise QvolFormatError("magic", "file does not start with QVOL")
    (hlen,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + hlen:
        raise QvolFormatError("header", "declared header length exceeds file size")
    try:
        header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise QvolFormatError("header", f"not valid UTF-8 JSON: {e}") from e
    for key in _REQUIRED_KEYS:
        if key not in header:
            raise QvolFormatError(key, "missing")

    dims = header["dims"]
    if (
        not isinstance(dims, list)
        or len(dims) != 3
        or any(not isinstance(d, int) or d <= 0 for d in dims)
    ):
        raise QvolFormatError("dims", f"need three positive ints, got {dims!r}")
    spacing = header["spacing"]
    if len(spacing) != 3 or any(not float(s) > 0 for s in spacing):
        raise QvolFormatError("spacing", f"need three positive numbers, got {spacing!r}")
    origin = header["origin"]
    if len(origin) != 3:
        raise QvolFormatError("origin", f"need three numbers, got {origin!r}")
    dtype = header["dtype"]
    kind = header["kind"]
    if kind not in ("intensity", "label"):
        raise QvolFormatError("kind", f"got {kind!r}")
    if dtype not in ("f32", "u8"):
        raise QvolFormatError("dtype", f"got {dtype!r}")
    if (kind == "label") != (dtype == "u8"):
        raise QvolFormatError("dtype", f"dtype {dtype!r} inconsistent with kind {kind!r}")

    nx, ny, nz = dims
    count = nx * ny * nz
    itemsize = 1 if dtype == "u8" else 4
    payload = raw[8 + hlen :]
    if len(payload) != count * itemsize:
        raise QvolTruncationError(
            f"payload has {len(payload) // itemsize} values, dims {tuple(dims)} need {count}"
        )
    if kind == "label":
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(nz, ny, nx)
        if arr.max(initial=0) >= NUM_LABELS:
            raise LabelDomainError(
                f"label file contains value {int(arr.max())} > {NUM_LABELS - 1}"
            )
        return LabelVolume(tuple(dims), tuple(spacing), tuple(origin), arr.copy())
    arr = np.frombuffer(payload, dtype="<f4").reshape(nz, ny, nx)
    return Volume(tuple(dims), tuple(spacing), tuple(origin), arr.copy())


def write_pgm_slice(s: Slice2D, path) -> None:
    """Export one slice as binary PGM (P5, maxval 255), min-max windowed."""
    plane = np.asarray(s.data, dtype=np.float64)
    lo, hi = float(plane.min()), float(plane.max())
    if hi > lo:
        scaled = np.round((plane - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(plane)
    ny, nx = plane.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        f.write(scaled.astype(np.uint8).tobytes())
