"""Segmentation metrics: per-label Dice, Hausdorff distance and mean absolute
surface distance, in 3-D or averaged over 2-D axial slices.

Distances are surface-to-surface in mm with anisotropic spacing. HD/MAD for a
label present in only one volume are undefined and reported as None, never as
a sentinel number.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from quadseg._backend import get_kernels
from quadseg.volume import LabelVolume, ShapeError

FOREGROUND_LABELS = (1, 2, 3, 4)


def dice(a: LabelVolume, b: LabelVolume, label: int) -> float:
    """Overlap 2|A∩B| / (|A|+|B|); defined as 1.0 when both sets are empty."""
    if not a.same_geometry(b):
        raise ShapeError("dice: geometry mismatch")
    ma = a.data == label
    mb = b.data == label
    na = int(ma.sum())
    nb = int(mb.sum())
    if na == 0 and nb == 0:
        return 1.0
    inter = int(np.logical_and(ma, mb).sum())
    return 2.0 * inter / (na + nb)


def _surface_mask_3d(mask: np.ndarray) -> np.ndarray:
    """Voxels of the set with a 6-face neighbor outside it (or on the border)."""
    if not mask.any():
        return np.zeros_like(mask)
    p = np.pad(mask, 1, constant_values=False)
    all_n = (
        p[:-2, 1:-1, 1:-1]
        & p[2:, 1:-1, 1:-1]
        & p[1:-1, :-2, 1:-1]
        & p[1:-1, 2:, 1:-1]
        & p[1:-1, 1:-1, :-2]
        & p[1:-1, 1:-1, 2:]
    )
    return mask & ~all_n


def _surface_mask_2d(mask: np.ndarray) -> np.ndarray:
    """2-D variant with 4-neighbors."""
    if not mask.any():
        return np.zeros_like(mask)
    p = np.pad(mask, 1, constant_values=False)
    all_n = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    return mask & ~all_n


def surface_voxels(v: LabelVolume, label: int) -> np.ndarray:
    """Boolean (nz, ny, nx) mask of the label's surface voxels."""
    return _surface_mask_3d(v.data == label)


def _directed_distances(surf_from: np.ndarray, surf_to: np.ndarray, spacing_xyz):
    """Distance in mm from every voxel of surf_from to the nearest surf_to voxel."""
    d2 = get_kernels().edt_sq(surf_to, spacing_xyz)
    return np.sqrt(d2[surf_from])


def _surface_metrics(ma: np.ndarray, mb: np.ndarray, spacing_xyz, ndim: int):
    """(hd, mad) for two same-shaped masks; None when exactly one is empty."""
    ea, eb = not ma.any(), not mb.any()
    if ea and eb:
        return 0.0, 0.0
    if ea or eb:
        return None, None
    surf = _surface_mask_2d if ndim == 2 else _surface_mask_3d
    if ndim == 2:
        sa = surf(ma)[None]
        sb = surf(mb)[None]
    else:
        sa = surf(ma)
        sb = surf(mb)
    dab = _directed_distances(sa, sb, spacing_xyz)
    dba = _directed_distances(sb, sa, spacing_xyz)
    hd = max(float(dab.max()), float(dba.max()))
    mad = 0.5 * (float(dab.mean()) + float(dba.mean()))
    return hd, mad


def hausdorff(a: LabelVolume, b: LabelVolume, label: int) -> float | None:
    """Symmetric surface Hausdorff distance in mm; None if the label exists in
    exactly one volume, 0.0 if in neither."""
    if not a.same_geometry(b):
        raise ShapeError("hausdorff: geometry mismatch")
    hd, _ = _surface_metrics(a.data == label, b.data == label, a.spacing, 3)
    return hd


def mad(a: LabelVolume, b: LabelVolume, label: int) -> float | None:
    """Symmetric mean surface distance in mm: the average of the two directed
    mean surface-to-surface distances."""
    if not a.same_geometry(b):
        raise ShapeError("mad: geometry mismatch")
    _, m = _surface_metrics(a.data == label, b.data == label, a.spacing, 3)
    return m


@dataclass
class MetricsReport:
    mode: str  # "3d" | "slicewise2d"
    labels: tuple[int, ...]
    per_label: dict[int, dict[str, float | None]]
    per_slice: list[dict] = field(default_factory=list)

    def mean_of(self, key: str) -> float | None:
        vals = [self.per_label[l][key] for l in self.labels]
        vals = [v for v in vals if v is not None]
        if not vals:
            return None
        return float(np.mean(vals))

    @property
    def mean_dice(self) -> float | None:
        return self.mean_of("dice")


def volume_metrics(
    a: LabelVolume, b: LabelVolume, labels=FOREGROUND_LABELS
) -> MetricsReport:
    """Full 3-D report for the given foreground labels."""
    if not a.same_geometry(b):
        raise ShapeError("volume_metrics: geometry mismatch")
    per = {}
    for lab in labels:
        ma = a.data == lab
        mb = b.data == lab
        hd, md = _surface_metrics(ma, mb, a.spacing, 3)
        per[lab] = {"dice": dice(a, b, lab), "hd": hd, "mad": md}
    return MetricsReport("3d", tuple(labels), per)


def slicewise_metrics(
    a: LabelVolume, b: LabelVolume, labels=FOREGROUND_LABELS, slice_ids=None
) -> MetricsReport:
    """2-D metrics per axial slice, averaged per label over contributing slices.

    A slice contributes to a label's Dice unless the label is absent from both
    planes, and to HD/MAD only when the label is present in both (distance is
    undefined otherwise).
    """
    if not a.same_geometry(b):
        raise ShapeError("slicewise_metrics: geometry mismatch")
    nz = a.dims[2]
    if slice_ids is None:
        slice_ids = range(nz)
    slice_ids = list(slice_ids)
    if not slice_ids:
        raise ValueError("slicewise_metrics: slice_ids is empty")
    sp2 = (a.spacing[0], a.spacing[1], 1.0)

    acc = {lab: {"dice": [], "hd": [], "mad": []} for lab in labels}
    rows = []
    for k in slice_ids:
        pa = a.data[k]
        pb = b.data[k]
        for lab in labels:
            ma = pa == lab
            mb = pb == lab
            ea, eb = not ma.any(), not mb.any()
            if ea and eb:
                continue
            inter = int(np.logical_and(ma, mb).sum())
            dv = 2.0 * inter / (int(ma.sum()) + int(mb.sum()))
            acc[lab]["dice"].append(dv)
            hd, md = _surface_metrics(ma, mb, sp2, 2)
            if hd is not None:
                acc[lab]["hd"].append(hd)
                acc[lab]["mad"].append(md)
            rows.append({"slice": k, "label": lab, "dice": dv, "hd": hd, "mad": md})

    per = {}
    for lab in labels:
        per[lab] = {
            key: (float(np.mean(vals)) if vals else None)
            for key, vals in acc[lab].items()
        }
    return MetricsReport("slicewise2d", tuple(labels), per, rows)


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    return "undefined" if v is None else f"{v:.6f}"


def report_rows(case: str, method: str, report: MetricsReport) -> list[tuple]:
    """Flatten to (case, method, label, dice, hd_mm, mad_mm, mode) tuples,
    one per label plus a 'mean' aggregate row."""
    rows = []
    for lab in report.labels:
        e = report.per_label[lab]
        rows.append(
            (case, method, str(lab), _fmt(e["dice"]), _fmt(e["hd"]), _fmt(e["mad"]), report.mode)
        )
    rows.append(
        (
            case,
            method,
            "mean",
            _fmt(report.mean_of("dice")),
            _fmt(report.mean_of("hd")),
            _fmt(report.mean_of("mad")),
            report.mode,
        )
    )
    return rows


def rows_to_csv(rows: list[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case", "method", "label", "dice", "hd_mm", "mad_mm", "mode"])
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def comparison_markdown(table: dict[str, dict[str, dict[str, float | None]]]) -> str:
    """Markdown comparison table: metric blocks x methods, one column per
    test group. ``table[metric][method][group]`` holds the aggregate value."""
    groups = []
    for methods in table.values():
        for vals in methods.values():
            for g in vals:
                if g not in groups:
                    groups.append(g)
    lines = ["| Metric | Method | " + " | ".join(groups) + " |"]
    lines.append("|---" * (len(groups) + 2) + "|")
    for metric, methods in table.items():
        for method, vals in methods.items():
            cells = [_fmt(vals.get(g)) for g in groups]
            lines.append(f"| {metric} | {method} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
