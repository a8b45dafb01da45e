"""Peak centroid extraction from h-maxima regions.

Each connected h-maxima region contributes exactly one centroid: the
intensity-weighted mean of its pixel coordinates, converted to retention
units. The reported intensity is the region's maximum on the original grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptyPeakSetError, FormatError, InputError, ValidationError
from .grids import IntensityGrid
from .masks import AreaOfInterest
from .geometry import points_in_polygon
from .morphology import h_maxima_regions

PEAKS_CSV_HEADER = "axis1,axis2,intensity"


@dataclass(frozen=True)
class PeakSet:
    """Peak centroids in retention coordinates.

    points : (N, 2) array of (axis1 minutes, axis2 seconds)
    intensities : (N,) non-negative reals
    source_indices : (N, 2) int array of grid (row, col) apex positions, or
        None for synthetic clouds that never touched a grid.
    """

    points: np.ndarray
    intensities: np.ndarray
    source_indices: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError("peak points must be an N x 2 array")
        if pts.shape[0] < 1:
            raise ValidationError("peak set must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("peak coordinates must be finite")
        inten = np.asarray(self.intensities, dtype=float)
        if inten.shape != (pts.shape[0],):
            raise ValidationError("intensities must be a vector matching points")
        if (inten < 0).any() or not np.all(np.isfinite(inten)):
            raise ValidationError("intensities must be finite and non-negative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "intensities", inten)
        if self.source_indices is not None:
            idx = np.asarray(self.source_indices, dtype=int)
            if idx.shape != pts.shape:
                raise ValidationError("source_indices must match points")
            object.__setattr__(self, "source_indices", idx)

    def __len__(self) -> int:
        return self.points.shape[0]


def extract_peaks(
    grid: IntensityGrid,
    h: float,
    aoi: AreaOfInterest | None = None,
    connectivity: int = 8,
) -> PeakSet:
    """Extract one centroid per h-maxima region, optionally restricted to an AOI.

    Parameters
    ----------
    grid : IntensityGrid
    h : positive dynamic threshold (same units as grid values).
    aoi : optional polygon filter; centroids outside it are discarded.
    connectivity : 4 or 8.

    Raises
    ------
    EmptyPeakSetError
        When no region survives (h too high, or the AOI excludes everything).
    """
    regions = h_maxima_regions(grid.values, h, connectivity)
    structure = np.ones((3, 3)) if connectivity == 8 else None
    labels, count = ndimage.label(regions, structure=structure)
    if count == 0:
        raise EmptyPeakSetError(f"no maxima with dynamic above h={h}")

    values = grid.values
    points = []
    intensities = []
    indices = []
    for lab in range(1, count + 1):
        rr, cc = np.nonzero(labels == lab)
        weights = values[rr, cc]
        total = weights.sum()
        if total > 0:
            r_mean = float((weights * rr).sum() / total)
            c_mean = float((weights * cc).sum() / total)
        else:  # all-zero plateau: fall back to the geometric barycenter
            r_mean = float(rr.mean())
            c_mean = float(cc.mean())
        apex = int(np.argmax(weights))
        points.append(grid.index_to_coords(r_mean, c_mean))
        intensities.append(float(weights.max()))
        indices.append((int(rr[apex]), int(cc[apex])))

    points = np.asarray(points, dtype=float)
    intensities = np.asarray(intensities, dtype=float)
    indices = np.asarray(indices, dtype=int)

    if aoi is not None:
        keep = points_in_polygon(points, aoi.polygon)
        if not keep.any():
            raise EmptyPeakSetError("no centroid falls inside the area of interest")
        points, intensities, indices = points[keep], intensities[keep], indices[keep]

    order = np.lexsort((points[:, 1], points[:, 0]))
    return PeakSet(points[order], intensities[order], indices[order])


def write_peaks_csv(peaks: PeakSet, path) -> None:
    lines = [PEAKS_CSV_HEADER]
    for (a1, a2), inten in zip(peaks.points, peaks.intensities):
        lines.append(f"{a1:.17g},{a2:.17g},{inten:.17g}")
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def read_peaks_csv(source) -> PeakSet:
    path = Path(source)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != PEAKS_CSV_HEADER:
        raise FormatError(f"{path}: expected header {PEAKS_CSV_HEADER!r}")
    pts = []
    inten = []
    for ln, line in enumerate(lines[1:], start=2):
        try:
            a1, a2, v = (float(tok) for tok in line.split(","))
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: malformed peak row") from exc
        pts.append((a1, a2))
        inten.append(v)
    if not pts:
        raise FormatError(f"{path}: no peaks in file")
    return PeakSet(np.asarray(pts), np.asarray(inten))
