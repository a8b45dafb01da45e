"""Alignment scores (CC, SSIM over an AOI) and chemical-family quantification.

CC is the Pearson correlation of paired pixel intensities inside the AOI.
SSIM is the mean of local structural-similarity values over uniform windows
fully contained in the AOI, with the standard stabilization constants
C1 = (K1 L)^2 and C2 = (K2 L)^2. Window statistics are population moments
(uniform weights summing to one).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .geometry import points_in_polygon
from .grids import IntensityGrid
from .masks import AreaOfInterest, TemplateMask


def _same_geometry(a: IntensityGrid, b: IntensityGrid) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"grid shapes differ: {a.shape} vs {b.shape}")
    cal_a = (a.axis1_origin, a.axis1_step, a.axis2_origin, a.axis2_step)
    cal_b = (b.axis1_origin, b.axis1_step, b.axis2_origin, b.axis2_step)
    if cal_a != cal_b:
        raise ValidationError("grid axis calibrations differ")


def aoi_pixel_mask(grid: IntensityGrid, aoi: AreaOfInterest | None) -> np.ndarray:
    """Boolean mask of pixels whose centers fall inside the AOI polygon."""
    if aoi is None:
        return np.ones(grid.shape, dtype=bool)
    nr, nc = grid.shape
    lo1, lo2, hi1, hi2 = aoi.polygon.bounds
    r_lo, c_lo = grid.coords_to_index(np.array([lo1, lo2]))
    r_hi, c_hi = grid.coords_to_index(np.array([hi1, hi2]))
    r0 = max(int(np.floor(r_lo)), 0)
    r1 = min(int(np.ceil(r_hi)), nr - 1)
    c0 = max(int(np.floor(c_lo)), 0)
    c1 = min(int(np.ceil(c_hi)), nc - 1)
    out = np.zeros(grid.shape, dtype=bool)
    if r0 > r1 or c0 > c1:
        return out
    rr, cc = np.meshgrid(np.arange(r0, r1 + 1), np.arange(c0, c1 + 1), indexing="ij")
    pts = grid.index_to_coords(rr.ravel(), cc.ravel())
    out[r0 : r1 + 1, c0 : c1 + 1] = points_in_polygon(pts, aoi.polygon).reshape(
        rr.shape
    )
    return out


def correlation_coefficient(
    a: IntensityGrid, b: IntensityGrid, aoi: AreaOfInterest | None = None
) -> float:
    """Pearson correlation of the two grids over the AOI pixel set."""
    _same_geometry(a, b)
    sel = aoi_pixel_mask(a, aoi)
    if sel.sum() < 2:
        raise UndefinedMetricError("correlation needs at least 2 AOI pixels")
    va = a.values[sel]
    vb = b.values[sel]
    da = va - va.mean()
    db = vb - vb.mean()
    na = float(da @ da)
    nb = float(db @ db)
    if na == 0.0 or nb == 0.0:
        raise UndefinedMetricError("correlation undefined on constant input")
    return float((da @ db) / np.sqrt(na * nb))


def ssim(
    a: IntensityGrid,
    b: IntensityGrid,
    aoi: AreaOfInterest | None = None,
    window: int = 8,
    k1: float = 0.01,
    k2: float = 0.03,
    dynamic_range: float | None = None,
) -> float:
    """Mean local SSIM over windows fully inside the AOI.

    ``dynamic_range`` defaults to the larger value range of the two grids on
    the AOI pixel set; it must be positive.
    """
    _same_geometry(a, b)
    if window < 2:
        raise ValidationError("window must span at least 2 pixels")
    nr, nc = a.shape
    if window > nr or window > nc:
        raise UndefinedMetricError("window larger than the grid")
    sel = aoi_pixel_mask(a, aoi)
    va = a.values
    vb = b.values
    if dynamic_range is None:
        if not sel.any():
            raise UndefinedMetricError("AOI contains no pixels")
        dynamic_range = max(np.ptp(va[sel]), np.ptp(vb[sel]))
    if dynamic_range <= 0:
        raise UndefinedMetricError("dynamic range must be positive (degenerate input)")

    # A window position is valid when every one of its pixels is in the AOI.
    counts = _window_counts(sel, window)
    valid = counts == window * window
    if not valid.any():
        raise UndefinedMetricError("AOI smaller than the SSIM window")

    mu_a = _window_mean(va, window)
    mu_b = _window_mean(vb, window)
    mean_aa = _window_mean(va * va, window)
    mean_bb = _window_mean(vb * vb, window)
    mean_ab = _window_mean(va * vb, window)
    var_a = mean_aa - mu_a * mu_a
    var_b = mean_bb - mu_b * mu_b
    cov = mean_ab - mu_a * mu_b
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    local = num / den
    return float(local[valid].mean())


def _window_mean(v: np.ndarray, window: int) -> np.ndarray:
    """Mean over every window position (top-left indexed).

    Direct window sums (blockwise sliding windows) rather than a summed-area
    table: prefix-sum cancellation on large grids would cost more precision
    than the windowed statistics can afford.
    """
    from numpy.lib.stride_tricks import sliding_window_view

    nr, nc = v.shape
    w = window
    out = np.empty((nr - w + 1, nc - w + 1))
    block = max(1, 2_000_000 // (nc * w * w))
    for r0 in range(0, out.shape[0], block):
        r1 = min(r0 + block, out.shape[0])
        win = sliding_window_view(v[r0 : r1 + w - 1, :], (w, w))
        out[r0:r1] = win.sum(axis=(2, 3)) / (w * w)
    return out


def _window_counts(mask: np.ndarray, window: int) -> np.ndarray:
    """Exact pixel counts per window position (integer summed-area table)."""
    nr, nc = mask.shape
    sat = np.zeros((nr + 1, nc + 1), dtype=np.int64)
    np.cumsum(mask.astype(np.int64), axis=0, out=sat[1:, 1:])
    np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
    w = window
    return sat[w:, w:] - sat[:-w, w:] - sat[w:, :-w] + sat[:-w, :-w]


@dataclass(frozen=True)
class AlignmentScore:
    """CC and SSIM computed over the same AOI pixel set."""

    cc: float
    ssim: float
    pixel_count: int


def alignment_score(
    a: IntensityGrid,
    b: IntensityGrid,
    aoi: AreaOfInterest | None = None,
    window: int = 8,
) -> AlignmentScore:
    """Both quality indices plus the size of the pixel set they share."""
    count = int(aoi_pixel_mask(a, aoi).sum())
    return AlignmentScore(
        cc=correlation_coefficient(a, b, aoi),
        ssim=ssim(a, b, aoi, window=window),
        pixel_count=count,
    )


@dataclass(frozen=True)
class QuantReport:
    """Per-blob volumes and per-family weight percentages."""

    per_blob: dict[str, float]
    per_family: dict[str, float]
    total_volume: float
    warnings: tuple[str, ...] = ()


def quantify(grid: IntensityGrid, mask: TemplateMask) -> QuantReport:
    """Integrate blob volumes and family weight percentages.

    Pixel membership is decided by the pixel center; a pixel claimed by
    several blobs goes to the first one in mask order and the overlap is
    reported as a warning. Volume is summed intensity times pixel area.
    """
    nr, nc = grid.shape
    pixel_area = grid.axis1_step * grid.axis2_step
    owner = np.full((nr, nc), -1, dtype=int)
    warnings: list[str] = []
    for bi, blob in enumerate(mask.blobs):
        lo1, lo2, hi1, hi2 = blob.polygon.bounds
        rows, cols = grid.coords_to_index(np.array([[lo1, lo2], [hi1, hi2]]))
        r0 = max(int(np.floor(rows[0])), 0)
        r1 = min(int(np.ceil(rows[1])), nr - 1)
        c0 = max(int(np.floor(cols[0])), 0)
        c1 = min(int(np.ceil(cols[1])), nc - 1)
        if r0 > r1 or c0 > c1:
            continue
        rr, cc = np.meshgrid(
            np.arange(r0, r1 + 1), np.arange(c0, c1 + 1), indexing="ij"
        )
        pts = grid.index_to_coords(rr.ravel(), cc.ravel())
        inside = points_in_polygon(pts, blob.polygon).reshape(rr.shape)
        region = owner[r0 : r1 + 1, c0 : c1 + 1]
        overlap = inside & (region >= 0)
        if overlap.any():
            prior = sorted({mask.blobs[i].name for i in np.unique(region[overlap])})
            warnings.append(
                f"blob {blob.name!r} overlaps {prior}; "
                f"{int(overlap.sum())} pixel(s) kept by the earlier blob"
            )
        region[inside & (region < 0)] = bi

    volumes = {}
    for bi, blob in enumerate(mask.blobs):
        sel = owner == bi
        volumes[blob.name] = float(grid.values[sel].sum() * pixel_area)
    total = float(sum(volumes.values()))
    if total <= 0.0:
        raise UndefinedMetricError("zero total volume: mask does not cover signal")
    per_family: dict[str, float] = {}
    for blob in mask.blobs:
        per_family[blob.family] = per_family.get(blob.family, 0.0) + volumes[blob.name]
    per_family = {fam: 100.0 * v / total for fam, v in per_family.items()}
    return QuantReport(volumes, per_family, total, tuple(warnings))


def compare_reports(a: QuantReport, b: QuantReport) -> tuple[dict[str, float], float]:
    """Per-family absolute weight-percent differences and their maximum.

    Families missing from one report count as zero percent there.
    """
    fams = sorted(set(a.per_family) | set(b.per_family))
    diffs = {
        f: abs(a.per_family.get(f, 0.0) - b.per_family.get(f, 0.0)) for f in fams
    }
    return diffs, max(diffs.values(), default=0.0)
