"""Apply an estimated transform to points, template masks and dense images.

The transform maps reference coordinates to target coordinates. Masks drawn
on the reference are pushed forward vertex by vertex; image alignment samples
the target at the transformed reference pixel centers, which yields a target
image re-gridded onto the reference geometry.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .geometry import Polygon, simplicity_violation
from .grids import IntensityGrid
from .masks import Blob, TemplateMask
from .registration import HybridTransform

#: Cap on the size of one query-by-basis kernel block (floats) when warping
#: dense grids, to bound peak memory.
_KERNEL_BLOCK = 4_000_000


def transform_points(transform: HybridTransform, pts) -> np.ndarray:
    """Transform arbitrary (K, 2) retention-coordinate points.

    Non-rigid axes use the out-of-sample kernel extension: the displacement at
    p is the kernel between p and the basis points applied to the fitted
    weights, which reproduces the registration's displacement exactly at the
    basis points themselves.
    """
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("points must be K x 2")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points must be finite")
    out = transform.apply(pts)
    return out[0] if single else out


def warp_mask(
    transform: HybridTransform, mask: TemplateMask
) -> tuple[TemplateMask, list[str]]:
    """Map every blob polygon vertex-wise; names and families are preserved.

    A blob whose polygon self-intersects after warping is still emitted, with
    a warning naming it; callers decide whether that needs manual fixing.
    """
    blobs = []
    warnings: list[str] = []
    for blob in mask.blobs:
        verts = transform_points(transform, blob.polygon.vertices)
        err = simplicity_violation(verts)
        if err is not None:
            warnings.append(f"blob {blob.name!r}: polygon degenerate after warp ({err})")
            poly = Polygon.unchecked(verts)
        else:
            poly = Polygon(verts)
        blobs.append(Blob(blob.name, blob.family, poly))
    return TemplateMask(tuple(blobs)), warnings


def bilinear_sample(grid: IntensityGrid, p) -> float:
    """Sample one point (axis1, axis2); out-of-range points return 0."""
    return float(bilinear_sample_many(grid, np.asarray(p, dtype=float)[None, :])[0])


def bilinear_sample_many(grid: IntensityGrid, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation at many (axis1, axis2) points.

    Values are convex combinations of the four surrounding pixels, exact at
    pixel centers; queries outside the pixel-center hull return the fill
    value 0.
    """
    rows, cols = grid.coords_to_index(np.asarray(pts, dtype=float))
    nr, nc = grid.shape
    inside = (rows >= 0) & (rows <= nr - 1) & (cols >= 0) & (cols <= nc - 1)
    r = np.clip(rows, 0, nr - 1)
    c = np.clip(cols, 0, nc - 1)
    r0 = np.minimum(np.floor(r).astype(int), nr - 2)
    c0 = np.minimum(np.floor(c).astype(int), nc - 2)
    fr = r - r0
    fc = c - c0
    v = grid.values
    val = (
        v[r0, c0] * (1 - fr) * (1 - fc)
        + v[r0, c0 + 1] * (1 - fr) * fc
        + v[r0 + 1, c0] * fr * (1 - fc)
        + v[r0 + 1, c0 + 1] * fr * fc
    )
    return np.where(inside, val, 0.0)


def warp_image(
    transform: HybridTransform,
    target: IntensityGrid,
    reference_geometry: IntensityGrid,
) -> IntensityGrid:
    """Resample the target on the reference geometry through the transform.

    For every reference pixel center u the output holds the bilinear sample
    of the target at transform(u); samples falling outside the target get 0.
    The result carries the reference's shape and axis calibration.
    """
    nr, nc = reference_geometry.shape
    out = np.empty((nr, nc), dtype=float)
    m = 1 if transform.basis is None else transform.basis.basis_points.shape[0]
    block = max(1, _KERNEL_BLOCK // max(m * nc, 1))
    cols = np.arange(nc)
    for r0 in range(0, nr, block):
        r1 = min(r0 + block, nr)
        rr, cc = np.meshgrid(np.arange(r0, r1), cols, indexing="ij")
        pts = reference_geometry.index_to_coords(rr.ravel(), cc.ravel())
        warped = transform.apply(pts)
        out[r0:r1, :] = bilinear_sample_many(target, warped).reshape(r1 - r0, nc)
    return reference_geometry.with_values(out)
