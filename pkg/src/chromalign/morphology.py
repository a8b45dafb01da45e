"""Grayscale morphological reconstruction and h-maxima region detection.

Reconstruction by dilation is the fixed point of geodesic dilation of a
marker image under a mask image. The production implementation uses the
hybrid sequential algorithm (one forward raster scan, one backward raster
scan, then FIFO propagation of the unstable front); it performs only min/max
moves of input values, so the result is bit-exact and matches the naive
iterate-until-stable definition used as the test oracle.

h-maxima regions of an image f are the regional maxima of the reconstruction
of f - h under f: exactly the maxima whose dynamic strictly exceeds h.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import ValidationError

_OFFSETS8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
_OFFSETS4 = ((-1, 0), (0, -1), (0, 1), (1, 0))


def _check_connectivity(connectivity: int) -> tuple[tuple[int, int], ...]:
    if connectivity == 8:
        return _OFFSETS8
    if connectivity == 4:
        return _OFFSETS4
    raise ValidationError("connectivity must be 4 or 8")


def _as_image(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2D array")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return arr


def reconstruct_by_dilation(marker, mask, connectivity: int = 8) -> np.ndarray:
    """Morphological reconstruction of ``marker`` under ``mask``.

    Parameters
    ----------
    marker, mask : 2D arrays of equal shape with marker <= mask pointwise.
    connectivity : 4 or 8, the pixel adjacency used for geodesic dilation.

    Returns
    -------
    The stable limit J of iterated geodesic dilations, with
    marker <= J <= mask pointwise.
    """
    offs = _check_connectivity(connectivity)
    marker = _as_image(marker, "marker")
    mask = _as_image(mask, "mask")
    if marker.shape != mask.shape:
        raise ValidationError(
            f"shape mismatch: marker {marker.shape} vs mask {mask.shape}"
        )
    if (marker > mask).any():
        raise ValidationError("marker must not exceed mask anywhere")

    j = marker.copy()
    rows, cols = j.shape

    # Forward raster scan: propagate from the already-visited neighborhood.
    for i in range(rows):
        row = j[i]
        if i > 0:
            prev = j[i - 1]
            cand = prev.copy()
            if connectivity == 8:
                np.maximum(cand[1:], prev[:-1], out=cand[1:])
                np.maximum(cand[:-1], prev[1:], out=cand[:-1])
            np.maximum(row, cand, out=row)
        mrow = mask[i]
        left = -np.inf
        for c in range(cols):
            v = row[c]
            if left > v:
                v = left
            mv = mrow[c]
            if v > mv:
                v = mv
            row[c] = v
            left = v

    # Backward raster scan.
    for i in range(rows - 1, -1, -1):
        row = j[i]
        if i < rows - 1:
            nxt = j[i + 1]
            cand = nxt.copy()
            if connectivity == 8:
                np.maximum(cand[1:], nxt[:-1], out=cand[1:])
                np.maximum(cand[:-1], nxt[1:], out=cand[:-1])
            np.maximum(row, cand, out=row)
        mrow = mask[i]
        right = -np.inf
        for c in range(cols - 1, -1, -1):
            v = row[c]
            if right > v:
                v = right
            mv = mrow[c]
            if v > mv:
                v = mv
            row[c] = v
            right = v

    # Queue every pixel whose backward neighborhood is still unstable; the
    # values are final for this scan, so a post-pass check is equivalent.
    seeds = np.zeros(j.shape, dtype=bool)
    for di, dc in offs:
        if (di, dc) <= (0, 0):
            continue
        src = np.s_[max(di, 0) : rows + min(di, 0), max(dc, 0) : cols + min(dc, 0)]
        dst = np.s_[max(-di, 0) : rows + min(-di, 0), max(-dc, 0) : cols + min(-dc, 0)]
        seeds[dst] |= (j[src] < j[dst]) & (j[src] < mask[src])
    queue: deque[tuple[int, int]] = deque(map(tuple, np.argwhere(seeds)))

    # FIFO propagation of the remaining unstable front.
    while queue:
        i, c = queue.popleft()
        v = j[i, c]
        for di, dc in offs:
            ni, nc = i + di, c + dc
            if 0 <= ni < rows and 0 <= nc < cols:
                nv = j[ni, nc]
                if nv < v and nv < mask[ni, nc]:
                    j[ni, nc] = v if v < mask[ni, nc] else mask[ni, nc]
                    queue.append((ni, nc))
    return j


def regional_maxima(image, connectivity: int = 8) -> np.ndarray:
    """Boolean map of regional maxima: connected constant-value plateaus whose
    external neighbors are all strictly lower.

    A plateau with no external neighbors (a constant image) has no surrounding
    saddle and is not reported as a maximum.
    """
    offs = _check_connectivity(connectivity)
    img = _as_image(image, "image")
    rows, cols = img.shape

    # A pixel stays a candidate while no strict neighbor exceeds it.
    cand = np.ones_like(img, dtype=bool)
    for di, dc in offs:
        src = img[
            max(di, 0) : rows + min(di, 0),
            max(dc, 0) : cols + min(dc, 0),
        ]
        dst = np.s_[
            max(-di, 0) : rows + min(-di, 0),
            max(-dc, 0) : cols + min(-dc, 0),
        ]
        cand[dst] &= img[dst] >= src
    if cand.all():
        return np.zeros_like(cand)  # constant image: no surrounding saddle

    # Suppress whole plateaus that touch a suppressed equal-valued pixel.
    seeds = np.zeros_like(cand)
    for di, dc in offs:
        src_slice = np.s_[
            max(di, 0) : rows + min(di, 0),
            max(dc, 0) : cols + min(dc, 0),
        ]
        dst = np.s_[
            max(-di, 0) : rows + min(-di, 0),
            max(-dc, 0) : cols + min(-dc, 0),
        ]
        seeds[dst] |= cand[dst] & ~cand[src_slice] & (img[dst] == img[src_slice])
    queue = deque(map(tuple, np.argwhere(seeds)))
    for i, c in queue:
        cand[i, c] = False
    while queue:
        i, c = queue.popleft()
        v = img[i, c]
        for di, dc in offs:
            ni, nc = i + di, c + dc
            if 0 <= ni < rows and 0 <= nc < cols:
                if cand[ni, nc] and img[ni, nc] == v:
                    cand[ni, nc] = False
                    queue.append((ni, nc))
    return cand


def h_maxima_regions(values, h: float, connectivity: int = 8) -> np.ndarray:
    """Boolean map of the maxima of ``values`` whose dynamic strictly exceeds h.

    Computed as the regional maxima of the reconstruction of values - h under
    values. The strictness of the comparison is fixed here: a peak whose
    dynamic equals h exactly is suppressed.
    """
    img = _as_image(values, "values")
    if not (np.isscalar(h) or getattr(h, "shape", ()) == ()):
        raise ValidationError("h must be a scalar")
    h = float(h)
    if not (h > 0 and np.isfinite(h)):
        raise ValidationError("h must be a positive finite scalar")
    rec = reconstruct_by_dilation(img - h, img, connectivity)
    return regional_maxima(rec, connectivity)
