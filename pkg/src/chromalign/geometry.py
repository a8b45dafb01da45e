"""Planar polygon primitives used for areas of interest and template blobs.

Coordinates are always (axis1, axis2) retention-time pairs, i.e. the same
convention as peak coordinates: first value in minutes (first dimension),
second in seconds (second dimension).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, ValidationError


@dataclass(frozen=True)
class Polygon:
    """Simple polygon, implicitly closed (last vertex connects to the first).

    Parameters
    ----------
    vertices : (K, 2) float array
        Ordered vertex coordinates, K >= 3.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValidationError("polygon vertices must be a K x 2 array")
        if v.shape[0] < 3:
            raise ValidationError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValidationError("polygon vertices must be finite")
        object.__setattr__(self, "vertices", v)
        err = simplicity_violation(v)
        if err is not None:
            raise DegenerateGeometryError(f"polygon is not simple: {err}")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(min_axis1, min_axis2, max_axis1, max_axis2)."""
        v = self.vertices
        return (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())

    @classmethod
    def unchecked(cls, vertices: np.ndarray) -> "Polygon":
        """Bypass the simplicity check (for flagged post-warp geometry only)."""
        poly = object.__new__(cls)
        object.__setattr__(poly, "vertices", np.asarray(vertices, dtype=float))
        return poly


def _orient(a, b, c) -> float:
    """Signed area of the parallelogram spanned by (b-a, c-a)."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p) -> bool:
    """True if collinear p lies within the bounding box of segment [a, b]."""
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def segments_intersect(a, b, c, d) -> bool:
    """Closed-segment intersection test for [a,b] and [c,d]."""
    o1 = _orient(a, b, c)
    o2 = _orient(a, b, d)
    o3 = _orient(c, d, a)
    o4 = _orient(c, d, b)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and 0 not in (o1, o2, o3, o4):
        return True
    if o1 == 0 and _on_segment(a, b, c):
        return True
    if o2 == 0 and _on_segment(a, b, d):
        return True
    if o3 == 0 and _on_segment(c, d, a):
        return True
    if o4 == 0 and _on_segment(c, d, b):
        return True
    return False


def simplicity_violation(vertices: np.ndarray) -> str | None:
    """Return a description of the first simplicity violation, or None.

    A simple polygon has no repeated consecutive vertices, no fold-backs at a
    vertex, and no contact at all between non-adjacent edges.
    """
    v = np.asarray(vertices, dtype=float)
    k = v.shape[0]
    for i in range(k):
        a, b = v[i], v[(i + 1) % k]
        if a[0] == b[0] and a[1] == b[1]:
            return f"zero-length edge at vertex {i}"
    for i in range(k):
        # Consecutive edges share a vertex; reject only collinear reversals.
        a, b, c = v[i], v[(i + 1) % k], v[(i + 2) % k]
        u = (b[0] - a[0], b[1] - a[1])
        w = (c[0] - b[0], c[1] - b[1])
        if u[0] * w[1] - u[1] * w[0] == 0 and u[0] * w[0] + u[1] * w[1] < 0:
            return f"fold-back at vertex {(i + 1) % k}"
    for i in range(k):
        a, b = v[i], v[(i + 1) % k]
        for j in range(i + 2, k):
            if i == 0 and j == k - 1:
                continue  # adjacent through the closing vertex
            c, d = v[j], v[(j + 1) % k]
            if segments_intersect(a, b, c, d):
                return f"edges {i} and {j} intersect"
    return None


def point_in_polygon(p, poly: Polygon) -> bool:
    """Even-odd containment test; points on the boundary count as inside."""
    return bool(points_in_polygon(np.asarray(p, dtype=float)[None, :], poly)[0])


def points_in_polygon(pts: np.ndarray, poly: Polygon) -> np.ndarray:
    """Vectorized even-odd test for many points; boundary points are inside.

    Returns a boolean array of length len(pts).
    """
    pts = np.asarray(pts, dtype=float)
    v = poly.vertices
    k = v.shape[0]
    x = pts[:, 0]
    y = pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    for i in range(k):
        ax, ay = v[i]
        bx, by = v[(i + 1) % k]
        # Boundary membership: collinear and within the edge's bounding box.
        cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
        on = (
            (cross == 0)
            & (x >= min(ax, bx))
            & (x <= max(ax, bx))
            & (y >= min(ay, by))
            & (y <= max(ay, by))
        )
        on_edge |= on
        # Even-odd ray casting toward +axis1.
        straddles = (ay > y) != (by > y)
        if straddles.any():
            xi = ax + (y - ay) * (bx - ax) / (by - ay)
            inside ^= straddles & (x < xi)
    return inside | on_edge
