"""Chromatogram intensity grids and their on-disk representations.

A grid is an R x C matrix of non-negative detector intensities plus an affine
axis calibration: column c sits at ``axis1_origin + c * axis1_step`` minutes
(first dimension), row r at ``axis2_origin + r * axis2_step`` seconds (second
dimension). Row 0 always holds the lowest second-dimension retention time.

Supported containers: CSV matrices (lossless for doubles), 8/16-bit PNG and
8-bit BMP (quantized; the scale/offset needed to undo the quantization lives
in a JSON sidecar next to the image, together with the axis calibration).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError, ValidationError

SIDECAR_SUFFIX = ".meta.json"

#: Equal-weight luminance conversion for color images; the rendering colormap
#: of source images is unknown, so no perceptual weighting is assumed.
EQUAL_WEIGHTS = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


@dataclass(frozen=True)
class IntensityGrid:
    """2D chromatogram: intensity matrix plus retention-time calibration."""

    values: np.ndarray
    axis1_origin: float = 0.0
    axis1_step: float = 1.0
    axis2_origin: float = 0.0
    axis2_step: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValidationError("grid values must be a 2D matrix")
        if v.shape[0] < 2 or v.shape[1] < 2:
            raise ValidationError("grid needs at least 2 rows and 2 columns")
        if not np.all(np.isfinite(v)):
            raise ValidationError("grid values must be finite")
        if (v < 0).any():
            raise ValidationError("grid values must be non-negative")
        if not (self.axis1_step > 0 and self.axis2_step > 0):
            raise ValidationError("axis steps must be positive")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def index_to_coords(self, rows, cols) -> np.ndarray:
        """Map fractional grid indices to (axis1, axis2) retention coordinates."""
        rows = np.asarray(rows, dtype=float)
        cols = np.asarray(cols, dtype=float)
        return np.stack(
            [
                self.axis1_origin + cols * self.axis1_step,
                self.axis2_origin + rows * self.axis2_step,
            ],
            axis=-1,
        )

    def coords_to_index(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Map (axis1, axis2) coordinates to fractional (row, col) indices."""
        pts = np.asarray(pts, dtype=float)
        cols = (pts[..., 0] - self.axis1_origin) / self.axis1_step
        rows = (pts[..., 1] - self.axis2_origin) / self.axis2_step
        return rows, cols

    def pixel_centers(self) -> np.ndarray:
        """All pixel-center coordinates as an (R, C, 2) array."""
        r, c = self.shape
        rows, cols = np.meshgrid(np.arange(r), np.arange(c), indexing="ij")
        return self.index_to_coords(rows, cols)

    @property
    def coordinate_bounds(self) -> tuple[float, float, float, float]:
        """(min_axis1, min_axis2, max_axis1, max_axis2) over pixel centers."""
        r, c = self.shape
        return (
            self.axis1_origin,
            self.axis2_origin,
            self.axis1_origin + (c - 1) * self.axis1_step,
            self.axis2_origin + (r - 1) * self.axis2_step,
        )

    def with_values(self, values: np.ndarray) -> "IntensityGrid":
        """Same calibration, new matrix."""
        return replace(self, values=values)


def _axis_metadata(grid: IntensityGrid) -> dict:
    return {
        "axis1_origin": grid.axis1_origin,
        "axis1_step": grid.axis1_step,
        "axis2_origin": grid.axis2_origin,
        "axis2_step": grid.axis2_step,
    }


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + SIDECAR_SUFFIX)


def _read_sidecar(path: Path) -> dict:
    sc = _sidecar_path(path)
    if not sc.exists():
        return {}
    try:
        return json.loads(sc.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"unreadable sidecar {sc}: {exc}") from exc


def load_grid(source, luminance_weights=EQUAL_WEIGHTS) -> IntensityGrid:
    """Load an intensity grid from a CSV matrix or a PNG/BMP image.

    Color images are collapsed to intensity with the given channel weights.
    Axis calibration comes from the sidecar when present, else pixel units.
    Image containers whose sidecar records a value scale/offset are mapped
    back to physical intensities.
    """
    path = Path(source)
    if not path.exists():
        raise InputError(f"no such grid file: {path}")
    suffix = path.suffix.lower()
    if suffix == ".csv":
        values = _read_csv_matrix(path)
    elif suffix in (".png", ".bmp"):
        values = _read_image(path, luminance_weights)
    else:
        raise InputError(f"unsupported grid container: {path.name}")
    meta = _read_sidecar(path)
    scale = float(meta.get("value_scale", 1.0))
    offset = float(meta.get("value_offset", 0.0))
    if scale != 1.0 or offset != 0.0:
        values = values * scale + offset
    return IntensityGrid(
        values,
        axis1_origin=float(meta.get("axis1_origin", 0.0)),
        axis1_step=float(meta.get("axis1_step", 1.0)),
        axis2_origin=float(meta.get("axis2_origin", 0.0)),
        axis2_step=float(meta.get("axis2_step", 1.0)),
    )


def _read_csv_matrix(path: Path) -> np.ndarray:
    rows = []
    width = None
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise InputError(f"{path}:{ln}: non-numeric cell ({exc})") from exc
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputError(f"{path}:{ln}: ragged row ({len(row)} != {width} cells)")
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: empty CSV matrix")
    return np.asarray(rows, dtype=float)


def _read_image(path: Path, weights) -> np.ndarray:
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:  # Pillow raises a zoo of types
        raise InputError(f"unreadable image {path}: {exc}") from exc
    if img.mode == "P":  # palette indices are meaningless as intensities
        img = img.convert("RGB")
    arr = np.asarray(img)
    if arr.size == 0:
        raise InputError(f"zero-sized image: {path}")
    if arr.ndim == 2:
        return arr.astype(float)
    if arr.ndim == 3:
        w = np.asarray(weights, dtype=float)
        nchan = min(arr.shape[2], len(w))
        return np.tensordot(arr[:, :, :nchan].astype(float), w[:nchan], axes=(2, 0))
    raise InputError(f"cannot interpret image with shape {arr.shape}")


def save_grid(grid: IntensityGrid, path, bit_depth: int = 16) -> None:
    """Write a grid to CSV (lossless) or PNG/BMP (quantized + sidecar).

    For image containers, values are stored as integers; when the data does
    not already fit the integer range, a linear rescale to the full range is
    applied and recorded in the sidecar so loads can undo it. The round trip
    is exact for CSV and integral in-range data, and accurate to one
    quantization step of the dynamic range otherwise.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    meta = _axis_metadata(grid)
    if suffix == ".csv":
        lines = [",".join(f"{x:.17g}" for x in row) for row in grid.values]
        _write_text(path, "\n".join(lines) + "\n")
        _write_text(_sidecar_path(path), json.dumps(meta, sort_keys=True, indent=2) + "\n")
        return
    if suffix not in (".png", ".bmp"):
        raise InputError(f"unsupported grid container: {path.name}")
    if suffix == ".bmp" and bit_depth != 8:
        raise ValidationError("BMP output supports only 8-bit depth")
    if bit_depth not in (8, 16):
        raise ValidationError("bit_depth must be 8 or 16")
    vmax = float(2**bit_depth - 1)
    values = grid.values
    lo = float(values.min())
    hi = float(values.max())
    integral = np.all(values == np.round(values))
    if integral and lo >= 0 and hi <= vmax:
        stored = np.round(values)
        scale, offset = 1.0, 0.0
    else:
        span = hi - lo
        if span == 0.0:
            stored = np.zeros_like(values)
            scale, offset = 1.0, lo
        else:
            stored = np.round((values - lo) / span * vmax)
            scale, offset = span / vmax, lo
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    img = Image.fromarray(stored.astype(dtype))
    try:
        img.save(path)
    except OSError as exc:
        raise InputError(f"cannot write image {path}: {exc}") from exc
    meta["value_scale"] = scale
    meta["value_offset"] = offset
    _write_text(_sidecar_path(path), json.dumps(meta, sort_keys=True, indent=2) + "\n")


def _write_text(path: Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
