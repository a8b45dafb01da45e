"""Template masks and areas of interest, with their textual interchange format.

Both documents are versioned, line-oriented and tab-delimited so they survive
hand editing and diffing. Coordinates are retention-time units, full double
precision. Layout:

    chromalign-mask 1
    blob <TAB> name <TAB> family <TAB> x,y x,y x,y ...

    chromalign-aoi 1
    label   <TAB> free text        (optional)
    polygon <TAB> x,y x,y x,y ...

Lines starting with '#' are comments. Blob names must be unique within a mask
and must not contain tabs or newlines.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, ValidationError
from .geometry import Polygon

MASK_HEADER = "chromalign-mask 1"
AOI_HEADER = "chromalign-aoi 1"


@dataclass(frozen=True)
class Blob:
    """Named polygonal region tagged with a chemical family."""

    name: str
    family: str
    polygon: Polygon

    def __post_init__(self):
        for label, value in (("name", self.name), ("family", self.family)):
            if not value:
                raise ValidationError(f"blob {label} must be non-empty")
            if "\t" in value or "\n" in value:
                raise ValidationError(f"blob {label} must not contain tabs/newlines")


@dataclass(frozen=True)
class TemplateMask:
    """Integration template: an ordered list of uniquely named blobs."""

    blobs: tuple[Blob, ...]

    def __post_init__(self):
        blobs = tuple(self.blobs)
        names = [b.name for b in blobs]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValidationError(f"duplicate blob names: {sorted(dupes)}")
        object.__setattr__(self, "blobs", blobs)

    def __len__(self) -> int:
        return len(self.blobs)

    @property
    def families(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for b in self.blobs:
            seen.setdefault(b.family, None)
        return tuple(seen)


@dataclass(frozen=True)
class AreaOfInterest:
    """Analyst-drawn polygon delimiting the usable chromatogram region."""

    polygon: Polygon
    label: str = ""


def _format_vertices(polygon: Polygon) -> str:
    return " ".join(f"{x:.17g},{y:.17g}" for x, y in polygon.vertices)


def _parse_vertices(text: str, where: str) -> Polygon:
    pts = []
    for tok in text.split():
        try:
            xs, ys = tok.split(",")
            pts.append((float(xs), float(ys)))
        except ValueError as exc:
            raise FormatError(f"{where}: bad vertex token {tok!r}") from exc
    if len(pts) < 3:
        raise FormatError(f"{where}: polygon needs at least 3 vertices")
    return Polygon(np.asarray(pts, dtype=float))


def _document_lines(text: str, where: str) -> list[tuple[int, str]]:
    out = []
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        out.append((ln, line))
    if not out:
        raise FormatError(f"{where}: empty document")
    return out


def _read_text(source) -> tuple[str, str]:
    path = Path(source)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    return path.read_text(), str(path)


def read_mask(source) -> TemplateMask:
    """Parse a template mask document from a file."""
    text, where = _read_text(source)
    return mask_from_text(text, where)


def mask_from_text(text: str, where: str = "<mask>") -> TemplateMask:
    lines = _document_lines(text, where)
    ln, header = lines[0]
    if header.strip() != MASK_HEADER:
        raise FormatError(f"{where}:{ln}: expected header {MASK_HEADER!r}")
    blobs = []
    for ln, line in lines[1:]:
        parts = line.split("\t")
        if len(parts) != 4 or parts[0] != "blob":
            raise FormatError(f"{where}:{ln}: malformed blob record")
        _, name, family, verts = parts
        blobs.append(Blob(name, family, _parse_vertices(verts, f"{where}:{ln}")))
    return TemplateMask(tuple(blobs))


def write_mask(mask: TemplateMask, path) -> None:
    _write(path, mask_to_text(mask))


def read_aoi(source) -> AreaOfInterest:
    """Parse a single-polygon area-of-interest document from a file."""
    text, where = _read_text(source)
    return aoi_from_text(text, where)


def aoi_from_text(text: str, where: str = "<aoi>") -> AreaOfInterest:
    lines = _document_lines(text, where)
    ln, header = lines[0]
    if header.strip() != AOI_HEADER:
        raise FormatError(f"{where}:{ln}: expected header {AOI_HEADER!r}")
    label = ""
    polygon = None
    for ln, line in lines[1:]:
        parts = line.split("\t")
        if parts[0] == "label" and len(parts) == 2:
            label = parts[1]
        elif parts[0] == "polygon" and len(parts) == 2:
            if polygon is not None:
                raise FormatError(f"{where}:{ln}: more than one polygon record")
            polygon = _parse_vertices(parts[1], f"{where}:{ln}")
        else:
            raise FormatError(f"{where}:{ln}: malformed record")
    if polygon is None:
        raise FormatError(f"{where}: missing polygon record")
    return AreaOfInterest(polygon, label)


def write_aoi(aoi: AreaOfInterest, path) -> None:
    _write(path, aoi_to_text(aoi))


def mask_to_text(mask: TemplateMask) -> str:
    lines = [MASK_HEADER]
    for b in mask.blobs:
        lines.append(f"blob\t{b.name}\t{b.family}\t{_format_vertices(b.polygon)}")
    return "\n".join(lines) + "\n"


def aoi_to_text(aoi: AreaOfInterest) -> str:
    lines = [AOI_HEADER]
    if aoi.label:
        lines.append(f"label\t{aoi.label}")
    lines.append(f"polygon\t{_format_vertices(aoi.polygon)}")
    return "\n".join(lines) + "\n"


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
