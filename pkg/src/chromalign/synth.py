"""Synthetic chromatogram pairs with known ground-truth deformations.

Stand-in for proprietary acquisitions: peaks are Gaussian bumps on a quiet
baseline, optionally decorated with a hyperbolic column-bleeding ridge, and
the ground-truth transform (scale/shift on axis 1, smooth sinusoidal
displacement on axis 2, jitter, uniform outliers) is recorded alongside every
generated cloud so any aligner can be scored against it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grids import IntensityGrid
from .peaks import PeakSet

#: Default retention window: 60 min on the first axis, an 8 s modulation
#: period on the second.
DEFAULT_BOUNDS = ((5.0, 65.0), (0.5, 7.5))


@dataclass(frozen=True)
class SmoothFieldSpec:
    """Axis-2 displacement as a sum of low-frequency sinusoids of the
    normalized axis-1 position: sum_k a_k sin(2 pi f_k u + phi_k)."""

    amplitudes: tuple[float, ...] = ()
    frequencies: tuple[float, ...] = ()
    phases: tuple[float, ...] = ()

    def __post_init__(self):
        if not (len(self.amplitudes) == len(self.frequencies) == len(self.phases)):
            raise ValidationError("field spec components must have equal length")

    def evaluate(self, axis1: np.ndarray, bounds=DEFAULT_BOUNDS) -> np.ndarray:
        lo, hi = bounds[0]
        u = (np.asarray(axis1, dtype=float) - lo) / (hi - lo)
        out = np.zeros_like(u)
        for a, f, ph in zip(self.amplitudes, self.frequencies, self.phases):
            out += a * np.sin(2.0 * np.pi * f * u + ph)
        return out

    @property
    def max_amplitude(self) -> float:
        return float(sum(abs(a) for a in self.amplitudes))


@dataclass(frozen=True)
class GroundTruth:
    """Everything needed to score an aligner on a synthetic pair."""

    s: float
    t: float
    field: SmoothFieldSpec
    jitter_sd: float
    outlier_indices: tuple[int, ...]
    bounds: tuple[tuple[float, float], tuple[float, float]] = DEFAULT_BOUNDS

    def inliers(self, n: int) -> np.ndarray:
        mask = np.ones(n, dtype=bool)
        mask[list(self.outlier_indices)] = False
        return np.nonzero(mask)[0]

    def to_json(self) -> str:
        payload = {
            "s": self.s,
            "t": self.t,
            "field": {
                "amplitudes": list(self.field.amplitudes),
                "frequencies": list(self.field.frequencies),
                "phases": list(self.field.phases),
            },
            "jitter_sd": self.jitter_sd,
            "outlier_indices": list(self.outlier_indices),
            "bounds": [list(self.bounds[0]), list(self.bounds[1])],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        d = json.loads(text)
        return cls(
            s=d["s"],
            t=d["t"],
            field=SmoothFieldSpec(
                tuple(d["field"]["amplitudes"]),
                tuple(d["field"]["frequencies"]),
                tuple(d["field"]["phases"]),
            ),
            jitter_sd=d["jitter_sd"],
            outlier_indices=tuple(d["outlier_indices"]),
            bounds=(tuple(d["bounds"][0]), tuple(d["bounds"][1])),
        )


def gen_peaks(
    seed: int,
    n: int,
    bounds=DEFAULT_BOUNDS,
    min_separation: float = 0.0,
    intensity_range=(80.0, 1000.0),
) -> PeakSet:
    """Draw n peaks uniformly in bounds, optionally with a minimum spacing.

    Spacing uses a normalized metric (distances measured relative to each
    axis range) so the short second axis is not swamped by the first.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = np.random.default_rng(seed)
    (lo1, hi1), (lo2, hi2) = bounds
    span = np.array([hi1 - lo1, hi2 - lo2])
    lo = np.array([lo1, lo2])
    pts: list[np.ndarray] = []
    attempts = 0
    while len(pts) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise ValidationError(
                "cannot place peaks with the requested min_separation"
            )
        cand = lo + rng.random(2) * span
        if min_separation > 0.0 and pts:
            rel = (np.asarray(pts) - cand) / span
            if (np.sqrt((rel**2).sum(axis=1)) < min_separation).any():
                continue
        pts.append(cand)
    points = np.asarray(pts)
    intensities = rng.uniform(*intensity_range, size=n)
    return PeakSet(points, intensities)


def default_field(seed: int, amplitude: float) -> SmoothFieldSpec:
    """Two low-frequency sinusoids with the requested total amplitude."""
    rng = np.random.default_rng(seed)
    a1 = amplitude * rng.uniform(0.4, 0.6)
    a2 = amplitude - a1
    return SmoothFieldSpec(
        amplitudes=(a1, a2),
        frequencies=(float(rng.uniform(0.5, 1.0)), float(rng.uniform(1.0, 1.8))),
        phases=(float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(0, 2 * np.pi))),
    )


def apply_ground_truth(
    peaks: PeakSet,
    s: float,
    t: float,
    field: SmoothFieldSpec,
    jitter_sd: float = 0.0,
    outlier_fraction: float = 0.0,
    seed: int = 0,
    bounds=DEFAULT_BOUNDS,
) -> tuple[PeakSet, GroundTruth]:
    """Produce the target cloud: similarity on axis 1, smooth field on axis 2,
    Gaussian jitter, and a fixed count of uniform outlier replacements."""
    if not 0.0 <= outlier_fraction < 1.0:
        raise ValidationError("outlier_fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    pts = peaks.points.copy()
    n = pts.shape[0]
    pts[:, 0] = s * pts[:, 0] + t
    pts[:, 1] = pts[:, 1] + field.evaluate(peaks.points[:, 0], bounds)
    if jitter_sd > 0.0:
        pts += rng.normal(0.0, jitter_sd, size=pts.shape)
    n_out = int(round(outlier_fraction * n))
    outlier_idx: tuple[int, ...] = ()
    if n_out > 0:
        idx = rng.choice(n, size=n_out, replace=False)
        (lo1, hi1), (lo2, hi2) = bounds
        pts[idx, 0] = s * (lo1 + rng.random(n_out) * (hi1 - lo1)) + t
        pts[idx, 1] = lo2 + rng.random(n_out) * (hi2 - lo2)
        outlier_idx = tuple(int(i) for i in np.sort(idx))
    truth = GroundTruth(
        s=float(s),
        t=float(t),
        field=field,
        jitter_sd=float(jitter_sd),
        outlier_indices=outlier_idx,
        bounds=bounds,
    )
    return PeakSet(pts, peaks.intensities.copy()), truth


def gen_grid_from_peaks(
    peaks: PeakSet,
    shape=(160, 240),
    bounds=DEFAULT_BOUNDS,
    widths=(0.6, 0.12),
    noise_sd: float = 0.0,
    bleeding: bool = False,
    seed: int = 0,
) -> IntensityGrid:
    """Render peaks as Gaussian bumps on a grid spanning ``bounds``.

    widths are the bump standard deviations in retention units (axis1, axis2).
    ``bleeding`` injects a hyperbolic ridge along the low-axis2 edge, the
    classic column-bleed artifact an area of interest is meant to exclude.
    """
    nr, nc = shape
    (lo1, hi1), (lo2, hi2) = bounds
    step1 = (hi1 - lo1) / (nc - 1)
    step2 = (hi2 - lo2) / (nr - 1)
    ax1 = lo1 + np.arange(nc) * step1
    ax2 = lo2 + np.arange(nr) * step2
    xx = ax1[None, :]
    yy = ax2[:, None]
    values = np.zeros((nr, nc))
    s1, s2 = widths
    for (p1, p2), inten in zip(peaks.points, peaks.intensities):
        values += inten * np.exp(
            -((xx - p1) ** 2) / (2 * s1**2) - ((yy - p2) ** 2) / (2 * s2**2)
        )
    if bleeding:
        # Hyperbolic ridge y = y0 + c / (x - x0) with a Gaussian cross-section.
        x0 = lo1 - 0.05 * (hi1 - lo1)
        y0 = lo2 + 0.02 * (hi2 - lo2)
        ridge = y0 + 0.8 * (hi1 - lo1) * (hi2 - lo2) / 60.0 / (xx - x0)
        values += 220.0 * np.exp(-((yy - ridge) ** 2) / (2 * (2.5 * s2) ** 2))
    if noise_sd > 0.0:
        rng = np.random.default_rng(seed)
        values += rng.normal(0.0, noise_sd, size=values.shape)
        np.clip(values, 0.0, None, out=values)
    return IntensityGrid(
        values,
        axis1_origin=lo1,
        axis1_step=step1,
        axis2_origin=lo2,
        axis2_step=step2,
    )


def write_ground_truth(truth: GroundTruth, path) -> None:
    Path(path).write_text(truth.to_json())


def read_ground_truth(source) -> GroundTruth:
    return GroundTruth.from_json(Path(source).read_text())
