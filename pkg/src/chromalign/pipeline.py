"""End-to-end batch pipeline shared by the CLI and the HTTP service.

One run consumes a reference chromatogram, a target chromatogram, optional
areas of interest and an optional reference template mask, then produces
every downstream artifact in a fixed layout:

    peaks_ref.csv / peaks_target.csv   extracted centroids
    transform.json                     self-contained fitted transform
    registration.json                  config + trajectories + summary stats
    warped_mask.mask                   template pushed onto the target (1)
    aligned.csv / aligned.png          target resampled on the reference (2)
    scores.json                        CC/SSIM before vs after alignment
    quant_reference.csv / quant_target.csv / quant_compare.txt

All outputs are deterministic for fixed inputs and configuration: no
timestamps, stable key ordering, fixed float formatting.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChromalignError, ValidationError
from .grids import IntensityGrid, load_grid, save_grid
from .masks import AreaOfInterest, TemplateMask, read_aoi, read_mask, write_mask
from .metrics import QuantReport, alignment_score, compare_reports, quantify
from .peaks import extract_peaks, write_peaks_csv
from .registration import (
    RegistrationConfig,
    RegistrationResult,
    register,
    transform_to_dict,
)
from .warping import warp_image, warp_mask


@dataclass(frozen=True)
class PipelineConfig:
    """Paths and parameters for one batch run."""

    reference: str
    target: str
    out_dir: str
    mask: str | None = None
    aoi_ref: str | None = None
    aoi_target: str | None = None
    h_ref: float = 50.0
    h_target: float = 50.0
    connectivity: int = 8
    registration: RegistrationConfig = field(default_factory=RegistrationConfig)

    def __post_init__(self):
        if not self.h_ref > 0 or not self.h_target > 0:
            raise ValidationError("h thresholds must be positive")
        if self.connectivity not in (4, 8):
            raise ValidationError("connectivity must be 4 or 8")


def _stage(name: str):
    """Decorator tagging ChromalignErrors with the pipeline stage that raised."""

    def deco(fn):
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except ChromalignError as exc:
                if not getattr(exc, "stage", None):
                    exc.stage = name
                raise

        return wrapper

    return deco


def _json_dump(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def registration_report(result: RegistrationResult) -> dict:
    tr = result.transform
    report = {
        "mode": tr.mode,
        "config": {
            "w": result.config.w,
            "beta": result.config.beta,
            "lambda": result.config.lam,
            "kernel": result.config.kernel,
            "max_iter": result.config.max_iter,
            "swap_axes": result.config.swap_axes,
        },
        "s": tr.s,
        "t": tr.t,
        "t2": tr.t2,
        "iterations": result.iterations,
        "converged": result.converged,
        "sigma2_trajectory": [float(v) for v in result.sigma2_trajectory],
        "objective_trajectory": [float(v) for v in result.objective_trajectory],
    }
    weights = {}
    for name in ("w1", "w2"):
        w = getattr(tr, name)
        if w is not None:
            weights[name] = {
                "count": int(w.size),
                "max_abs": float(np.abs(w).max()),
                "mean_abs": float(np.abs(w).mean()),
                "l2": float(np.linalg.norm(w)),
            }
    report["weights"] = weights
    if result.standardization is not None:
        report["standardization"] = asdict(result.standardization)
    return report


def quant_csv_text(report: QuantReport, mask: TemplateMask) -> str:
    lines = ["blob,family,volume"]
    for blob in mask.blobs:
        lines.append(f"{blob.name},{blob.family},{report.per_blob[blob.name]:.17g}")
    lines.append("")
    lines.append("family,weight_percent")
    for fam in sorted(report.per_family):
        lines.append(f"{fam},{report.per_family[fam]:.17g}")
    return "\n".join(lines) + "\n"


def comparison_table(reports: dict[str, QuantReport]) -> str:
    """Plain-text table: one row per family, one column per method."""
    methods = list(reports)
    fams = sorted({f for r in reports.values() for f in r.per_family})
    width = max([len("family")] + [len(f) for f in fams]) + 2
    header = "family".ljust(width) + "".join(m.rjust(18) for m in methods)
    lines = [header, "-" * len(header)]
    for fam in fams:
        row = fam.ljust(width)
        for m in methods:
            row += f"{reports[m].per_family.get(fam, 0.0):18.2f}"
        lines.append(row)
    return "\n".join(lines) + "\n"


@_stage("load-grids")
def _load_grids(cfg: PipelineConfig) -> tuple[IntensityGrid, IntensityGrid]:
    return load_grid(cfg.reference), load_grid(cfg.target)


@_stage("load-mask")
def _load_mask(cfg: PipelineConfig) -> TemplateMask | None:
    return read_mask(cfg.mask) if cfg.mask else None


@_stage("load-aoi")
def _load_aois(
    cfg: PipelineConfig,
) -> tuple[AreaOfInterest | None, AreaOfInterest | None]:
    ref = read_aoi(cfg.aoi_ref) if cfg.aoi_ref else None
    tgt = read_aoi(cfg.aoi_target) if cfg.aoi_target else None
    return ref, tgt


def run_all(cfg: PipelineConfig) -> dict:
    """Execute every stage; returns a summary dict (also written to disk)."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ref_grid, tgt_grid = _load_grids(cfg)
    mask = _load_mask(cfg)
    aoi_ref, aoi_tgt = _load_aois(cfg)

    peaks_ref = _stage("extract-reference")(extract_peaks)(
        ref_grid, cfg.h_ref, aoi_ref, cfg.connectivity
    )
    peaks_tgt = _stage("extract-target")(extract_peaks)(
        tgt_grid, cfg.h_target, aoi_tgt, cfg.connectivity
    )
    write_peaks_csv(peaks_ref, out / "peaks_ref.csv")
    write_peaks_csv(peaks_tgt, out / "peaks_target.csv")

    # T maps reference coordinates onto the target: Y = reference mixture
    # centroids, X = target data points.
    result = _stage("register")(register)(peaks_tgt, peaks_ref, cfg.registration)
    _json_dump(transform_to_dict(result.transform), out / "transform.json")
    _json_dump(registration_report(result), out / "registration.json")

    summary: dict = {
        "peaks_ref": len(peaks_ref),
        "peaks_target": len(peaks_tgt),
        "s": result.transform.s,
        "t": result.transform.t,
        "iterations": result.iterations,
        "converged": result.converged,
    }

    warnings: list[str] = []
    warped = None
    if mask is not None:
        warped, warn = _stage("warp-mask")(warp_mask)(result.transform, mask)
        warnings.extend(warn)
        write_mask(warped, out / "warped_mask.mask")

    aligned = _stage("warp-image")(warp_image)(result.transform, tgt_grid, ref_grid)
    save_grid(aligned, out / "aligned.csv")
    save_grid(aligned, out / "aligned.png", bit_depth=16)

    scores = {}
    after = _stage("score")(alignment_score)(ref_grid, aligned, aoi_ref)
    scores["after"] = {"cc": after.cc, "ssim": after.ssim, "pixels": after.pixel_count}
    if ref_grid.shape == tgt_grid.shape:
        before = _stage("score")(alignment_score)(ref_grid, tgt_grid, aoi_ref)
        scores["before"] = {
            "cc": before.cc,
            "ssim": before.ssim,
            "pixels": before.pixel_count,
        }
    _json_dump(scores, out / "scores.json")
    summary["scores"] = scores

    if mask is not None and warped is not None:
        quant_ref = _stage("quantify")(quantify)(ref_grid, mask)
        quant_tgt = _stage("quantify")(quantify)(tgt_grid, warped)
        (out / "quant_reference.csv").write_text(quant_csv_text(quant_ref, mask))
        (out / "quant_target.csv").write_text(quant_csv_text(quant_tgt, warped))
        diffs, max_diff = compare_reports(quant_ref, quant_tgt)
        table = comparison_table({"reference": quant_ref, "aligned": quant_tgt})
        (out / "quant_compare.txt").write_text(
            table + f"\nmax family difference: {max_diff:.2f} percent points\n"
        )
        summary["quant_max_family_diff"] = max_diff
        warnings.extend(quant_ref.warnings)
        warnings.extend(quant_tgt.warnings)

    summary["warnings"] = warnings
    _json_dump(summary, out / "summary.json")
    return summary
