"""Command-line driver: every pipeline stage as an independent subcommand.

Each stage reads the previous stage's files, so a full run can be replayed or
resumed piecewise. Errors exit nonzero with a machine-readable category on
stderr: ``error [<category>] stage=<stage>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ChromalignError
from .grids import load_grid, save_grid
from .masks import read_aoi, read_mask, write_aoi, write_mask
from .masks import AreaOfInterest, Blob, TemplateMask
from .geometry import Polygon
from .metrics import alignment_score, quantify
from .peaks import extract_peaks, read_peaks_csv, write_peaks_csv
from .pipeline import (
    PipelineConfig,
    quant_csv_text,
    registration_report,
    run_all,
)
from .registration import (
    RegistrationConfig,
    register,
    scan_noise_weight,
    transform_from_dict,
    transform_to_dict,
)
from .synth import (
    apply_ground_truth,
    default_field,
    gen_grid_from_peaks,
    gen_peaks,
    write_ground_truth,
)
from .warping import warp_image, warp_mask

EXIT_CODES = {
    "input": 2,
    "format": 3,
    "validation": 4,
    "degenerate-geometry": 5,
    "empty-peaks": 6,
    "numeric-underflow": 7,
    "singular-system": 8,
    "undefined-metric": 9,
}


def _registration_flags(p: argparse.ArgumentParser, deferred: bool = False) -> None:
    """Registration flags; ``deferred`` leaves defaults to the config layer."""
    d = (lambda v: None) if deferred else (lambda v: v)
    p.add_argument("--w", type=float, default=d(0.3), help="noise weight in [0, 1)")
    p.add_argument("--beta", type=float, default=d(2.0), help="kernel width (default 2)")
    p.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=d(2.0),
        help="smoothness weight (default 2)",
    )
    p.add_argument(
        "--mode", choices=("hybrid", "rigid", "nonrigid"), default=d("hybrid")
    )
    p.add_argument(
        "--kernel",
        choices=("as-printed", "squared"),
        default=d("as-printed"),
        help="kernel exponent: plain distance (as-printed) or squared",
    )
    p.add_argument("--max-iter", type=int, default=d(150))
    p.add_argument(
        "--swap-axes",
        action="store_const",
        const=True,
        default=None if deferred else False,
    )


def _registration_config(args) -> RegistrationConfig:
    return RegistrationConfig(
        w=args.w,
        beta=args.beta,
        lam=args.lam,
        mode=args.mode,
        kernel=args.kernel,
        max_iter=args.max_iter,
        swap_axes=args.swap_axes,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chromalign",
        description="2D chromatogram alignment pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="peak centroids from a chromatogram")
    p.add_argument("--grid", required=True)
    p.add_argument("--h", type=float, required=True, help="dynamic threshold")
    p.add_argument("--aoi", default=None)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--out", required=True, help="peak CSV path")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("register", help="fit the transform between two peak sets")
    p.add_argument("--ref-peaks", required=True)
    p.add_argument("--target-peaks", required=True)
    _registration_flags(p)
    p.add_argument("--out-transform", required=True)
    p.add_argument("--out-report", required=True)
    p.set_defaults(fn=cmd_register)

    p = sub.add_parser("warp-mask", help="push a template mask through a transform")
    p.add_argument("--transform", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_warp_mask)

    p = sub.add_parser("warp-image", help="resample the target on the reference")
    p.add_argument("--transform", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--reference", required=True, help="grid providing the geometry")
    p.add_argument("--out", required=True, help=".csv or .png output")
    p.set_defaults(fn=cmd_warp_image)

    p = sub.add_parser("score", help="CC and SSIM between two grids over an AOI")
    p.add_argument("--reference", required=True)
    p.add_argument("--aligned", required=True)
    p.add_argument("--aoi", default=None)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--out", default=None, help="optional scores JSON path")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("quantify", help="blob volumes and family percentages")
    p.add_argument("--grid", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True, help="quantification CSV path")
    p.set_defaults(fn=cmd_quantify)

    p = sub.add_parser("scan-w", help="report the objective over a grid of noise weights")
    p.add_argument("--ref-peaks", required=True)
    p.add_argument("--target-peaks", required=True)
    _registration_flags(p)
    p.set_defaults(fn=cmd_scan_w)

    p = sub.add_parser("run-all", help="full pipeline from grids to reports")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--reference")
    p.add_argument("--target")
    p.add_argument("--mask")
    p.add_argument("--aoi-ref")
    p.add_argument("--aoi-target")
    p.add_argument("--h", type=float, help="dynamic threshold for both grids")
    p.add_argument("--h-ref", type=float)
    p.add_argument("--h-target", type=float)
    _registration_flags(p, deferred=True)
    p.add_argument("--out-dir")
    p.set_defaults(fn=cmd_run_all)

    p = sub.add_parser("synth", help="generate a synthetic chromatogram pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--peaks", type=int, default=300)
    p.add_argument("--s", type=float, default=1.05)
    p.add_argument("--t", type=float, default=3.0)
    p.add_argument("--field-amplitude", type=float, default=0.14)
    p.add_argument("--jitter-sd", type=float, default=0.1)
    p.add_argument("--outlier-fraction", type=float, default=0.05)
    p.add_argument("--shape", default="240x360", help="ROWSxCOLS of the grids")
    p.add_argument("--bleeding", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_synth)

    return parser


def cmd_extract(args) -> int:
    grid = load_grid(args.grid)
    aoi = read_aoi(args.aoi) if args.aoi else None
    peaks = extract_peaks(grid, args.h, aoi, args.connectivity)
    write_peaks_csv(peaks, args.out)
    print(f"{len(peaks)} peaks -> {args.out}")
    return 0


def cmd_register(args) -> int:
    ref = read_peaks_csv(args.ref_peaks)
    tgt = read_peaks_csv(args.target_peaks)
    result = register(tgt, ref, _registration_config(args))
    Path(args.out_transform).write_text(
        json.dumps(transform_to_dict(result.transform), sort_keys=True, indent=2)
        + "\n"
    )
    Path(args.out_report).write_text(
        json.dumps(registration_report(result), sort_keys=True, indent=2) + "\n"
    )
    print(
        f"mode={result.transform.mode} s={result.transform.s:.6f} "
        f"t={result.transform.t:.6f} iterations={result.iterations} "
        f"converged={result.converged}"
    )
    return 0


def _load_transform(path: str):
    return transform_from_dict(json.loads(Path(path).read_text()))


def cmd_warp_mask(args) -> int:
    transform = _load_transform(args.transform)
    mask = read_mask(args.mask)
    warped, warnings = warp_mask(transform, mask)
    write_mask(warped, args.out)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{len(warped)} blobs -> {args.out}")
    return 0


def cmd_warp_image(args) -> int:
    transform = _load_transform(args.transform)
    target = load_grid(args.target)
    reference = load_grid(args.reference)
    aligned = warp_image(transform, target, reference)
    bit_depth = 8 if Path(args.out).suffix.lower() == ".bmp" else 16
    save_grid(aligned, args.out, bit_depth=bit_depth)
    print(f"aligned grid -> {args.out}")
    return 0


def cmd_score(args) -> int:
    reference = load_grid(args.reference)
    aligned = load_grid(args.aligned)
    aoi = read_aoi(args.aoi) if args.aoi else None
    score = alignment_score(reference, aligned, aoi, window=args.window)
    payload = {"cc": score.cc, "ssim": score.ssim, "pixels": score.pixel_count}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"CC={score.cc:.6f} SSIM={score.ssim:.6f} pixels={score.pixel_count}")
    return 0


def cmd_quantify(args) -> int:
    grid = load_grid(args.grid)
    mask = read_mask(args.mask)
    report = quantify(grid, mask)
    Path(args.out).write_text(quant_csv_text(report, mask))
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for fam in sorted(report.per_family):
        print(f"{fam}: {report.per_family[fam]:.2f}%")
    return 0


def cmd_scan_w(args) -> int:
    ref = read_peaks_csv(args.ref_peaks)
    tgt = read_peaks_csv(args.target_peaks)
    records = scan_noise_weight(tgt, ref, _registration_config(args))
    print(f"{'w':>5} {'objective':>14} {'iters':>6} {'s':>10} {'t':>10}  converged")
    for r in records:
        obj = r.get("objective", float("inf"))
        print(
            f"{r['w']:5.2f} {obj:14.4f} {r.get('iterations', '-'):>6} "
            f"{r.get('s', float('nan')):10.5f} {r.get('t', float('nan')):10.5f}  "
            f"{r.get('converged', False)}"
        )
    return 0


def _parse_config_file(path: str) -> dict:
    """Flat key=value file; '#' starts a comment."""
    out = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ChromalignError(f"{path}:{ln}: expected key=value")
        key, value = body.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_CONFIG_FLOATS = {"w", "beta", "lambda", "h", "h_ref", "h_target"}
_CONFIG_INTS = {"max_iter"}
_CONFIG_BOOLS = {"swap_axes"}


def cmd_run_all(args) -> int:
    file_cfg = _parse_config_file(args.config) if args.config else {}

    def pick(name, flag_value, default=None):
        if flag_value is not None:
            return flag_value
        raw = file_cfg.get(name)
        if raw is None:
            return default
        if name in _CONFIG_FLOATS:
            return float(raw)
        if name in _CONFIG_INTS:
            return int(raw)
        if name in _CONFIG_BOOLS:
            return raw.lower() in ("1", "true", "yes")
        return raw

    reference = pick("reference", args.reference)
    target = pick("target", args.target)
    out_dir = pick("out_dir", args.out_dir)
    if not (reference and target and out_dir):
        raise ChromalignError("run-all needs --reference, --target and --out-dir")
    h_common = pick("h", args.h, 50.0)
    reg = RegistrationConfig(
        w=pick("w", args.w, 0.3),
        beta=pick("beta", args.beta, 2.0),
        lam=pick("lambda", args.lam, 2.0),
        mode=pick("mode", args.mode, "hybrid"),
        kernel=pick("kernel", args.kernel, "as-printed"),
        max_iter=pick("max_iter", args.max_iter, 150),
        swap_axes=pick("swap_axes", args.swap_axes, False),
    )
    cfg = PipelineConfig(
        reference=reference,
        target=target,
        out_dir=out_dir,
        mask=pick("mask", args.mask),
        aoi_ref=pick("aoi_ref", args.aoi_ref),
        aoi_target=pick("aoi_target", args.aoi_target),
        h_ref=pick("h_ref", args.h_ref, h_common),
        h_target=pick("h_target", args.h_target, h_common),
        registration=reg,
    )
    summary = run_all(cfg)
    for w in summary.get("warnings", []):
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _band_mask_from_peaks(peaks, bounds, count=40) -> TemplateMask:
    """Small square blobs over the strongest peaks; family = axis-2 band."""
    (lo1, hi1), (lo2, hi2) = bounds
    size1 = (hi1 - lo1) / 80.0
    size2 = (hi2 - lo2) / 40.0
    order = np.argsort(peaks.intensities)[::-1][:count]
    blobs = []
    for rank, idx in enumerate(sorted(order.tolist())):
        p1, p2 = peaks.points[idx]
        band = int(3 * (p2 - lo2) / (hi2 - lo2 + 1e-9))
        poly = Polygon(
            np.array(
                [
                    [p1 - size1, p2 - size2],
                    [p1 + size1, p2 - size2],
                    [p1 + size1, p2 + size2],
                    [p1 - size1, p2 + size2],
                ]
            )
        )
        blobs.append(Blob(f"peak{rank:03d}", f"band{band}", poly))
    return TemplateMask(tuple(blobs))


def cmd_synth(args) -> int:
    rows, cols = (int(v) for v in args.shape.lower().split("x"))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .synth import DEFAULT_BOUNDS

    ref_peaks = gen_peaks(args.seed, args.peaks, min_separation=0.02)
    fld = default_field(args.seed + 1, args.field_amplitude)
    tgt_peaks, truth = apply_ground_truth(
        ref_peaks,
        s=args.s,
        t=args.t,
        field=fld,
        jitter_sd=args.jitter_sd,
        outlier_fraction=args.outlier_fraction,
        seed=args.seed + 2,
    )
    ref_grid = gen_grid_from_peaks(
        ref_peaks, shape=(rows, cols), bleeding=args.bleeding, seed=args.seed + 3
    )
    tgt_grid = gen_grid_from_peaks(
        tgt_peaks, shape=(rows, cols), bleeding=args.bleeding, seed=args.seed + 4
    )
    save_grid(ref_grid, out / "reference.csv")
    save_grid(tgt_grid, out / "target.csv")
    write_peaks_csv(ref_peaks, out / "truth_peaks_ref.csv")
    write_peaks_csv(tgt_peaks, out / "truth_peaks_target.csv")
    write_ground_truth(truth, out / "ground_truth.json")
    write_mask(_band_mask_from_peaks(ref_peaks, DEFAULT_BOUNDS), out / "mask.mask")

    (lo1, hi1), (lo2, hi2) = DEFAULT_BOUNDS
    margin2 = 0.06 * (hi2 - lo2) if args.bleeding else 0.0
    aoi = AreaOfInterest(
        Polygon(
            np.array(
                [
                    [lo1 - 1, lo2 + margin2],
                    [hi1 + 1, lo2 + margin2],
                    [hi1 + 1, hi2 + 1],
                    [lo1 - 1, hi2 + 1],
                ]
            )
        ),
        label="synthetic area of interest",
    )
    write_aoi(aoi, out / "aoi_ref.aoi")
    write_aoi(aoi, out / "aoi_target.aoi")
    print(f"synthetic pair ({rows}x{cols}, {args.peaks} peaks) -> {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ChromalignError as exc:
        stage = getattr(exc, "stage", None)
        loc = f" stage={stage}" if stage else ""
        print(f"error [{exc.category}]{loc}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())
