"""Command-line entry points.

Subcommands:
  simulate   run the synthetic camera noise sweep, write CSV reports
  derive     detections JSON -> correspondence set JSON
  calibrate  detections JSON -> homography JSON
  evaluate   compare homographies and/or audit detector keypoints
  render     correspondence set JSON -> SVG/PNG overlay

Exit codes: 0 success, 1 I/O failure, 2 bad configuration or schema,
3 insufficient evidence in the inputs, 4 estimation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .correspond import CameraPrior
from .errors import (
    CircleFieldError,
    ClassAbsent,
    InsufficientEvidence,
    InvalidConfig,
    MissingCenter,
    MissingLine,
    MissingPoint,
    NoCompletePairs,
    SchemaError,
    TooFewCandidates,
)
from .homography import DltProblem, estimate_homography_dlt, mean_reprojection_error
from .ingest import DetectionFile, build_observation
from .io_formats import (
    load_correspondences,
    load_homography,
    save_correspondences,
    save_homography,
)
from .metrics import collinearity_audit
from .correspond import derive_correspondences
from .render import render_png, render_svg
from .synthcam import SweepConfig, run_noise_sweep
from .template import standard_template

_EVIDENCE_ERRORS = (
    InsufficientEvidence,
    MissingCenter,
    MissingLine,
    MissingPoint,
    ClassAbsent,
    TooFewCandidates,
    NoCompletePairs,
)
_CONFIG_ERRORS = (InvalidConfig, SchemaError)


def parse_sigmas(text: str) -> tuple[float, ...]:
    """Parse '0:25:5' (inclusive range) or '0,5,10' or a single value."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidConfig(f"sigma range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise InvalidConfig(f"bad sigma range {text!r}")
        values = np.arange(start, stop + step * 1e-9, step)
        return tuple(float(v) for v in values)
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise InvalidConfig(f"cannot parse sigma list {text!r}") from None


def parse_image_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        size = (int(w), int(h))
    except ValueError:
        raise InvalidConfig(f"image size must look like 1920x1080, got {text!r}") from None
    if size[0] <= 0 or size[1] <= 0:
        raise InvalidConfig(f"image size must be positive, got {text!r}")
    return size


def _load_template_arg(path: str | None):
    if path is None:
        return None, standard_template()
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"$: invalid JSON in template file ({exc})") from exc
    return cfg, standard_template(cfg)


def _prior_from_args(args) -> CameraPrior | None:
    if args.camera_side == "none":
        return None
    side = -1 if args.camera_side == "neg" else 1
    return CameraPrior(side_sign=side, image_y_down=not args.image_y_up)


def _add_prior_args(p: argparse.ArgumentParser):
    p.add_argument(
        "--camera-side",
        choices=("neg", "pos", "none"),
        default="neg",
        help="which touchline half the camera sits on (world y sign); 'none' skips orientation resolution",
    )
    p.add_argument(
        "--image-y-up",
        action="store_true",
        help="image y axis points up instead of the usual down",
    )


def cmd_simulate(args) -> int:
    template_cfg, _ = _load_template_arg(args.template)
    config = SweepConfig(
        sigmas=parse_sigmas(args.sigmas),
        n_cameras=args.cameras,
        target=args.target,
        variant=args.variant,
        seed=args.seed,
        n_points=args.n_points,
        template_config=template_cfg,
        image_size=parse_image_size(args.image_size),
        grid_spacing_m=args.grid_spacing,
        jobs=args.jobs,
    )
    report = run_noise_sweep(config)

    os.makedirs(args.out, exist_ok=True)
    hdir = os.path.join(args.out, "homographies")
    os.makedirs(hdir, exist_ok=True)
    report.to_csv(os.path.join(args.out, "sweep.csv"))
    with open(os.path.join(args.out, "summary.csv"), "w") as fh:
        fh.write(report.summary_csv_text())
    with open(os.path.join(args.out, "sweep_config.json"), "w") as fh:
        json.dump(config.to_jsonable(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    from .projective import Homography

    for cid, mat in sorted(report.h_true.items()):
        save_homography(
            Homography(mat),
            os.path.join(hdir, f"cam{cid:04d}.json"),
            meta={"camera_id": cid, "role": "ground_truth"},
        )

    for s in report.summaries():
        print(
            f"sigma={s.sigma:g} ok={s.n_ok} failed={s.n_failed} "
            f"median_mre_px={s.median_mre:.6g}"
        )
    return 0


def cmd_derive(args) -> int:
    _, template = _load_template_arg(args.template)
    det = DetectionFile.from_json(args.detections)
    obs = build_observation(det, template)
    corr = derive_correspondences(
        obs, template, prior=_prior_from_args(args), extend=not args.no_extend
    )
    save_correspondences(corr, args.out)
    print(f"case={corr.case} points={len(corr.point_pairs)} lines={len(corr.line_pairs)}")
    return 0


def cmd_calibrate(args) -> int:
    _, template = _load_template_arg(args.template)
    det = DetectionFile.from_json(args.detections)
    obs = build_observation(det, template)
    corr = derive_correspondences(
        obs, template, prior=_prior_from_args(args), extend=not args.no_extend
    )
    h = estimate_homography_dlt(DltProblem.from_correspondences(corr), refine=args.refine)
    save_homography(
        h,
        args.out,
        meta={
            "case": corr.case,
            "n_point_pairs": len(corr.point_pairs),
            "n_line_pairs": len(corr.line_pairs),
        },
    )
    print(f"case={corr.case} wrote {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    if args.est is None and args.detections is None:
        raise InvalidConfig("evaluate needs --est/--truth or --detections (or both)")

    _, template = _load_template_arg(args.template)
    wrote_something = False

    if args.est is not None:
        if args.truth is None:
            raise InvalidConfig("--est requires --truth")
        h_est = load_homography(args.est)
        h_true = load_homography(args.truth)
        w, h = parse_image_size(args.image_size)
        xs = np.arange(-template.length / 2.0, template.length / 2.0 + 1e-9, args.grid_spacing)
        ys = np.arange(-template.width / 2.0, template.width / 2.0 + 1e-9, args.grid_spacing)
        gx, gy = np.meshgrid(xs, ys)
        world = np.column_stack([gx.ravel(), gy.ravel()])
        hom = np.column_stack([world, np.ones(len(world))]) @ h_true.matrix.T
        scale = np.linalg.norm(hom, axis=1)
        ok = np.abs(hom[:, 2]) > 1e-9 * scale
        px = hom[ok, :2] / hom[ok, 2:3]
        inside = (px[:, 0] >= 0) & (px[:, 0] <= w) & (px[:, 1] >= 0) & (px[:, 1] <= h)
        grid = world[ok][inside]
        if len(grid) == 0:
            raise InsufficientEvidence("no template grid point is visible under the truth homography")
        mre = mean_reprojection_error(h_true, h_est, grid)
        print(f"mre_px={mre:.9e} n_grid={len(grid)}")
        wrote_something = True

    if args.detections is not None:
        det = DetectionFile.from_json(args.detections)
        keypoints = {k.name: k.xy for k in det.keypoints}
        audit = collinearity_audit(keypoints, tol_px=args.collinearity_tol)
        if args.audit_out is not None:
            with open(args.audit_out, "w") as fh:
                fh.write(audit.csv_text())
        print(
            f"collinearity max_residual_px={audit.max_residual_px:.9e} "
            f"all_collinear={audit.all_collinear} pairs={len(audit.residuals)}"
        )
        wrote_something = True

    return 0 if wrote_something else 2


def cmd_render(args) -> int:
    corr = load_correspondences(args.correspondences)
    size = parse_image_size(args.image_size)
    ext = os.path.splitext(args.out)[1].lower()
    if ext == ".svg":
        render_svg(corr, image_size=size, path=args.out)
    elif ext == ".png":
        render_png(corr, image_size=size, path=args.out)
    else:
        raise InvalidConfig(f"unsupported render format {ext!r} (use .svg or .png)")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circlefield",
        description="Planar calibration from the center circle of a sports field.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the synthetic noise sweep")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sigmas", default="0:25:5", help="start:stop:step (inclusive) or comma list")
    p.add_argument("--cameras", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", choices=("ellipse_points", "center_point"), default="ellipse_points")
    p.add_argument("--variant", choices=("case1", "case3"), default="case1")
    p.add_argument("--n-points", type=int, default=8)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--template", default=None, help="template geometry JSON")
    p.add_argument("--image-size", default="1920x1080")
    p.add_argument("--grid-spacing", type=float, default=1.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("derive", help="derive correspondences from detections")
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--template", default=None)
    p.add_argument("--no-extend", action="store_true", help="skip the tangent-trapezoid points")
    _add_prior_args(p)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("calibrate", help="estimate the homography from detections")
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--template", default=None)
    p.add_argument("--no-extend", action="store_true")
    p.add_argument("--refine", action="store_true", help="nonlinear reprojection refinement")
    _add_prior_args(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="compare homographies / audit keypoints")
    p.add_argument("--est", default=None, help="estimated homography JSON")
    p.add_argument("--truth", default=None, help="ground-truth homography JSON")
    p.add_argument("--detections", default=None, help="detections JSON for the collinearity audit")
    p.add_argument("--audit-out", default=None, help="write the audit as CSV here")
    p.add_argument("--template", default=None)
    p.add_argument("--image-size", default="1920x1080")
    p.add_argument("--grid-spacing", type=float, default=1.0)
    p.add_argument("--collinearity-tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", help="draw a correspondence set")
    p.add_argument("--correspondences", required=True)
    p.add_argument("--out", required=True, help=".svg or .png")
    p.add_argument("--image-size", default="1920x1080")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _EVIDENCE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CircleFieldError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
