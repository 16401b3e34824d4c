"""Detector-output ingestion: JSON parsing, mask tracing, robust fits.

A detection file carries named keypoints, named polyline samples, and
optionally a segmentation-mask path. From a mask of the painted circle
the concentric inner/outer edge candidates are traced with radial rays
and an automatic gradient threshold, then fitted with a RANSAC loop
around the direct ellipse fit. The end product is a CircleObservation
ready for correspondence derivation.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .conics import Conic, fit_ellipse_direct, geom_from_conic
from .correspond import CircleObservation
from .errors import (
    CircleFieldError,
    ClassAbsent,
    ConsensusFailure,
    DegenerateConfiguration,
    InsufficientEvidence,
    NotNested,
    SchemaError,
    TooFewCandidates,
)
from .projective import HomLine2, HomPoint2


# ---------------------------------------------------------------------------
# detection-file schema

@dataclass(frozen=True)
class Keypoint:
    name: str
    xy: np.ndarray
    confidence: float = 1.0


@dataclass(frozen=True)
class LineDetection:
    name: str
    points: np.ndarray


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise SchemaError(f"{path}: {msg}")


def _as_xy(value, path: str, bounds: tuple[int, int]) -> np.ndarray:
    _require(isinstance(value, (list, tuple)) and len(value) == 2, path, "expected [x, y]")
    try:
        xy = np.array([float(value[0]), float(value[1])])
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: coordinates must be numbers") from None
    _require(bool(np.all(np.isfinite(xy))), path, "coordinates must be finite")
    w, h = bounds
    _require(0.0 <= xy[0] <= w and 0.0 <= xy[1] <= h, path, f"({xy[0]}, {xy[1]}) outside image {w}x{h}")
    return xy


@dataclass(frozen=True)
class DetectionFile:
    """Parsed detector output for one image."""

    image_size: tuple[int, int]
    keypoints: tuple[Keypoint, ...] = ()
    lines: tuple[LineDetection, ...] = ()
    mask_path: str | None = None
    mask_class_map: dict[str, int] = field(default_factory=dict)
    base_dir: str = "."

    @classmethod
    def from_dict(cls, data, base_dir: str = ".") -> "DetectionFile":
        _require(isinstance(data, dict), "$", "top level must be an object")
        known = {"image_size", "keypoints", "lines", "mask_path", "mask_class_map"}
        for key in data:
            _require(key in known, f"$.{key}", "unknown field")
        _require("image_size" in data, "$.image_size", "required field missing")
        size = data["image_size"]
        _require(
            isinstance(size, (list, tuple)) and len(size) == 2, "$.image_size", "expected [w, h]"
        )
        _require(
            all(isinstance(v, int) and v > 0 for v in size),
            "$.image_size",
            "width/height must be positive integers",
        )
        bounds = (int(size[0]), int(size[1]))

        keypoints = []
        seen = set()
        for i, item in enumerate(data.get("keypoints", [])):
            path = f"$.keypoints[{i}]"
            _require(isinstance(item, dict), path, "expected an object")
            _require(isinstance(item.get("name"), str) and item["name"], f"{path}.name", "non-empty string required")
            _require(item["name"] not in seen, f"{path}.name", f"duplicate keypoint {item['name']!r}")
            seen.add(item["name"])
            xy = _as_xy(item.get("xy"), f"{path}.xy", bounds)
            conf = item.get("confidence", 1.0)
            _require(isinstance(conf, (int, float)) and 0.0 <= conf <= 1.0, f"{path}.confidence", "must be in [0, 1]")
            keypoints.append(Keypoint(item["name"], xy, float(conf)))

        lines = []
        seen = set()
        for i, item in enumerate(data.get("lines", [])):
            path = f"$.lines[{i}]"
            _require(isinstance(item, dict), path, "expected an object")
            _require(isinstance(item.get("name"), str) and item["name"], f"{path}.name", "non-empty string required")
            _require(item["name"] not in seen, f"{path}.name", f"duplicate line {item['name']!r}")
            seen.add(item["name"])
            pts = item.get("points")
            _require(isinstance(pts, (list, tuple)) and len(pts) >= 2, f"{path}.points", "need at least two samples")
            arr = np.array([_as_xy(p, f"{path}.points[{j}]", bounds) for j, p in enumerate(pts)])
            lines.append(LineDetection(item["name"], arr))

        mask_path = data.get("mask_path")
        if mask_path is not None:
            _require(isinstance(mask_path, str) and mask_path, "$.mask_path", "non-empty string required")
        class_map = data.get("mask_class_map", {})
        _require(isinstance(class_map, dict), "$.mask_class_map", "expected an object")
        for k, v in class_map.items():
            _require(isinstance(k, str) and isinstance(v, int), f"$.mask_class_map.{k}", "string -> int required")

        return cls(
            image_size=bounds,
            keypoints=tuple(keypoints),
            lines=tuple(lines),
            mask_path=mask_path,
            mask_class_map=dict(class_map),
            base_dir=base_dir,
        )

    @classmethod
    def from_json(cls, path: str) -> "DetectionFile":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"$: invalid JSON ({exc})") from exc
        return cls.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> dict:
        out: dict = {
            "image_size": list(self.image_size),
            "keypoints": [
                {"name": k.name, "xy": [float(k.xy[0]), float(k.xy[1])], "confidence": k.confidence}
                for k in self.keypoints
            ],
            "lines": [
                {"name": l.name, "points": [[float(x), float(y)] for x, y in l.points]}
                for l in self.lines
            ],
        }
        if self.mask_path is not None:
            out["mask_path"] = self.mask_path
        if self.mask_class_map:
            out["mask_class_map"] = dict(self.mask_class_map)
        return out

    def save(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def keypoint(self, name: str) -> Keypoint | None:
        for k in self.keypoints:
            if k.name == name:
                return k
        return None

    def line(self, name: str) -> LineDetection | None:
        for l in self.lines:
            if l.name == name:
                return l
        return None

    def load_mask(self) -> np.ndarray:
        if self.mask_path is None:
            raise InsufficientEvidence("detection file has no mask_path")
        from PIL import Image

        path = self.mask_path
        if not os.path.isabs(path):
            path = os.path.join(self.base_dir, path)
        with Image.open(path) as img:
            return np.asarray(img)


def parse_detection_file(path: str) -> DetectionFile:
    """Load and validate a detection JSON file."""
    return DetectionFile.from_json(path)


# ---------------------------------------------------------------------------
# mask tracing

@dataclass(frozen=True)
class ExtractOptions:
    angle_step_deg: float = 2.0
    sample_step_px: float = 1.0
    min_gap_px: float = 1.0
    max_gap_px: float = 30.0


@dataclass
class ConcentricEdges:
    """Per-ray edge candidates for the two paint boundaries."""

    origin: np.ndarray
    inner_candidates: np.ndarray
    outer_candidates: np.ndarray
    inner_inliers: np.ndarray | None = None
    outer_inliers: np.ndarray | None = None


def _otsu_threshold(values: np.ndarray) -> float:
    """Histogram-based two-class threshold (maximum inter-class variance)."""
    vmax = float(np.max(values))
    if vmax <= 0.0:
        return np.inf
    hist, edges = np.histogram(values, bins=256, range=(0.0, vmax))
    total = hist.sum()
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(hist)
    w1 = total - w0
    m0 = np.cumsum(hist * centers)
    mt = m0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (mt - m0) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = -1.0
    return float(centers[int(np.argmax(between))])


def extract_concentric_edges(
    mask: np.ndarray,
    class_id: int | None = None,
    options: ExtractOptions = ExtractOptions(),
) -> ConcentricEdges:
    """Trace the inner and outer paint edges of a ring-shaped mask class.

    Rays march outward from the class centroid; along each ray the mask
    is sampled bilinearly and the first rising/falling gradient pair
    (separated by a plausible paint thickness) gives one candidate per
    edge. The gradient significance threshold is chosen automatically
    from the pooled gradient-magnitude histogram.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise SchemaError(f"mask must be 2-D, got shape {mask.shape}")
    binary = (mask != 0) if class_id is None else (mask == class_id)
    if not np.any(binary):
        raise ClassAbsent(f"mask has no pixels of class {class_id!r}")
    fmask = binary.astype(float)
    h, w = fmask.shape

    ys, xs = np.nonzero(binary)
    origin = np.array([xs.mean(), ys.mean()])

    step = options.sample_step_px
    n_rays = int(round(360.0 / options.angle_step_deg))
    angles = np.deg2rad(options.angle_step_deg) * np.arange(n_rays)
    diag = float(np.hypot(w, h))
    ts = np.arange(0.0, diag, step)

    rays = []
    for theta in angles:
        d = np.array([np.cos(theta), np.sin(theta)])
        px = origin[0] + ts * d[0]
        py = origin[1] + ts * d[1]
        valid = (px >= 0) & (px <= w - 1) & (py >= 0) & (py <= h - 1)
        stop = int(np.argmin(valid)) if not valid.all() else len(ts)
        if stop < 3:
            rays.append(None)
            continue
        vals = ndimage.map_coordinates(fmask, [py[:stop], px[:stop]], order=1, mode="nearest")
        grad = np.gradient(vals, step)
        rays.append((d, grad))

    pooled = np.concatenate([np.abs(g) for r in rays if r is not None for _, g in [r]])
    tau = _otsu_threshold(pooled)

    inner, outer = [], []
    min_k = options.min_gap_px / step
    max_k = options.max_gap_px / step
    for ray in rays:
        if ray is None:
            continue
        d, grad = ray
        mag = np.abs(grad)
        peaks = [
            k
            for k in range(1, len(mag) - 1)
            if mag[k] >= tau and mag[k] >= mag[k - 1] and mag[k] > mag[k + 1]
        ]
        rising = [k for k in peaks if grad[k] > 0]
        if not rising:
            continue
        k_r = rising[0]
        falling = [k for k in peaks if grad[k] < 0 and min_k <= k - k_r <= max_k]
        if not falling:
            continue
        k_f = falling[0]
        inner.append(origin + k_r * step * d)
        outer.append(origin + k_f * step * d)

    if len(inner) < 6:
        raise TooFewCandidates(f"only {len(inner)} rays produced an edge pair (need 6)")
    return ConcentricEdges(
        origin=origin,
        inner_candidates=np.array(inner),
        outer_candidates=np.array(outer),
    )


# ---------------------------------------------------------------------------
# robust concentric fit

@dataclass(frozen=True)
class RansacOptions:
    iterations: int = 500
    sample_size: int = 6
    inlier_tol_px: float = 1.5
    min_inliers: int = 6
    seed: int = 0


def sampson_distance(conic: Conic, points_xy: np.ndarray) -> np.ndarray:
    """First-order geometric distance from points to a conic, in pixels."""
    c = conic.unit()
    pts = np.asarray(points_xy, dtype=float).reshape(-1, 2)
    x = np.column_stack([pts, np.ones(len(pts))])
    cx = x @ c.T
    val = np.sum(x * cx, axis=1)
    grad = 2.0 * np.linalg.norm(cx[:, :2], axis=1)
    return np.abs(val) / np.maximum(grad, 1e-12)


def _ransac_ellipse(
    points: np.ndarray, options: RansacOptions, rng: np.random.Generator
) -> tuple[Conic, np.ndarray]:
    n = len(points)
    if n < options.sample_size:
        raise ConsensusFailure(f"{n} candidates cannot seat a sample of {options.sample_size}")
    best_count = -1
    best_inliers = None
    for _ in range(options.iterations):
        idx = rng.choice(n, size=options.sample_size, replace=False)
        try:
            model = fit_ellipse_direct(points[idx])
        except CircleFieldError:
            continue
        inliers = sampson_distance(model, points) < options.inlier_tol_px
        count = int(np.sum(inliers))
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < options.min_inliers:
        raise ConsensusFailure(
            f"best consensus {max(best_count, 0)} of {n} is below {options.min_inliers}"
        )
    fit = fit_ellipse_direct(points[best_inliers])
    final = sampson_distance(fit, points) < options.inlier_tol_px
    if int(np.sum(final)) >= options.min_inliers:
        fit = fit_ellipse_direct(points[final])
    else:
        final = best_inliers
    return fit, final


def _nests(inner: Conic, outer: Conic) -> bool:
    boundary = geom_from_conic(inner).boundary_points(32)
    return all(outer.strictly_inside(HomPoint2.from_xy(*p)) for p in boundary)


def ransac_fit_concentric(
    edges: ConcentricEdges, options: RansacOptions = RansacOptions()
) -> tuple[Conic, Conic]:
    """Fit both edge ellipses robustly and return them nested.

    Fills the inlier masks on ``edges`` (attached to the candidate lists
    as given). The returned pair is ordered interior-first even when the
    candidate lists were swapped.
    """
    rng = np.random.default_rng(options.seed)
    inner_fit, inner_mask = _ransac_ellipse(edges.inner_candidates, options, rng)
    outer_fit, outer_mask = _ransac_ellipse(edges.outer_candidates, options, rng)
    edges.inner_inliers = inner_mask
    edges.outer_inliers = outer_mask

    if _nests(inner_fit, outer_fit):
        return inner_fit, outer_fit
    if _nests(outer_fit, inner_fit):
        return outer_fit, inner_fit
    raise NotNested("neither edge fit is strictly inside the other")


# ---------------------------------------------------------------------------
# observation assembly

def fit_line_tls(points_xy: np.ndarray) -> HomLine2:
    """Total-least-squares line through sample points."""
    pts = np.asarray(points_xy, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise DegenerateConfiguration("a line fit needs at least two points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] <= 1e-12:
        raise DegenerateConfiguration("line samples are coincident")
    normal = vt[-1]
    return HomLine2(np.array([normal[0], normal[1], -float(normal @ centroid)]))


def build_observation(
    det: DetectionFile,
    template,
    fits: Conic | tuple[Conic, Conic] | None = None,
    extract: ExtractOptions = ExtractOptions(),
    ransac: RansacOptions = RansacOptions(),
    circle_class: str = "circle",
) -> CircleObservation:
    """Assemble a CircleObservation from whatever the detections support.

    Evidence priority for the ellipse: ``fits`` passed by the caller (a
    single centerline conic, or an (inner, outer) concentric pair), then
    the segmentation mask (concentric edge fits), then a polyline named
    ``circle`` fitted as the painted centerline. The center keypoint,
    halfway-line samples, and any template-named keypoint become the
    center / support line / support point when present. The declared
    case tag follows the strongest combination: center + line (case 1),
    center + named point (case 2), concentric pair alone (case 3).
    """
    reasons = []
    ellipse = None
    concentric = None
    world_circle = "center"

    if fits is not None:
        if isinstance(fits, Conic):
            ellipse = fits
        else:
            e_inner, e_outer = fits
            if not _nests(e_inner, e_outer):
                e_inner, e_outer = e_outer, e_inner
            ellipse = e_outer
            concentric = (e_inner, e_outer)
            world_circle = "outer"

    if ellipse is None and det.mask_path is not None:
        try:
            mask = det.load_mask()
            class_id = det.mask_class_map.get(circle_class)
            if class_id is None and det.mask_class_map:
                raise ClassAbsent(f"mask_class_map has no entry for {circle_class!r}")
            edges = extract_concentric_edges(mask, class_id, extract)
            e_inner, e_outer = ransac_fit_concentric(edges, ransac)
            ellipse = e_outer
            concentric = (e_inner, e_outer)
            world_circle = "outer"
        except (CircleFieldError, OSError) as exc:
            reasons.append(f"mask: {exc}")

    if ellipse is None:
        polyline = det.line("circle") or det.line("center_circle")
        if polyline is None:
            reasons.append("no circle polyline detected")
        elif len(polyline.points) < 6:
            reasons.append(f"circle polyline has {len(polyline.points)} points (need 6)")
        else:
            try:
                ellipse = fit_ellipse_direct(polyline.points)
                world_circle = "center"
            except CircleFieldError as exc:
                reasons.append(f"circle polyline: {exc}")

    center = None
    kp = det.keypoint("circle_center")
    if kp is not None:
        center = HomPoint2.from_xy(*kp.xy)

    support_line = None
    halfway = det.line("halfway")
    if halfway is not None:
        try:
            support_line = ("halfway", fit_line_tls(halfway.points))
        except DegenerateConfiguration:
            support_line = None

    support_point = None
    named = [
        k
        for k in det.keypoints
        if k.name in template.named_keypoints and k.name != "circle_center"
    ]
    if named:
        best = max(named, key=lambda k: (k.confidence, k.name))
        support_point = (best.name, HomPoint2.from_xy(*best.xy))

    if ellipse is not None and center is not None and support_line is not None:
        case = "case1"
    elif ellipse is not None and center is not None and support_point is not None:
        case = "case2"
    elif concentric is not None:
        case = "case3"
    else:
        ellipse_msg = "ok" if ellipse is not None else "no ellipse (" + "; ".join(reasons) + ")"
        raise InsufficientEvidence(
            "no case is satisfiable: "
            f"case1 needs ellipse + center keypoint + halfway line "
            f"(ellipse: {ellipse_msg}; center: {'ok' if center else 'missing'}; "
            f"halfway: {'ok' if support_line else 'missing'}); "
            f"case2 needs ellipse + center keypoint + named point "
            f"(point: {'ok' if support_point else 'missing'}); "
            f"case3 needs concentric edge fits (missing)"
        )

    return CircleObservation(
        ellipse=ellipse,
        imaged_center=center,
        support_line=support_line,
        support_point=support_point,
        concentric=concentric,
        world_circle=world_circle,
        case=case,
    )
