"""Synthetic pinhole cameras and the noise-robustness sweep.

Cameras are sampled around the broadcast position: on one side of the
pitch, 10-25 m up, aimed into the center circle, with a narrow-angle
lens. Rejection sampling keeps only central views, meaning the whole
painted circle (and therefore part of the halfway line) lands inside
the frame. World frame is the field template's; camera rotation is
world-to-camera with the optical axis as +z and image y pointing down.

The sweep reproduces the synthetic robustness protocol: for each
camera, points sampled on the inner/outer painted circle edges are
projected into a 1080p image, Gaussian noise is applied to a chosen
primitive (the ellipse points or the reported center), ellipses are
re-fitted, correspondences derived, and the homography estimated; the
error is the mean reprojection distance over the visible template grid
against the ground-truth homography. Failures become recorded rows,
never exceptions. Fixed seeds give byte-identical reports.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conics import fit_ellipse_direct
from .correspond import (
    CameraPrior,
    CircleObservation,
    derive_correspondences,
)
from .errors import (
    CircleFieldError,
    CircleNotVisible,
    DegeneratePose,
    ExhaustedRetries,
    InvalidConfig,
)
from .homography import (
    DltProblem,
    Homography,
    camera_to_homography,
    estimate_homography_dlt,
    mean_reprojection_error,
)
from .projective import HomLine2, HomPoint2, transform_under_homography
from .template import FieldTemplate, standard_template

NOISE_TARGETS = ("ellipse_points", "center_point")
SWEEP_CSV_HEADER = "sigma,target,camera_id,seed,case,mre_px,status"


@dataclass(frozen=True)
class CameraSample:
    """Pinhole camera: world-to-camera rotation, position in meters."""

    position: np.ndarray
    rotation: np.ndarray
    focal_px: float
    principal_point: np.ndarray
    image_size: tuple[int, int] = (1920, 1080)

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-9:
            raise ValueError("rotation must be orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError("rotation must be proper (det +1)")
        if pos[2] <= 0.0:
            raise DegeneratePose(f"camera height must be positive, got {pos[2]}")
        if self.focal_px <= 0.0:
            raise ValueError("focal length must be positive")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "principal_point", np.asarray(self.principal_point, dtype=float).reshape(2))

    @classmethod
    def look_at(
        cls,
        position,
        target,
        focal_px: float,
        roll_rad: float = 0.0,
        principal_point=None,
        image_size: tuple[int, int] = (1920, 1080),
    ) -> "CameraSample":
        pos = np.asarray(position, dtype=float).reshape(3)
        tgt = np.asarray(target, dtype=float).reshape(3)
        forward = tgt - pos
        norm = np.linalg.norm(forward)
        if norm <= 1e-12:
            raise DegeneratePose("camera position coincides with the target")
        forward = forward / norm
        up = np.array([0.0, 0.0, 1.0])
        right = np.cross(forward, up)
        if np.linalg.norm(right) <= 1e-8:
            raise DegeneratePose("optical axis is vertical; viewing frame undefined")
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rot = np.vstack([right, down, forward])
        if abs(roll_rad) > 0.0:
            c, s = np.cos(roll_rad), np.sin(roll_rad)
            rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]) @ rot
        if principal_point is None:
            principal_point = (image_size[0] / 2.0, image_size[1] / 2.0)
        return cls(
            position=pos,
            rotation=rot,
            focal_px=float(focal_px),
            principal_point=principal_point,
            image_size=image_size,
        )

    def project(self, world_xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project (n, 3) world points; returns pixel (n, 2) and depth (n,)."""
        pts = np.asarray(world_xyz, dtype=float).reshape(-1, 3)
        cam = (pts - self.position) @ self.rotation.T
        depth = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            px = self.focal_px * cam[:, :2] / depth[:, None] + self.principal_point
        return px, depth

    def project_plane(self, world_xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(world_xy, dtype=float).reshape(-1, 2)
        xyz = np.column_stack([pts, np.zeros(len(pts))])
        return self.project(xyz)


@dataclass(frozen=True)
class CameraRanges:
    """Uniform sampling ranges for the broadcast-side camera."""

    x_m: tuple[float, float] = (-20.0, 20.0)
    y_m: tuple[float, float] = (-45.0, -25.0)
    height_m: tuple[float, float] = (10.0, 25.0)
    focal_px: tuple[float, float] = (2500.0, 9000.0)
    roll_deg: tuple[float, float] = (-2.0, 2.0)


@dataclass(frozen=True)
class VisibilityOptions:
    """Central-view predicate: the whole circle in frame, halfway line seen."""

    min_arc_fraction: float = 1.0
    n_arc_samples: int = 64
    margin_px: float = 8.0
    min_halfway_samples: int = 2
    min_depth_m: float = 0.5


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian pixel noise applied to one primitive of the observation."""

    sigma_px: float
    seed: int
    target: str = "ellipse_points"

    def __post_init__(self):
        if not 0.0 <= self.sigma_px <= 200.0:
            raise InvalidConfig(f"sigma_px must be in [0, 200], got {self.sigma_px}")
        if self.target not in NOISE_TARGETS:
            raise InvalidConfig(f"target must be one of {NOISE_TARGETS}, got {self.target!r}")


@dataclass(frozen=True)
class ObservedCircle:
    """Projected (optionally noisy) center-circle observation."""

    inner_points: np.ndarray
    outer_points: np.ndarray
    center_px: np.ndarray
    halfway_line: HomLine2
    h_true: Homography
    camera: CameraSample


def central_view(
    camera: CameraSample,
    template: FieldTemplate,
    options: VisibilityOptions = VisibilityOptions(),
) -> bool:
    """True when the camera images the full circle and the halfway line."""
    t = 2.0 * np.pi * np.arange(options.n_arc_samples) / options.n_arc_samples
    r = template.outer_radius
    arc = np.column_stack([r * np.cos(t), r * np.sin(t)])
    px, depth = camera.project_plane(arc)
    w, h = camera.image_size
    m = options.margin_px
    ok = (
        (depth > options.min_depth_m)
        & (px[:, 0] >= m)
        & (px[:, 0] <= w - m)
        & (px[:, 1] >= m)
        & (px[:, 1] <= h - m)
    )
    frac = float(np.mean(ok))
    if frac + 1e-12 < options.min_arc_fraction:
        return False
    ys = np.linspace(-template.width / 2.0, template.width / 2.0, 69)
    hw = np.column_stack([np.zeros_like(ys), ys])
    px_h, depth_h = camera.project_plane(hw)
    visible = (
        (depth_h > options.min_depth_m)
        & (px_h[:, 0] >= 0)
        & (px_h[:, 0] <= w)
        & (px_h[:, 1] >= 0)
        & (px_h[:, 1] <= h)
    )
    return int(np.sum(visible)) >= options.min_halfway_samples


def sample_camera(
    rng: np.random.Generator,
    ranges: CameraRanges = CameraRanges(),
    template: FieldTemplate | None = None,
    image_size: tuple[int, int] = (1920, 1080),
    visibility: VisibilityOptions = VisibilityOptions(),
    max_tries: int = 1000,
) -> CameraSample:
    """Rejection-sample a camera that passes the central-view predicate.

    Draws position, aim point (uniform in the center-circle disk), focal
    length and roll in a fixed order so results are reproducible for a
    given generator state.
    """
    template = template or standard_template()
    for _ in range(max_tries):
        x = rng.uniform(*ranges.x_m)
        y = rng.uniform(*ranges.y_m)
        z = rng.uniform(*ranges.height_m)
        aim_r = template.circle_radius * np.sqrt(rng.uniform())
        aim_t = rng.uniform(0.0, 2.0 * np.pi)
        focal = rng.uniform(*ranges.focal_px)
        roll = np.deg2rad(rng.uniform(*ranges.roll_deg))
        try:
            cam = CameraSample.look_at(
                position=(x, y, z),
                target=(aim_r * np.cos(aim_t), aim_r * np.sin(aim_t), 0.0),
                focal_px=focal,
                roll_rad=roll,
                image_size=image_size,
            )
        except DegeneratePose:
            continue
        if central_view(cam, template, visibility):
            return cam
    raise ExhaustedRetries(f"no admissible camera in {max_tries} tries")


def observe_circle(
    camera: CameraSample,
    template: FieldTemplate,
    n_points: int = 8,
    noise: NoiseSpec | None = None,
) -> ObservedCircle:
    """Project the concentric painted edges of the center circle.

    Samples ``n_points`` per edge (radii r -/+ thickness/2), projects
    them, and applies the requested noise. Noise-free outputs are exact
    forward projections. Raises CircleNotVisible when any sample leaves
    the frame or the positive-depth region.
    """
    if n_points < 6:
        raise InvalidConfig(f"n_points must be >= 6 for downstream fits, got {n_points}")
    noise = noise or NoiseSpec(0.0, 0)
    t = 2.0 * np.pi * np.arange(n_points) / n_points
    circ = np.column_stack([np.cos(t), np.sin(t)])

    w, h = camera.image_size
    projected = []
    for radius in (template.inner_radius, template.outer_radius):
        px, depth = camera.project_plane(radius * circ)
        if np.any(depth <= 0.0):
            raise CircleNotVisible("circle points behind the camera")
        if np.any((px < 0.0) | (px > np.array([w, h]))):
            raise CircleNotVisible("circle points outside the frame")
        projected.append(px)
    inner, outer = projected

    center_px, center_depth = camera.project_plane(np.zeros((1, 2)))
    if center_depth[0] <= 0.0:
        raise CircleNotVisible("circle center behind the camera")
    center_px = center_px[0]

    rng = np.random.default_rng(noise.seed)
    if noise.sigma_px > 0.0:
        if noise.target == "ellipse_points":
            inner = inner + rng.normal(0.0, noise.sigma_px, inner.shape)
            outer = outer + rng.normal(0.0, noise.sigma_px, outer.shape)
        else:
            center_px = center_px + rng.normal(0.0, noise.sigma_px, 2)

    h_true = camera_to_homography(camera)
    halfway = transform_under_homography(h_true, template.halfway_line)
    return ObservedCircle(
        inner_points=inner,
        outer_points=outer,
        center_px=center_px,
        halfway_line=halfway,
        h_true=h_true,
        camera=camera,
    )


def prior_from_camera(camera: CameraSample) -> CameraPrior:
    side = -1 if camera.position[1] < 0.0 else 1
    return CameraPrior(side_sign=side, image_y_down=True)


def visible_template_grid(
    camera: CameraSample,
    template: FieldTemplate,
    spacing_m: float = 1.0,
) -> np.ndarray:
    """1 m grid over the pitch clipped to the frame, plus visible keypoints."""
    xs = np.arange(-template.length / 2.0, template.length / 2.0 + 1e-9, spacing_m)
    ys = np.arange(-template.width / 2.0, template.width / 2.0 + 1e-9, spacing_m)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    named = np.array(list(template.named_keypoints.values())).reshape(-1, 2)
    world = np.vstack([grid, named])
    px, depth = camera.project_plane(world)
    w, h = camera.image_size
    keep = (
        (depth > 0.5)
        & (px[:, 0] >= 0)
        & (px[:, 0] <= w)
        & (px[:, 1] >= 0)
        & (px[:, 1] <= h)
    )
    return world[keep]


def rasterize_ring_mask(camera: CameraSample, template: FieldTemplate) -> np.ndarray:
    """Binary 1080p-style mask of the painted center-circle ring.

    Pixels whose centers fall between the projected inner and outer
    paint edges are set to 1. This is the honest, aliased mask a
    segmentation network would be trained against; the edge positions
    are quantized to the pixel grid, which is exactly the pixelation
    regime where eigenvector center recovery degrades.
    """
    h_true = camera_to_homography(camera)
    e_inner = transform_under_homography(h_true, template.circle("inner").matrix)
    e_outer = transform_under_homography(h_true, template.circle("outer").matrix)
    w, h = camera.image_size

    def interior(mat: np.ndarray) -> np.ndarray:
        m = mat / np.linalg.norm(mat)
        if m[0, 0] + m[1, 1] < 0.0:
            m = -m
        ys, xs = np.mgrid[0:h, 0:w]
        x = xs + 0.5
        y = ys + 0.5
        val = (
            m[0, 0] * x * x
            + 2.0 * m[0, 1] * x * y
            + m[1, 1] * y * y
            + 2.0 * m[0, 2] * x
            + 2.0 * m[1, 2] * y
            + m[2, 2]
        )
        return val < 0.0

    ring = interior(e_outer) & ~interior(e_inner)
    return ring.astype(np.uint8)


def ring_width_px(camera: CameraSample, template: FieldTemplate, n: int = 32) -> float:
    """Median projected gap between the two paint edges, in pixels."""
    t = 2.0 * np.pi * np.arange(n) / n
    circ = np.column_stack([np.cos(t), np.sin(t)])
    inner, _ = camera.project_plane(template.inner_radius * circ)
    outer, _ = camera.project_plane(template.outer_radius * circ)
    return float(np.median(np.linalg.norm(outer - inner, axis=1)))


@dataclass(frozen=True)
class SweepConfig:
    sigmas: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    n_cameras: int = 100
    target: str = "ellipse_points"
    variant: str = "case1"
    seed: int = 0
    n_points: int = 8
    template_config: dict | None = None
    ranges: CameraRanges = CameraRanges()
    image_size: tuple[int, int] = (1920, 1080)
    grid_spacing_m: float = 1.0
    jobs: int = 1
    max_tries: int = 1000

    def __post_init__(self):
        if self.target not in NOISE_TARGETS:
            raise InvalidConfig(f"target must be one of {NOISE_TARGETS}")
        if self.variant not in ("case1", "case3"):
            raise InvalidConfig(f"variant must be 'case1' or 'case3', got {self.variant!r}")
        if self.variant == "case3" and self.target == "center_point":
            raise InvalidConfig("case3 recovers the center itself; center noise needs case1")
        if self.n_cameras < 1:
            raise InvalidConfig("n_cameras must be >= 1")
        if len(self.sigmas) == 0 or any(s < 0 for s in self.sigmas):
            raise InvalidConfig("sigmas must be non-negative")

    def to_jsonable(self) -> dict:
        return {
            "sigmas": list(self.sigmas),
            "n_cameras": self.n_cameras,
            "target": self.target,
            "variant": self.variant,
            "seed": self.seed,
            "n_points": self.n_points,
            "template_config": self.template_config,
            "ranges": {
                "x_m": list(self.ranges.x_m),
                "y_m": list(self.ranges.y_m),
                "height_m": list(self.ranges.height_m),
                "focal_px": list(self.ranges.focal_px),
                "roll_deg": list(self.ranges.roll_deg),
            },
            "image_size": list(self.image_size),
            "grid_spacing_m": self.grid_spacing_m,
            "jobs": self.jobs,
            "max_tries": self.max_tries,
        }


@dataclass(frozen=True)
class TrialRow:
    sigma: float
    target: str
    camera_id: int
    seed: int
    case: str
    mre_px: float | None
    status: str
    h_est: np.ndarray | None = None


@dataclass(frozen=True)
class SigmaSummary:
    sigma: float
    n_ok: int
    n_failed: int
    median_mre: float
    q1_mre: float
    q3_mre: float


@dataclass(frozen=True)
class SweepReport:
    config: SweepConfig
    rows: tuple[TrialRow, ...]
    h_true: dict[int, np.ndarray] = field(default_factory=dict)

    def summaries(self) -> list[SigmaSummary]:
        out = []
        for sigma in self.config.sigmas:
            vals = [r.mre_px for r in self.rows if r.sigma == sigma and r.status == "ok"]
            failed = sum(1 for r in self.rows if r.sigma == sigma and r.status != "ok")
            if vals:
                q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
            else:
                q1 = med = q3 = float("nan")
            out.append(SigmaSummary(sigma, len(vals), failed, float(med), float(q1), float(q3)))
        return out

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(SWEEP_CSV_HEADER + "\n")
        for r in self.rows:
            mre = "" if r.mre_px is None else format(r.mre_px, ".9e")
            buf.write(
                f"{r.sigma:g},{r.target},{r.camera_id},{r.seed},{r.case},{mre},{r.status}\n"
            )
        return buf.getvalue()

    def to_csv(self, path: str):
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    def summary_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("sigma,n_ok,n_failed,median_mre_px,q1_mre_px,q3_mre_px\n")
        for s in self.summaries():
            buf.write(
                f"{s.sigma:g},{s.n_ok},{s.n_failed},"
                f"{s.median_mre:.9e},{s.q1_mre:.9e},{s.q3_mre:.9e}\n"
            )
        return buf.getvalue()


def _noise_seed(config: SweepConfig, camera_id: int, sigma_index: int) -> int:
    ss = np.random.SeedSequence(entropy=config.seed, spawn_key=(camera_id, 1 + sigma_index))
    return int(ss.generate_state(1)[0])


def _run_camera(config: SweepConfig, camera_id: int):
    template = standard_template(config.template_config)
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(camera_id, 0))
    )
    cam = sample_camera(
        rng,
        ranges=config.ranges,
        template=template,
        image_size=config.image_size,
        max_tries=config.max_tries,
    )
    h_true = camera_to_homography(cam)
    grid = visible_template_grid(cam, template, config.grid_spacing_m)
    prior = prior_from_camera(cam)

    rows = []
    for sigma_index, sigma in enumerate(config.sigmas):
        seed = _noise_seed(config, camera_id, sigma_index)
        try:
            obs = observe_circle(
                cam, template, config.n_points, NoiseSpec(sigma, seed, config.target)
            )
            outer = fit_ellipse_direct(obs.outer_points)
            if config.variant == "case1":
                circle_obs = CircleObservation(
                    ellipse=outer,
                    imaged_center=HomPoint2.from_xy(*obs.center_px),
                    support_line=("halfway", obs.halfway_line),
                    world_circle="outer",
                    case="case1",
                )
            else:
                inner = fit_ellipse_direct(obs.inner_points)
                circle_obs = CircleObservation(
                    ellipse=outer,
                    support_line=("halfway", obs.halfway_line),
                    concentric=(inner, outer),
                    world_circle="outer",
                    case="case3",
                )
            corr = derive_correspondences(circle_obs, template, prior=prior)
            h_est = estimate_homography_dlt(DltProblem.from_correspondences(corr))
            mre = mean_reprojection_error(obs.h_true, h_est, grid)
            rows.append(
                TrialRow(sigma, config.target, camera_id, seed, corr.case, mre, "ok", h_est.matrix)
            )
        except CircleFieldError as exc:
            rows.append(
                TrialRow(
                    sigma, config.target, camera_id, seed, config.variant, None,
                    type(exc).__name__,
                )
            )
    return camera_id, h_true.matrix, rows


def run_noise_sweep(config: SweepConfig) -> SweepReport:
    """Run the full noise sweep; per-trial failures become recorded rows.

    Cameras are independent; with ``config.jobs > 1`` they are processed
    in a process pool. Row order (and thus CSV bytes) is independent of
    the execution schedule.
    """
    ids = list(range(config.n_cameras))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_camera_star, [(config, i) for i in ids]))
    else:
        results = [_run_camera(config, i) for i in ids]

    h_true = {cid: h for cid, h, _ in results}
    all_rows = [row for _, _, rows in results for row in rows]
    sigma_order = {s: i for i, s in enumerate(config.sigmas)}
    all_rows.sort(key=lambda r: (sigma_order[r.sigma], r.camera_id))
    return SweepReport(config=config, rows=tuple(all_rows), h_true=h_true)


def _run_camera_star(args):
    return _run_camera(*args)
