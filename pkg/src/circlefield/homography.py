"""Homography estimation and evaluation.

The direct linear transform here accepts point and line correspondences
together. A point pair contributes the rows of ``x' x (H X) = 0``; a
line pair constrains the transpose map, ``l x (H^T l') = 0``, since
lines pull back by ``H^T``. Both frames are conditioned with a
Hartley-style similarity computed from the point pairs, and line
coefficient vectors are rescaled to unit direction norm so their rows
weigh comparably to the point rows.

Convention: H maps world (template, meters) to image (pixels);
serialized as row-major ``h`` with ``convention: image_from_world``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import IllConditioned, PointAtInfinity, RankDeficient, DegeneratePose
from .projective import HomLine2, HomPoint2, Homography

if TYPE_CHECKING:  # pragma: no cover
    from .correspond import CorrespondenceSet, LinePair, PointPair

COND_LIMIT = 1e12


@dataclass(frozen=True)
class DltProblem:
    """Constraint set for the DLT. Weights default to 1 per pair."""

    point_pairs: tuple = ()
    line_pairs: tuple = ()
    point_weights: tuple | None = None
    line_weights: tuple | None = None

    @classmethod
    def from_correspondences(cls, corr: "CorrespondenceSet") -> "DltProblem":
        return cls(point_pairs=tuple(corr.point_pairs), line_pairs=tuple(corr.line_pairs))

    def constraint_count(self) -> int:
        return len(self.point_pairs) + len(self.line_pairs)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _normalizing_similarity(points_xy: np.ndarray) -> np.ndarray:
    """Hartley conditioning: centroid to origin, mean radius sqrt(2)."""
    if points_xy.shape[0] == 0:
        return np.eye(3)
    centroid = points_xy.mean(axis=0)
    dist = np.mean(np.linalg.norm(points_xy - centroid, axis=1))
    scale = np.sqrt(2.0) / dist if dist > 1e-12 else 1.0
    return np.array([
        [scale, 0.0, -scale * centroid[0]],
        [0.0, scale, -scale * centroid[1]],
        [0.0, 0.0, 1.0],
    ])


def _unit_direction_line(l: np.ndarray) -> np.ndarray:
    n = np.hypot(l[0], l[1])
    if n <= 1e-14 * np.linalg.norm(l):
        return l / np.linalg.norm(l)  # line at infinity: plain unit norm
    return l / n


def estimate_homography_dlt(problem: DltProblem, refine: bool = False) -> Homography:
    """Least-squares homography from mixed point/line correspondences.

    Stacks all three cross-product rows per correspondence, solves by
    SVD, and de-normalizes. The result has unit Frobenius norm and
    positive determinant. ``refine`` runs an optional Levenberg-Marquardt
    pass on the point reprojection residuals; it is off by default so
    the estimate stays the plain algebraic optimum.

    Raises RankDeficient when the system cannot determine 8 degrees of
    freedom and IllConditioned when its condition number passes 1e12.
    """
    n_pts = len(problem.point_pairs)
    n_lns = len(problem.line_pairs)
    if 2 * n_pts + 2 * n_lns < 8:
        raise RankDeficient(f"{n_pts} points + {n_lns} lines cannot fix 8 dof")

    img_xy = np.array([p.image.dehomogenized() for p in problem.point_pairs]).reshape(-1, 2)
    wld_xy = np.array([p.world.dehomogenized() for p in problem.point_pairs]).reshape(-1, 2)
    t_img = _normalizing_similarity(img_xy)
    t_wld = _normalizing_similarity(wld_xy)
    t_img_inv_t = np.linalg.inv(t_img).T
    t_wld_inv_t = np.linalg.inv(t_wld).T

    pw = problem.point_weights or (1.0,) * n_pts
    lw = problem.line_weights or (1.0,) * n_lns
    if len(pw) != n_pts or len(lw) != n_lns:
        raise ValueError("weight lengths must match pair lists")

    rows = []
    for weight, pair in zip(pw, problem.point_pairs):
        xi = t_img @ pair.image.coords
        xi = xi / np.linalg.norm(xi)
        xw = t_wld @ pair.world.coords
        xw = xw / np.linalg.norm(xw)
        sk = _skew(xi)
        for k in range(3):
            rows.append(weight * np.kron(sk[k], xw))
    for weight, pair in zip(lw, problem.line_pairs):
        li = _unit_direction_line(t_img_inv_t @ pair.image.coeffs)
        lw_vec = _unit_direction_line(t_wld_inv_t @ pair.world.coeffs)
        sk = _skew(lw_vec)
        for k in range(3):
            rows.append(weight * np.kron(li, sk[k]))

    a = np.vstack(rows)
    svals = np.linalg.svd(a, compute_uv=False)
    rank_tol = svals[0] * max(a.shape) * np.finfo(float).eps
    if svals[7] <= rank_tol:
        raise RankDeficient(
            f"constraint matrix rank {int(np.sum(svals > rank_tol))} < 8"
        )
    if svals[0] / svals[7] > COND_LIMIT:
        raise IllConditioned(
            f"condition number {svals[0] / svals[7]:.3e} exceeds {COND_LIMIT:.1e}"
        )
    _, _, vt = np.linalg.svd(a)
    h_norm = vt[-1].reshape(3, 3)
    h = np.linalg.solve(t_img, h_norm @ t_wld)
    result = Homography(h).normalized()
    if refine:
        result = _refine_lm(result, problem)
    return result


def _refine_lm(initial: Homography, problem: DltProblem) -> Homography:
    """Nonlinear reprojection refinement over the point pairs."""
    from scipy.optimize import least_squares

    if len(problem.point_pairs) < 5:
        return initial
    world = np.array([[*p.world.dehomogenized(), 1.0] for p in problem.point_pairs])
    target = np.array([p.image.dehomogenized() for p in problem.point_pairs])

    def residuals(h9):
        m = h9.reshape(3, 3)
        proj = world @ m.T
        w = proj[:, 2:]
        if np.any(np.abs(w) < 1e-12):
            return np.full(target.size, 1e6)
        return ((proj[:, :2] / w) - target).ravel()

    sol = least_squares(residuals, initial.matrix.ravel(), method="lm", xtol=1e-14)
    try:
        return Homography(sol.x.reshape(3, 3)).normalized()
    except Exception:
        return initial


def camera_to_homography(camera) -> Homography:
    """Plane-to-image homography induced by a pinhole camera over z = 0.

    With projection ``K [R | t]`` and the plane z = 0, the map is
    ``K [r1 r2 t]`` (first two rotation columns and the translation).
    The camera must sit strictly above the plane and its optical axis
    must not be parallel to it.
    """
    r = np.asarray(camera.rotation, dtype=float)
    pos = np.asarray(camera.position, dtype=float)
    if pos[2] <= 0.0:
        raise DegeneratePose(f"camera height {pos[2]} must be positive")
    if abs(r[2, 2]) < 1e-9:
        raise DegeneratePose("optical axis is parallel to the field plane")
    k = np.array([
        [camera.focal_px, 0.0, camera.principal_point[0]],
        [0.0, camera.focal_px, camera.principal_point[1]],
        [0.0, 0.0, 1.0],
    ])
    t = -r @ pos
    h = k @ np.column_stack([r[:, 0], r[:, 1], t])
    return Homography(h).normalized()


def mean_reprojection_error(
    h_true: Homography,
    h_est: Homography,
    world_points: np.ndarray,
) -> float:
    """Mean Euclidean distance between the two images of the given points.

    ``world_points`` is (n, 2) in template coordinates. Points that
    either map sends (numerically) to infinity raise PointAtInfinity.
    """
    pts = np.asarray(world_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError(f"world_points must be non-empty (n, 2), got {pts.shape}")
    hom = np.column_stack([pts, np.ones(len(pts))])

    def _project(h: Homography) -> np.ndarray:
        proj = hom @ h.matrix.T
        w = proj[:, 2]
        bad = np.abs(w) <= 1e-12 * np.linalg.norm(proj, axis=1)
        if np.any(bad):
            raise PointAtInfinity(f"{int(bad.sum())} point(s) map to infinity")
        return proj[:, :2] / w[:, None]

    diff = _project(h_true) - _project(h_est)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def apply_homography_xy(h: Homography, points_xy: np.ndarray) -> np.ndarray:
    """Map (n, 2) affine points through H, returning (n, 2)."""
    pts = np.asarray(points_xy, dtype=float).reshape(-1, 2)
    hom = np.column_stack([pts, np.ones(len(pts))])
    proj = hom @ h.matrix.T
    return proj[:, :2] / proj[:, 2:]
