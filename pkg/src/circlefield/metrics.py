"""Diagnostics: opposed-point collinearity and tangent consistency.

Opposite points on the circle are collinear with the imaged center in
any view (incidence survives the homography), so the distance from the
center to the join of an opposed pair is a calibration-free audit of a
detector's output. The tangent check exploits the dual fact: tangents
at the two ends of a central chord meet on the vanishing line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conics import Conic, geom_from_conic, tangent_at
from .errors import MissingCenter, NoCompletePairs
from .projective import HomLine2, HomPoint2, join_points, meet_lines

COLLINEARITY_TOL = 1e-7
TANGENT_MEET_TOL = 1e-6

# Detector keypoints come in mirror pairs about the circle center. The
# halfway/circle intersections are deliberately absent: those belong to
# the support-line construction, not to the audit.
DETECTOR_OPPOSED_PAIRS = (
    ("circle_axis_pos", "circle_axis_neg"),
    ("circle_diag_pp", "circle_diag_nn"),
    ("circle_diag_pn", "circle_diag_np"),
)

DERIVED_OPPOSED_PAIRS = (
    ("a", "b"),
    ("d", "e"),
    ("g_ad", "g_be"),
    ("g_db", "g_ea"),
)


def _as_point(value) -> HomPoint2:
    if isinstance(value, HomPoint2):
        return value
    arr = np.asarray(value, dtype=float).ravel()
    if arr.size == 2:
        return HomPoint2.from_xy(arr[0], arr[1])
    return HomPoint2(arr)


@dataclass(frozen=True)
class PairResidual:
    name_a: str
    name_b: str
    residual_px: float
    collinear: bool


@dataclass(frozen=True)
class CollinearityAudit:
    center_name: str
    residuals: tuple[PairResidual, ...]
    skipped: tuple[tuple[str, str], ...]
    tol_px: float

    @property
    def max_residual_px(self) -> float:
        return max(r.residual_px for r in self.residuals)

    @property
    def all_collinear(self) -> bool:
        return all(r.collinear for r in self.residuals)

    def csv_text(self) -> str:
        lines = ["name_a,name_b,residual_px,collinear"]
        for r in self.residuals:
            lines.append(f"{r.name_a},{r.name_b},{r.residual_px:.9e},{int(r.collinear)}")
        return "\n".join(lines) + "\n"


def collinearity_audit(
    keypoints: dict,
    center=None,
    pairs=DETECTOR_OPPOSED_PAIRS,
    tol_px: float = COLLINEARITY_TOL,
    center_name: str = "circle_center",
) -> CollinearityAudit:
    """Distance from the imaged center to each opposed-pair chord.

    ``keypoints`` maps names to image positions (2-vectors or
    homogeneous points). The center defaults to ``keypoints[center_name]``.
    Pairs with a missing endpoint are skipped; if every pair is skipped
    the audit raises NoCompletePairs.
    """
    if center is None:
        if center_name not in keypoints:
            raise MissingCenter(f"no {center_name!r} among keypoints and no explicit center")
        center = keypoints[center_name]
    c = _as_point(center)

    residuals = []
    skipped = []
    for name_a, name_b in pairs:
        if name_a not in keypoints or name_b not in keypoints:
            skipped.append((name_a, name_b))
            continue
        chord = join_points(_as_point(keypoints[name_a]), _as_point(keypoints[name_b]))
        r = chord.distance_to(c)
        residuals.append(PairResidual(name_a, name_b, float(r), bool(r <= tol_px)))
    if not residuals:
        raise NoCompletePairs("no opposed pair has both endpoints present")
    return CollinearityAudit(
        center_name=center_name,
        residuals=tuple(residuals),
        skipped=tuple(skipped),
        tol_px=tol_px,
    )


def audit_from_correspondences(
    corr,
    imaged_center,
    pairs=DERIVED_OPPOSED_PAIRS,
    tol_px: float = COLLINEARITY_TOL,
) -> CollinearityAudit:
    """Collinearity audit over a derived correspondence set's image points."""
    keypoints = {p.name: p.image for p in corr.point_pairs}
    return collinearity_audit(
        keypoints, center=imaged_center, pairs=pairs, tol_px=tol_px, center_name="imaged_center"
    )


@dataclass(frozen=True)
class TangentMeetResidual:
    residual: float
    consistent: bool


@dataclass(frozen=True)
class TangentReport:
    residuals: tuple[TangentMeetResidual, ...]
    tol: float

    @property
    def all_consistent(self) -> bool:
        return all(r.consistent for r in self.residuals)

    @property
    def max_residual(self) -> float:
        return max(r.residual for r in self.residuals)


def tangent_consistency(
    conic: Conic,
    point_pairs,
    vanishing_line: HomLine2,
    tol: float = TANGENT_MEET_TOL,
) -> TangentReport:
    """Check that tangents at paired points meet on the vanishing line.

    The residual is the absolute cosine between the unit-normalized
    tangent intersection and the unit-normalized vanishing line, which
    stays meaningful when the tangents meet at infinity (true central
    chords of a fronto-parallel view do; arbitrary chords do not).
    """
    lv = np.asarray(vanishing_line.coeffs, dtype=float)
    lv = lv / np.linalg.norm(lv)
    residuals = []
    for p, q in point_pairs:
        tp = tangent_at(conic, _as_point(p))
        tq = tangent_at(conic, _as_point(q))
        m = meet_lines(tp, tq).coords
        m = m / np.linalg.norm(m)
        r = float(abs(np.dot(m, lv)))
        residuals.append(TangentMeetResidual(r, bool(r <= tol)))
    return TangentReport(residuals=tuple(residuals), tol=tol)


def great_axis_pair(conic: Conic) -> tuple[HomPoint2, HomPoint2]:
    """Endpoints of the imaged ellipse's major axis.

    These look like an opposed pair but are generally not the image of
    any central chord, so they make a natural negative control for the
    tangent-consistency check.
    """
    geom = geom_from_conic(conic)
    u = np.array([np.cos(geom.angle), np.sin(geom.angle)])
    a = geom.center + geom.semi_axes[0] * u
    b = geom.center - geom.semi_axes[0] * u
    return HomPoint2.from_xy(*a), HomPoint2.from_xy(*b)
