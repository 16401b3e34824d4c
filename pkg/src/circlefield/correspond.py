"""Turn an imaged center circle into point/line correspondences.

Given the ellipse that images the field's center circle, the imaged
circle center, and one extra piece of support (a known line through the
plane or a known point), planar pole-polar geometry pins down where
specific template points landed in the image, without knowing the
homography first:

- the polar of the imaged center is the vanishing line of the field
  plane (the center's polar with respect to the circle itself is the
  line at infinity, and polarity is projectively covariant);
- a support line gives the vanishing point of its direction family,
  whose polar is the image of the perpendicular diameter (case 1);
- a support point gives the diameter through it, whose pole collects
  the tangents at its endpoints (case 2);
- two concentric circles let the imaged common center be read off as
  the interior eigenvector of E2^{-1} E1 (case 3), after which case 1
  or 2 applies.

Opposite labels (a/b, d/e) are symmetric in the data; a `CameraPrior`
breaks the tie. Everything here is pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .conics import Conic, circle_conic, intersect_line_conic, tangent_at
from .errors import (
    AmbiguousPrior,
    CenterOnConic,
    DegenerateJoin,
    InsufficientEvidence,
    MissingCenter,
    MissingLine,
    MissingPoint,
    NoIntersection,
    NotAnEllipse,
    NotNested,
    NoValidEigenvector,
)
from .projective import (
    HomLine2,
    HomPoint2,
    canonical,
    join_points,
    meet_lines,
    polar_of_point,
    pole_of_line,
    scale_equivalent,
)
from .template import FieldTemplate

# Intersections shallower than this angle (degrees) are flagged, not rejected.
GRAZING_ANGLE_DEG = 2.0
_INTERIOR_MARGIN = 1e-10


@dataclass(frozen=True)
class PointPair:
    """Named image/world point correspondence."""

    name: str
    image: HomPoint2
    world: HomPoint2


@dataclass(frozen=True)
class LinePair:
    """Named image/world line correspondence."""

    name: str
    image: HomLine2
    world: HomLine2


@dataclass(frozen=True)
class CorrespondenceSet:
    case: str
    point_pairs: tuple[PointPair, ...]
    line_pairs: tuple[LinePair, ...]
    vanishing_line: HomLine2
    flags: tuple[str, ...] = ()

    def point(self, name: str) -> PointPair:
        for pair in self.point_pairs:
            if pair.name == name:
                return pair
        raise KeyError(name)

    def line(self, name: str) -> LinePair:
        for pair in self.line_pairs:
            if pair.name == name:
                return pair
        raise KeyError(name)

    def point_names(self) -> list[str]:
        return [p.name for p in self.point_pairs]

    def line_names(self) -> list[str]:
        return [p.name for p in self.line_pairs]


@dataclass(frozen=True)
class CircleObservation:
    """One imaged circle plus whatever support the image provides.

    ``world_circle`` names the template circle the ellipse corresponds to
    ('center', 'inner' or 'outer'), so that observations built from the
    painted edges stay metrically consistent. ``concentric`` carries the
    inner/outer fits when the center must be recovered (case 3).
    """

    ellipse: Conic
    imaged_center: HomPoint2 | None = None
    support_line: tuple[str, HomLine2] | None = None
    support_point: tuple[str, HomPoint2] | None = None
    concentric: tuple[Conic, Conic] | None = None
    world_circle: str = "center"
    case: str | None = None

    def __post_init__(self):
        if self.ellipse.classify() != "ellipse":
            raise NotAnEllipse(f"observation conic classifies as {self.ellipse.classify()}")
        if self.imaged_center is not None and not self.ellipse.strictly_inside(
            self.imaged_center, _INTERIOR_MARGIN
        ):
            raise CenterOnConic(
                "imaged center is not strictly interior to the ellipse "
                f"(normalized residual {self.ellipse.evaluate(self.imaged_center):.3e})"
            )


@dataclass(frozen=True)
class CameraPrior:
    """Coarse viewing prior used only to break the opposite-point symmetry.

    side_sign: -1 when the camera sits on the negative-y touchline side
    (the common broadcast position), +1 for the opposite side.
    image_y_down: True for pixel coordinates (y grows downward).
    """

    side_sign: int = -1
    image_y_down: bool = True

    def __post_init__(self):
        if self.side_sign not in (-1, 1):
            raise ValueError(f"side_sign must be -1 or +1, got {self.side_sign}")

    def direction_map(self) -> np.ndarray:
        """Approximate image direction of a world direction, up to positive scale."""
        sx = -float(self.side_sign)
        sy = float(self.side_sign) if self.image_y_down else -float(self.side_sign)
        return np.array([[sx, 0.0], [0.0, sy]])


def vanishing_line_from_center(ellipse: Conic, center: HomPoint2) -> HomLine2:
    """Vanishing line of the circle's plane: the polar of the imaged center.

    Requires the center strictly inside the ellipse; the polar of an
    interior point never meets the conic, which is exactly what makes it
    a plausible horizon.
    """
    if ellipse.classify() != "ellipse":
        raise NotAnEllipse(f"conic classifies as {ellipse.classify()}")
    if not ellipse.strictly_inside(center, _INTERIOR_MARGIN):
        raise CenterOnConic(
            f"center residual {ellipse.evaluate(center):.3e}; must be strictly interior"
        )
    return polar_of_point(ellipse.matrix, center)


def _canonical_line(line: HomLine2) -> HomLine2:
    return HomLine2(canonical(line.coeffs))


def _affine_eval(line: HomLine2, p: HomPoint2) -> float:
    v = p.coords / p.coords[2]
    return float(line.coeffs @ v)


def _two_intersections(line: HomLine2, conic: Conic, what: str) -> list[HomPoint2]:
    pts = intersect_line_conic(_canonical_line(line), conic)
    if len(pts) != 2:
        raise NoIntersection(f"{what} meets the conic in {len(pts)} point(s), need 2")
    return pts


def _grazing_flags(conic: Conic, line: HomLine2, pts, label: str) -> list[str]:
    flags = []
    sin_min = np.sin(np.deg2rad(GRAZING_ANGLE_DEG))
    for p in pts:
        tangent = tangent_at(conic, p, tol=1e-5)
        dl = line.direction()
        dt = tangent.direction()
        if abs(dl[0] * dt[1] - dl[1] * dt[0]) < sin_min:
            flags.append(f"grazing:{label}")
            break
    return flags


def _world_chords(l1w: HomLine2, radius: float):
    """World counterparts: parallel and perpendicular diameters of the circle."""
    a, b, _ = l1w.coeffs
    origin = HomPoint2.from_xy(0.0, 0.0)
    parallel = join_points(HomPoint2(np.array([b, -a, 0.0])), origin)
    perpendicular = join_points(HomPoint2(np.array([a, b, 0.0])), origin)
    circle = circle_conic((0.0, 0.0), radius)
    return _canonical_line(parallel), _canonical_line(perpendicular), circle


def _tangent_pairs(conic: Conic, circle: Conic, point_pairs: list[PointPair]) -> list[LinePair]:
    out = []
    for pair in point_pairs:
        out.append(
            LinePair(
                name=f"t_{pair.name}",
                image=tangent_at(conic, pair.image, tol=1e-5),
                world=tangent_at(circle, pair.world, tol=1e-5),
            )
        )
    return out


def derive_case1(
    obs: CircleObservation,
    template: FieldTemplate,
    prior: CameraPrior | None = None,
) -> CorrespondenceSet:
    """Correspondences from an ellipse, its center, and a known support line.

    The support line and the vanishing line fix the vanishing point v of
    the support direction; the chord through the imaged center towards v
    images the parallel diameter, and the polar of v images the
    perpendicular one. Their conic intersections (a, b and d, e) are the
    images of the diameter endpoints, known template points.
    """
    if obs.imaged_center is None:
        raise MissingCenter("case 1 requires the imaged circle center")
    if obs.support_line is None:
        raise MissingLine("case 1 requires a named support line")
    support_name, l1 = obs.support_line
    if support_name not in template.named_lines:
        raise MissingLine(f"template has no line named {support_name!r}")
    l1w = template.named_lines[support_name]

    ellipse = obs.ellipse
    c = obs.imaged_center
    lv = vanishing_line_from_center(ellipse, c)
    v = meet_lines(l1, lv)
    l2 = _canonical_line(join_points(v, c))
    l3 = _canonical_line(polar_of_point(ellipse.matrix, v))

    a_img, b_img = _two_intersections(l2, ellipse, "parallel chord")
    d_img, e_img = _two_intersections(l3, ellipse, "perpendicular chord")
    flags = _grazing_flags(ellipse, l2, (a_img, b_img), "l2")
    flags += _grazing_flags(ellipse, l3, (d_img, e_img), "l3")

    radius = template.circle_radius_of(obs.world_circle)
    l2w, l3w, circle = _world_chords(l1w, radius)
    aw, bw = _two_intersections(l2w, circle, "world parallel chord")
    dw, ew = _two_intersections(l3w, circle, "world perpendicular chord")

    points = [
        PointPair("a", a_img, aw),
        PointPair("b", b_img, bw),
        PointPair("d", d_img, dw),
        PointPair("e", e_img, ew),
    ]
    lines = [LinePair("l2", l2, l2w), LinePair("l3", l3, l3w)]

    # A support line that misses the center contributes its own chord.
    if not scale_equivalent(l1w.coeffs, l2w.coeffs):
        s_img = intersect_line_conic(_canonical_line(l1), ellipse)
        s_w = intersect_line_conic(_canonical_line(l1w), circle)
        if len(s_img) == 2 and len(s_w) == 2:
            points.append(PointPair("s1", s_img[0], s_w[0]))
            points.append(PointPair("s2", s_img[1], s_w[1]))
        lines.append(LinePair("l1", _canonical_line(l1), _canonical_line(l1w)))

    lines.extend(_tangent_pairs(ellipse, circle, points[:4]))

    corr = CorrespondenceSet(
        case="case1",
        point_pairs=tuple(points),
        line_pairs=tuple(lines),
        vanishing_line=lv,
        flags=tuple(flags),
    )
    if prior is not None:
        corr = resolve_orientation(corr, prior)
    return corr


def derive_case2(
    obs: CircleObservation,
    template: FieldTemplate,
    prior: CameraPrior | None = None,
) -> CorrespondenceSet:
    """Correspondences from an ellipse, its center, and a known support point.

    The chord through the support point and the center images the
    diameter through the point's world position; the pole of that chord
    is where the endpoint tangents meet (it lies on the vanishing line),
    and joining it back to the center images the perpendicular diameter.
    When the support point sits on the halfway line this reduces to the
    same construction as case 1.
    """
    if obs.imaged_center is None:
        raise MissingCenter("case 2 requires the imaged circle center")
    if obs.support_point is None:
        raise MissingPoint("case 2 requires a named support point")
    point_name, x_img = obs.support_point
    if point_name not in template.named_keypoints:
        raise MissingPoint(f"template has no keypoint named {point_name!r}")
    xw = template.named_keypoints[point_name]
    if np.hypot(xw[0], xw[1]) <= 1e-12:
        raise DegenerateJoin("support point coincides with the circle center in the template")

    ellipse = obs.ellipse
    c = obs.imaged_center
    lv = vanishing_line_from_center(ellipse, c)
    l1 = _canonical_line(join_points(x_img, c))  # DegenerateJoin when x ~ c
    v = pole_of_line(ellipse.matrix, l1)
    l2 = _canonical_line(join_points(v, c))

    a_img, b_img = _two_intersections(l1, ellipse, "support chord")
    d_img, e_img = _two_intersections(l2, ellipse, "perpendicular chord")
    flags = _grazing_flags(ellipse, l1, (a_img, b_img), "l1")
    flags += _grazing_flags(ellipse, l2, (d_img, e_img), "l2")

    radius = template.circle_radius_of(obs.world_circle)
    origin = HomPoint2.from_xy(0.0, 0.0)
    l1w = _canonical_line(join_points(template.keypoint(point_name), origin))
    a1, b1, _ = l1w.coeffs
    l2w = _canonical_line(join_points(HomPoint2(np.array([a1, b1, 0.0])), origin))
    circle = circle_conic((0.0, 0.0), radius)
    aw, bw = _two_intersections(l1w, circle, "world support chord")
    dw, ew = _two_intersections(l2w, circle, "world perpendicular chord")

    points = [
        PointPair("a", a_img, aw),
        PointPair("b", b_img, bw),
        PointPair("d", d_img, dw),
        PointPair("e", e_img, ew),
    ]
    lines = [LinePair("l1", l1, l1w), LinePair("l2", l2, l2w)]
    lines.extend(_tangent_pairs(ellipse, circle, points[:4]))

    corr = CorrespondenceSet(
        case="case2",
        point_pairs=tuple(points),
        line_pairs=tuple(lines),
        vanishing_line=lv,
        flags=tuple(flags),
    )
    if prior is not None:
        corr = resolve_orientation(corr, prior)
    return corr


def recover_center_concentric(e1: Conic, e2: Conic) -> tuple[HomPoint2, HomLine2]:
    """Imaged common center of two concentric circles, plus the vanishing line.

    Both circles have the same center and therefore the same center
    polar, so the imaged center is a fixed point of the composed map
    E2^{-1} E1: an eigenvector. That matrix is similar to C2^{-1} C1,
    whose eigenvalues are {1, 1, (r1/r2)^2}; the simple eigenvalue
    carries the center while the double one spans imaged infinity, so
    selecting the eigenvector strictly interior to both ellipses is
    unambiguous. The polars of the recovered center with respect to E1
    and E2 agree up to scale; the first is returned.
    """
    from .conics import geom_from_conic

    g1 = geom_from_conic(e1)  # NotAnEllipse when the input is not one
    g2 = geom_from_conic(e2)

    def _inside_all(geom: "object", other: Conic) -> bool:
        pts = geom.boundary_points(32)
        return all(
            other.strictly_inside(HomPoint2.from_xy(px, py), 0.0) for px, py in pts
        )

    if not (_inside_all(g1, e2) or _inside_all(g2, e1)):
        raise NotNested("neither ellipse lies strictly inside the other")

    m = np.linalg.solve(e2.interior_normalized(), e1.interior_normalized())
    evals, evecs = np.linalg.eig(m)
    best = None
    best_score = None
    for lam, vec in zip(evals, evecs.T):
        if abs(lam.imag) > 1e-8 * (1.0 + abs(lam)):
            continue
        if np.max(np.abs(vec.imag)) > 1e-8 * np.max(np.abs(vec.real) + 1e-300):
            continue
        p = HomPoint2(canonical(vec.real))
        score = max(e1.evaluate(p), e2.evaluate(p))
        if score < -_INTERIOR_MARGIN and (best_score is None or score < best_score):
            best, best_score = p, score
    if best is None:
        raise NoValidEigenvector("no real eigenvector is interior to both ellipses")
    return best, polar_of_point(e1.matrix, best)


def _swap_images(pairs: dict, first: str, second: str):
    pairs[first], pairs[second] = (
        replace(pairs[first], image=pairs[second].image),
        replace(pairs[second], image=pairs[first].image),
    )


def resolve_orientation(corr: CorrespondenceSet, prior: CameraPrior) -> CorrespondenceSet:
    """Assign opposite labels consistently with a coarse camera prior.

    For each opposed pair the world displacement is pushed through the
    prior's direction map and compared against the image displacement;
    a negative dot product swaps the images. Green points and diagonals,
    when present, are renamed from the (possibly swapped) base labels.
    Raises AmbiguousPrior when a comparison is too close to call.
    """
    points = {p.name: p for p in corr.point_pairs}
    lines = {l.name: l for l in corr.line_pairs}
    amap = prior.direction_map()

    for first, second in (("a", "b"), ("d", "e"), ("s1", "s2")):
        if first not in points or second not in points:
            continue
        p1, p2 = points[first], points[second]
        actual = p1.image.dehomogenized() - p2.image.dehomogenized()
        expected = amap @ (p1.world.dehomogenized() - p2.world.dehomogenized())
        dot = float(actual @ expected)
        if abs(dot) <= 1e-9 * (np.linalg.norm(actual) * np.linalg.norm(expected) + 1e-300):
            raise AmbiguousPrior(f"prior cannot order the {first}/{second} pair")
        if dot < 0.0:
            _swap_images(points, first, second)
            tf, ts = f"t_{first}", f"t_{second}"
            if tf in lines and ts in lines:
                lines[tf], lines[ts] = (
                    replace(lines[tf], image=lines[ts].image),
                    replace(lines[ts], image=lines[tf].image),
                )

    green_names = [n for n in points if n.startswith("g_")]
    if green_names:
        renamed = _relabel_greens(points, lines, green_names)
        points, lines = renamed

    order_p = [p.name for p in corr.point_pairs]
    order_l = [l.name for l in corr.line_pairs]
    return replace(
        corr,
        point_pairs=tuple(points[n] for n in order_p),
        line_pairs=tuple(lines[n] for n in order_l),
    )


def _green_name(p, chord_de, chord_ab, ref_a, ref_d) -> str:
    side_a = _affine_eval(chord_de, p) * _affine_eval(chord_de, ref_a) > 0.0
    side_d = _affine_eval(chord_ab, p) * _affine_eval(chord_ab, ref_d) > 0.0
    return {
        (True, True): "g_ad",
        (False, True): "g_db",
        (False, False): "g_be",
        (True, False): "g_ea",
    }[(side_a, side_d)]


def _relabel_greens(points: dict, lines: dict, green_names: list[str]):
    a, b, d, e = points["a"], points["b"], points["d"], points["e"]
    chord_ab_img = join_points(a.image, b.image)
    chord_de_img = join_points(d.image, e.image)
    chord_ab_w = join_points(a.world, b.world)
    chord_de_w = join_points(d.world, e.world)

    by_img = {}
    by_world = {}
    for name in green_names:
        pair = points[name]
        by_img[_green_name(pair.image, chord_de_img, chord_ab_img, a.image, d.image)] = pair.image
        by_world[_green_name(pair.world, chord_de_w, chord_ab_w, a.world, d.world)] = pair.world
    if set(by_img) != set(by_world) or len(by_img) != len(green_names):
        raise AmbiguousPrior("green points could not be relabelled consistently")
    for name in by_img:
        points[name] = PointPair(name, by_img[name], by_world[name])

    # diagonals are just the joins of opposite greens; rebuild them
    if any(n.startswith("diag_") for n in lines):
        for key, (gx, gy) in (("diag_ad_be", ("g_ad", "g_be")), ("diag_db_ea", ("g_db", "g_ea"))):
            lines[key] = LinePair(
                key,
                _canonical_line(join_points(points[gx].image, points[gy].image)),
                _canonical_line(join_points(points[gx].world, points[gy].world)),
            )
    return points, lines


def extend_green_points(
    corr: CorrespondenceSet,
    ellipse: Conic,
    template: FieldTemplate,
) -> CorrespondenceSet:
    """Add the four diagonal circle points and the trapezoid diagonals.

    The tangents at a, b, d, e bound a trapezoid whose diagonals pass
    through the imaged center; each diagonal cuts the ellipse at the
    images of two of the +/-45 degree circle points. Adds 4 point pairs
    and 2 line pairs, bringing a successful derivation to 8 circle
    points and 8 lines.
    """
    try:
        a, b, d, e = (corr.point(n) for n in ("a", "b", "d", "e"))
        t = {n: corr.line(f"t_{n}") for n in ("a", "b", "d", "e")}
    except KeyError as exc:
        raise MissingPoint(f"correspondence set lacks {exc} needed for the extension") from exc

    radius = float(np.linalg.norm(a.world.dehomogenized()))
    circle = circle_conic((0.0, 0.0), radius)

    def _diag(corner1, corner2):
        v1 = meet_lines(corner1[0].image, corner1[1].image)
        v2 = meet_lines(corner2[0].image, corner2[1].image)
        img = _canonical_line(join_points(v1, v2))
        w1 = meet_lines(corner1[0].world, corner1[1].world)
        w2 = meet_lines(corner2[0].world, corner2[1].world)
        wld = _canonical_line(join_points(w1, w2))
        return img, wld

    diag1_img, diag1_w = _diag((t["a"], t["d"]), (t["b"], t["e"]))
    diag2_img, diag2_w = _diag((t["d"], t["b"]), (t["e"], t["a"]))

    chord_ab_img = join_points(a.image, b.image)
    chord_de_img = join_points(d.image, e.image)
    chord_ab_w = join_points(a.world, b.world)
    chord_de_w = join_points(d.world, e.world)

    green_img = {}
    green_w = {}
    for diag_img, diag_w in ((diag1_img, diag1_w), (diag2_img, diag2_w)):
        for p in _two_intersections(diag_img, ellipse, "trapezoid diagonal"):
            green_img[_green_name(p, chord_de_img, chord_ab_img, a.image, d.image)] = p
        for p in _two_intersections(diag_w, circle, "world trapezoid diagonal"):
            green_w[_green_name(p, chord_de_w, chord_ab_w, a.world, d.world)] = p
    expected = {"g_ad", "g_db", "g_be", "g_ea"}
    if set(green_img) != expected or set(green_w) != expected:
        raise NoIntersection("diagonal intersections did not yield four distinct greens")

    new_points = corr.point_pairs + tuple(
        PointPair(n, green_img[n], green_w[n]) for n in ("g_ad", "g_db", "g_be", "g_ea")
    )
    new_lines = corr.line_pairs + (
        LinePair("diag_ad_be", diag1_img, diag1_w),
        LinePair("diag_db_ea", diag2_img, diag2_w),
    )
    return replace(corr, point_pairs=new_points, line_pairs=new_lines)


def derive_correspondences(
    obs: CircleObservation,
    template: FieldTemplate,
    prior: CameraPrior | None = None,
    extend: bool = True,
) -> CorrespondenceSet:
    """Route an observation to the right case and build the full set.

    Case 3 observations (concentric fits, no center) first recover the
    center, then fall through to case 1 or 2 depending on the support
    available. With ``extend`` the green points and diagonals are added.
    """
    working = obs
    if working.imaged_center is None:
        if working.concentric is None:
            raise MissingCenter("observation has neither a center nor concentric fits")
        center, _ = recover_center_concentric(*working.concentric)
        working = replace(working, imaged_center=center, case=working.case or "case3")

    if working.support_line is not None:
        corr = derive_case1(working, template, prior)
    elif working.support_point is not None:
        corr = derive_case2(working, template, prior)
    else:
        raise InsufficientEvidence(
            "case1: no support line; case2: no support point; "
            "case3 center recovery alone cannot anchor correspondences"
        )
    if obs.case == "case3" or (obs.imaged_center is None and obs.concentric is not None):
        corr = replace(corr, case="case3")
    if extend:
        corr = extend_green_points(corr, working.ellipse, template)
    return corr
