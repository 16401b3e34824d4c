"""Homogeneous 2D projective primitives.

Conventions
-----------
- Points and lines are homogeneous 3-vectors; ``p`` and ``s * p`` (s != 0)
  name the same element. Incidence is ``<l, p> = 0``.
- Equality between primitives means scale equivalence: vectors are
  compared after normalizing to unit Euclidean norm with the first
  non-negligible component made positive (absolute tolerance 1e-9).
- Points with a (near-)zero last coordinate are points at infinity and
  are first-class values everywhere except dehomogenization.
- A conic with matrix ``C`` maps a point to its polar line ``C @ p``;
  the pole of a line requires the inverse map.

All functions are pure; nothing here mutates its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateJoin,
    DegenerateMeet,
    PointAtInfinity,
    SingularConic,
    SingularHomography,
    ZeroPolar,
)

_EPS = 1e-12
SCALE_EQ_ATOL = 1e-9
# Minimum |det| of a homography after unit-Frobenius normalization.
DET_FLOOR = 1e-12


def canonical(v: np.ndarray) -> np.ndarray:
    """Scale-canonical form: unit norm, first non-negligible component positive."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n <= _EPS or not np.isfinite(n):
        raise ValueError("cannot canonicalize a (near-)zero or non-finite vector")
    u = v / n
    for x in u:
        if abs(x) > _EPS:
            if x < 0.0:
                u = -u
            break
    return u


def scale_equivalent(u, v, atol: float = SCALE_EQ_ATOL) -> bool:
    """True when two homogeneous vectors agree up to scale."""
    a = np.asarray(getattr(u, "coords", getattr(u, "coeffs", u)), dtype=float)
    b = np.asarray(getattr(v, "coords", getattr(v, "coeffs", v)), dtype=float)
    if a.shape != b.shape:
        return False
    return bool(np.allclose(canonical(a), canonical(b), rtol=0.0, atol=atol))


def _as_vec3(raw, what: str) -> np.ndarray:
    v = np.asarray(raw, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise ValueError(f"{what} needs a 3-vector, got shape {np.shape(raw)}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} must be finite")
    if np.linalg.norm(v) <= _EPS:
        raise ValueError(f"{what} must be non-zero")
    return v


@dataclass(frozen=True, eq=False)
class HomPoint2:
    """Point of the projective plane, stored as a homogeneous 3-vector."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_vec3(self.coords, "HomPoint2"))
        self.coords.flags.writeable = False

    @classmethod
    def from_xy(cls, x: float, y: float) -> "HomPoint2":
        return cls(np.array([x, y, 1.0]))

    @property
    def is_at_infinity(self) -> bool:
        v = self.coords
        return abs(v[2]) <= _EPS * np.linalg.norm(v)

    def dehomogenized(self) -> np.ndarray:
        """Affine (x, y); raises PointAtInfinity when the point has no finite image."""
        v = self.coords
        if self.is_at_infinity:
            raise PointAtInfinity(f"point {v} has no affine representative")
        return v[:2] / v[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, HomPoint2):
            return NotImplemented
        return scale_equivalent(self.coords, other.coords)

    __hash__ = None  # scale-equivalence is incompatible with hashing

    def __repr__(self) -> str:
        x, y, w = self.coords
        return f"HomPoint2([{x:.6g}, {y:.6g}, {w:.6g}])"


@dataclass(frozen=True, eq=False)
class HomLine2:
    """Line of the projective plane: coefficients (a, b, c) of ax + by + c = 0."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_vec3(self.coeffs, "HomLine2"))
        self.coeffs.flags.writeable = False

    @classmethod
    def from_abc(cls, a: float, b: float, c: float) -> "HomLine2":
        return cls(np.array([a, b, c]))

    @property
    def is_line_at_infinity(self) -> bool:
        v = self.coeffs
        return np.hypot(v[0], v[1]) <= _EPS * np.linalg.norm(v)

    def direction(self) -> np.ndarray:
        """Unit direction vector of the line in the affine plane."""
        a, b, _ = self.coeffs
        d = np.array([b, -a])
        n = np.linalg.norm(d)
        if n <= _EPS:
            raise ValueError("line at infinity has no affine direction")
        return d / n

    def distance_to(self, point: HomPoint2) -> float:
        """Perpendicular distance from a finite point to this line."""
        a, b, c = self.coeffs
        x, y = point.dehomogenized()
        return abs(a * x + b * y + c) / np.hypot(a, b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HomLine2):
            return NotImplemented
        return scale_equivalent(self.coeffs, other.coeffs)

    __hash__ = None

    def __repr__(self) -> str:
        a, b, c = self.coeffs
        return f"HomLine2([{a:.6g}, {b:.6g}, {c:.6g}])"


@dataclass(frozen=True, eq=False)
class Homography:
    """Invertible 3x3 projective map, here always image_from_world."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("Homography needs a finite 3x3 matrix")
        scale = np.linalg.norm(m)
        if scale <= _EPS or abs(np.linalg.det(m / scale)) < DET_FLOOR:
            raise SingularHomography("matrix is singular within the determinant floor")
        object.__setattr__(self, "matrix", m)
        self.matrix.flags.writeable = False

    def normalized(self) -> "Homography":
        """Unit Frobenius norm with positive determinant."""
        m = self.matrix / np.linalg.norm(self.matrix)
        if np.linalg.det(m) < 0.0:
            m = -m
        return Homography(m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def __matmul__(self, other: "Homography") -> "Homography":
        if not isinstance(other, Homography):
            return NotImplemented
        return Homography(self.matrix @ other.matrix)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Homography):
            return NotImplemented
        return scale_equivalent(self.matrix.ravel(), other.matrix.ravel())

    __hash__ = None


def join_points(p: HomPoint2, q: HomPoint2) -> HomLine2:
    """Line through two distinct points (cross product, unit normalized)."""
    c = np.cross(p.coords, q.coords)
    floor = _EPS * np.linalg.norm(p.coords) * np.linalg.norm(q.coords)
    n = np.linalg.norm(c)
    if n <= max(floor, 1e-300):
        raise DegenerateJoin("points are scale equivalent; join undefined")
    return HomLine2(c / n)


def meet_lines(l: HomLine2, m: HomLine2) -> HomPoint2:
    """Intersection point of two distinct lines (cross product, unit normalized)."""
    c = np.cross(l.coeffs, m.coeffs)
    floor = _EPS * np.linalg.norm(l.coeffs) * np.linalg.norm(m.coeffs)
    n = np.linalg.norm(c)
    if n <= max(floor, 1e-300):
        raise DegenerateMeet("lines are scale equivalent; meet undefined")
    return HomPoint2(c / n)


def polar_of_point(conic_matrix: np.ndarray, p: HomPoint2) -> HomLine2:
    """Polar line of a point with respect to a conic: l = C @ p."""
    C = np.asarray(conic_matrix, dtype=float)
    v = C @ p.coords
    floor = _EPS * np.linalg.norm(C) * np.linalg.norm(p.coords)
    n = np.linalg.norm(v)
    if n <= max(floor, 1e-300):
        raise ZeroPolar("point lies in the null space of the conic")
    return HomLine2(v / n)


def pole_of_line(conic_matrix: np.ndarray, l: HomLine2) -> HomPoint2:
    """Pole of a line with respect to a full-rank conic: p = C^{-1} @ l.

    The polar map sends points to lines; recovering the pole therefore
    needs the inverse conic, not the conic itself.
    """
    C = np.asarray(conic_matrix, dtype=float)
    svals = np.linalg.svd(C, compute_uv=False)
    if svals[0] <= _EPS or svals[2] <= 1e-13 * svals[0]:
        raise SingularConic("conic is rank deficient; pole undefined")
    p = np.linalg.solve(C / svals[0], l.coeffs)
    return HomPoint2(p / np.linalg.norm(p))


def transform_under_homography(h: Homography, x):
    """Push a point, line, or conic matrix through a homography.

    Points map by ``H p``, lines by ``H^{-T} l``, and conic matrices by
    ``H^{-T} C H^{-1}`` so that incidence and tangency are preserved.
    """
    m = h.matrix
    scale = np.linalg.norm(m)
    if abs(np.linalg.det(m / scale)) < DET_FLOOR:
        raise SingularHomography("homography is not invertible")
    if isinstance(x, HomPoint2):
        return HomPoint2(m @ x.coords)
    if isinstance(x, HomLine2):
        return HomLine2(np.linalg.solve(m.T, x.coeffs))

    def _conic(arr: np.ndarray) -> np.ndarray:
        # H^{-T} C H^{-1} without forming the inverse explicitly.
        left = np.linalg.solve(m.T, arr)
        out = np.linalg.solve(m.T, left.T).T
        return 0.5 * (out + out.T)

    wrapped = getattr(x, "matrix", None)
    if wrapped is not None and np.shape(wrapped) == (3, 3) and not isinstance(x, Homography):
        return type(x)(_conic(np.asarray(wrapped, dtype=float)))
    arr = np.asarray(x, dtype=float)
    if arr.shape == (3, 3):
        return _conic(arr)
    raise TypeError(f"cannot transform object of type {type(x)!r}")
