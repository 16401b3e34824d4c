"""Point conics: construction, classification, intersection, fitting.

A conic is the symmetric 3x3 matrix ``C`` of the quadratic form
``x^T C x = 0`` over homogeneous points. Matrices are kept up to scale;
``Conic.interior_normalized`` fixes the sign so that interior points of
an ellipse evaluate negative, which is the convention every consumer in
this package relies on for inside/outside tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConfiguration,
    InsufficientPoints,
    NonPositiveRadius,
    NotAnEllipse,
    PointNotOnConic,
)
from .projective import HomLine2, HomPoint2, polar_of_point

_EPS = 1e-12
# |discriminant| below this (after unit normalization) counts as tangency.
TANGENCY_TOL = 1e-10
ON_CONIC_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class Conic:
    """Symmetric 3x3 conic matrix, significant up to scale."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("Conic needs a finite 3x3 matrix")
        m = 0.5 * (m + m.T)
        if np.linalg.norm(m) <= _EPS:
            raise ValueError("Conic matrix must be non-zero")
        object.__setattr__(self, "matrix", m)
        self.matrix.flags.writeable = False

    def unit(self) -> np.ndarray:
        """Matrix scaled to unit Frobenius norm (sign untouched)."""
        return self.matrix / np.linalg.norm(self.matrix)

    def classify(self) -> str:
        """'ellipse', 'parabola' or 'hyperbola' from the leading 2x2 block.

        The discriminant is compared against the block's own norm, which
        is translation invariant, so pixel-frame conics classify the same
        as unit-frame ones.
        """
        m = self.unit()
        block = m[:2, :2]
        scale2 = float(np.sum(block * block))
        det2 = m[0, 0] * m[1, 1] - m[0, 1] ** 2
        if det2 > 1e-12 * max(scale2, 1e-300):
            return "ellipse"
        if det2 < -1e-12 * max(scale2, 1e-300):
            return "hyperbola"
        return "parabola"

    @property
    def is_degenerate(self) -> bool:
        svals = np.linalg.svd(self.matrix, compute_uv=False)
        return bool(svals[2] <= 1e-12 * svals[0])

    def interior_normalized(self) -> np.ndarray:
        """Unit-norm matrix signed so ellipse interiors evaluate negative."""
        m = self.unit()
        if m[0, 0] + m[1, 1] < 0.0:
            m = -m
        return m

    def evaluate(self, p: HomPoint2) -> float:
        """Normalized residual x^T C x / (|C| |x|^2); sign follows interior convention."""
        m = self.interior_normalized()
        v = p.coords
        return float(v @ m @ v) / float(v @ v)

    def contains(self, p: HomPoint2, tol: float = ON_CONIC_TOL) -> bool:
        return abs(self.evaluate(p)) <= tol

    def strictly_inside(self, p: HomPoint2, margin: float = 1e-10) -> bool:
        return self.evaluate(p) < -margin

    def __eq__(self, other) -> bool:
        if not isinstance(other, Conic):
            return NotImplemented
        from .projective import scale_equivalent

        return scale_equivalent(self.matrix.ravel(), other.matrix.ravel())

    __hash__ = None


@dataclass(frozen=True)
class EllipseGeom:
    """Geometric ellipse: center, semi-axes (major first), axis angle in [0, pi)."""

    center: np.ndarray
    semi_axes: tuple[float, float]
    angle: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(2)
        a, b = self.semi_axes
        if not (a >= b > 0.0):
            raise ValueError(f"semi-axes must satisfy a_major >= a_minor > 0, got {self.semi_axes}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "semi_axes", (float(a), float(b)))
        object.__setattr__(self, "angle", float(self.angle) % np.pi)

    def boundary_points(self, n: int) -> np.ndarray:
        """n points on the ellipse, uniform in parametric angle. Shape (n, 2)."""
        t = 2.0 * np.pi * np.arange(n) / n
        a, b = self.semi_axes
        ca, sa = np.cos(self.angle), np.sin(self.angle)
        x = a * np.cos(t)
        y = b * np.sin(t)
        return np.column_stack([
            self.center[0] + ca * x - sa * y,
            self.center[1] + sa * x + ca * y,
        ])


def circle_conic(center, radius: float) -> Conic:
    """Conic matrix of the circle |x - o| = r.

    The matrix is [[1, 0, -ox], [0, 1, -oy], [-ox, -oy, ox^2 + oy^2 - r^2]];
    multiplying it with the homogeneous center yields (0, 0, -r^2), i.e. the
    polar of the center is the line at infinity scaled by -r^2.
    """
    ox, oy = float(center[0]), float(center[1])
    if not radius > 0.0:
        raise NonPositiveRadius(f"radius must be > 0, got {radius}")
    return Conic(np.array([
        [1.0, 0.0, -ox],
        [0.0, 1.0, -oy],
        [-ox, -oy, ox * ox + oy * oy - radius * radius],
    ]))


def intersect_line_conic(line: HomLine2, conic: Conic) -> list[HomPoint2]:
    """Real intersection points of a line with a conic.

    Returns 0, 1 (tangency) or 2 points, sorted by the signed parameter
    along the line's direction vector. Inputs are normalized before the
    discriminant test so the tangency threshold is scale free.
    """
    C = conic.unit()
    l = line.coeffs / np.linalg.norm(line.coeffs)
    a, b, c = l
    n2 = np.hypot(a, b)
    if n2 > _EPS:
        p0 = np.array([-a * c, -b * c, n2 * n2])  # foot of the perpendicular from origin
        p0 /= np.linalg.norm(p0)
        p1 = np.array([b, -a, 0.0]) / n2
    else:  # line at infinity
        p0 = np.array([1.0, 0.0, 0.0])
        p1 = np.array([0.0, 1.0, 0.0])

    alpha = float(p1 @ C @ p1)
    beta = float(p1 @ C @ p0)
    gamma = float(p0 @ C @ p0)

    # The raw coefficients scale with the conic's pixel footprint; divide
    # that out so the tangency threshold below is genuinely scale free.
    coeff_scale = max(abs(alpha), abs(beta), abs(gamma))
    if coeff_scale <= 1e-15:
        return []
    alpha, beta, gamma = alpha / coeff_scale, beta / coeff_scale, gamma / coeff_scale

    if abs(alpha) <= 1e-12:
        # p1 itself lies on the conic; at most one further finite root.
        pts = [HomPoint2(p1)]
        if abs(beta) > 1e-12:
            t = -gamma / (2.0 * beta)
            pts.insert(0, HomPoint2(p0 + t * p1))
        return pts

    disc = beta * beta - alpha * gamma
    if disc < -TANGENCY_TOL:
        return []
    if abs(disc) <= TANGENCY_TOL:
        t = -beta / alpha
        return [HomPoint2(p0 + t * p1)]
    root = np.sqrt(disc)
    q = -(beta + np.copysign(root, beta))
    t1 = q / alpha
    t2 = gamma / q
    lo, hi = sorted((t1, t2))
    return [HomPoint2(p0 + lo * p1), HomPoint2(p0 + hi * p1)]


def tangent_at(conic: Conic, p: HomPoint2, tol: float = ON_CONIC_TOL) -> HomLine2:
    """Tangent line at a point of the conic (its polar)."""
    if abs(conic.evaluate(p)) > tol:
        raise PointNotOnConic(f"residual {conic.evaluate(p):.3e} exceeds {tol:.1e}")
    return polar_of_point(conic.matrix, p)


def fit_ellipse_direct(points: np.ndarray) -> Conic:
    """Direct least-squares ellipse fit (ellipse-specific algebraic fit).

    Minimizes the algebraic residual subject to 4AC - B^2 = 1, which
    guarantees an ellipse regardless of noise. Uses the numerically
    stable block decomposition of the scatter matrix, after conditioning
    the points to zero mean and unit RMS radius; the constraint matrix
    is singular, so the problem is reduced to a 3x3 eigenproblem instead
    of the raw generalized one.

    Parameters
    ----------
    points : (n, 2) array, n >= 6.

    Returns
    -------
    Conic in the original (unconditioned) coordinates.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (n, 2), got {pts.shape}")
    if pts.shape[0] < 6:
        raise InsufficientPoints(f"need >= 6 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")

    mean = pts.mean(axis=0)
    spread = np.sqrt(np.mean(np.sum((pts - mean) ** 2, axis=1)))
    if spread <= _EPS:
        raise DegenerateConfiguration("points are (nearly) coincident")
    x, y = ((pts - mean) / spread).T

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError:
        raise DegenerateConfiguration("linear scatter block is singular (collinear points?)")
    if np.linalg.cond(s3) > 1e14:
        raise DegenerateConfiguration("linear scatter block is singular (collinear points?)")
    m = s1 + s2 @ t
    # premultiply by the inverse of the rank-3 constraint block
    m = np.vstack([m[2] / 2.0, -m[1], m[0] / 2.0])
    evals, evecs = np.linalg.eig(m)
    cond = 4.0 * evecs[0] * evecs[2] - evecs[1] ** 2
    mask = (np.abs(evals.imag) <= 1e-9 * max(1.0, np.abs(evals).max())) & (cond.real > 0)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise DegenerateConfiguration("no eigenvector satisfies the ellipse constraint")
    a1 = evecs[:, idx[0]].real
    coeffs = np.concatenate([a1, t @ a1])  # A, B, C, D, E, F in conditioned frame

    A, B, C, D, E, F = coeffs
    chat = np.array([
        [A, B / 2.0, D / 2.0],
        [B / 2.0, C, E / 2.0],
        [D / 2.0, E / 2.0, F],
    ])
    # undo conditioning: x_hat = (x - mean) / spread = T x
    T = np.array([
        [1.0 / spread, 0.0, -mean[0] / spread],
        [0.0, 1.0 / spread, -mean[1] / spread],
        [0.0, 0.0, 1.0],
    ])
    return Conic(T.T @ chat @ T)


def geom_from_conic(conic: Conic) -> EllipseGeom:
    """Center, semi-axes and orientation of a real ellipse."""
    m = conic.interior_normalized()
    q = m[:2, :2]
    qnorm2 = float(np.sum(q * q))
    det2 = np.linalg.det(q)
    if det2 <= 1e-14 * max(qnorm2, 1e-300):
        raise NotAnEllipse(f"leading block determinant {det2:.3e} is not positive")
    center = np.linalg.solve(q, -m[:2, 2])
    val = float(np.array([*center, 1.0]) @ m @ np.array([*center, 1.0]))
    if val >= -1e-14 * np.sqrt(qnorm2):
        raise NotAnEllipse("conic has no real points (imaginary ellipse)")
    evals, evecs = np.linalg.eigh(q)
    axes = np.sqrt(-val / evals)  # evals ascending -> axes descending
    major_vec = evecs[:, 0]
    if axes[0] - axes[1] <= 1e-12 * axes[0]:
        angle = 0.0  # circle: orientation is arbitrary, pick the canonical one
    else:
        angle = np.arctan2(major_vec[1], major_vec[0]) % np.pi
    return EllipseGeom(center=center, semi_axes=(float(axes[0]), float(axes[1])), angle=angle)


def conic_from_geom(geom: EllipseGeom) -> Conic:
    """Conic matrix of a geometric ellipse (interior-negative sign)."""
    a, b = geom.semi_axes
    ca, sa = np.cos(geom.angle), np.sin(geom.angle)
    u = np.array([ca, sa])
    w = np.array([-sa, ca])
    q = np.outer(u, u) / (a * a) + np.outer(w, w) / (b * b)
    o = geom.center
    qo = q @ o
    m = np.empty((3, 3))
    m[:2, :2] = q
    m[:2, 2] = -qo
    m[2, :2] = -qo
    m[2, 2] = o @ qo - 1.0
    return Conic(m)
