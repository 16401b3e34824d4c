"""JSON formats for homographies and correspondence sets.

Homography files use the fixed convention ``image_from_world``: the
stored 3x3 (row-major, 9 floats) maps homogeneous world points on the
pitch plane to homogeneous pixels. Correspondence files keep full
homogeneous triples so points at infinity survive a round trip.
"""

from __future__ import annotations

import json

import numpy as np

from .correspond import CorrespondenceSet, LinePair, PointPair
from .errors import SchemaError
from .projective import HomLine2, HomPoint2, Homography

HOMOGRAPHY_CONVENTION = "image_from_world"


def homography_to_dict(h: Homography, meta: dict | None = None) -> dict:
    out = {
        "h": [float(v) for v in h.normalized().matrix.ravel()],
        "convention": HOMOGRAPHY_CONVENTION,
    }
    if meta:
        out.update(meta)
    return out


def save_homography(h: Homography, path: str, meta: dict | None = None):
    with open(path, "w") as fh:
        json.dump(homography_to_dict(h, meta), fh, indent=2, sort_keys=True)
        fh.write("\n")


def homography_from_dict(data) -> Homography:
    if not isinstance(data, dict):
        raise SchemaError("$: homography file must be an object")
    if data.get("convention") != HOMOGRAPHY_CONVENTION:
        raise SchemaError(
            f"$.convention: expected {HOMOGRAPHY_CONVENTION!r}, got {data.get('convention')!r}"
        )
    values = data.get("h")
    if not isinstance(values, list) or len(values) != 9:
        raise SchemaError("$.h: expected 9 row-major entries")
    try:
        mat = np.array([float(v) for v in values]).reshape(3, 3)
    except (TypeError, ValueError):
        raise SchemaError("$.h: entries must be numbers") from None
    return Homography(mat)


def load_homography(path: str) -> Homography:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"$: invalid JSON ({exc})") from exc
    return homography_from_dict(data)


def _triple(vec: np.ndarray) -> list[float]:
    return [float(v) for v in vec]


def correspondences_to_dict(corr: CorrespondenceSet) -> dict:
    return {
        "case": corr.case,
        "points": [
            {"name": p.name, "image": _triple(p.image.coords), "world": _triple(p.world.coords)}
            for p in corr.point_pairs
        ],
        "lines": [
            {"name": l.name, "image": _triple(l.image.coeffs), "world": _triple(l.world.coeffs)}
            for l in corr.line_pairs
        ],
        "vanishing_line": _triple(corr.vanishing_line.coeffs),
        "flags": list(corr.flags),
    }


def save_correspondences(corr: CorrespondenceSet, path: str):
    with open(path, "w") as fh:
        json.dump(correspondences_to_dict(corr), fh, indent=2, sort_keys=True)
        fh.write("\n")


def correspondences_from_dict(data) -> CorrespondenceSet:
    if not isinstance(data, dict):
        raise SchemaError("$: correspondence file must be an object")
    for key in ("case", "points", "lines", "vanishing_line"):
        if key not in data:
            raise SchemaError(f"$.{key}: required field missing")

    def triple(value, path):
        if not isinstance(value, list) or len(value) != 3:
            raise SchemaError(f"{path}: expected a homogeneous triple")
        try:
            return np.array([float(v) for v in value])
        except (TypeError, ValueError):
            raise SchemaError(f"{path}: entries must be numbers") from None

    points = []
    for i, item in enumerate(data["points"]):
        path = f"$.points[{i}]"
        if not isinstance(item, dict) or not isinstance(item.get("name"), str):
            raise SchemaError(f"{path}: expected an object with a name")
        points.append(
            PointPair(
                item["name"],
                HomPoint2(triple(item.get("image"), f"{path}.image")),
                HomPoint2(triple(item.get("world"), f"{path}.world")),
            )
        )
    lines = []
    for i, item in enumerate(data["lines"]):
        path = f"$.lines[{i}]"
        if not isinstance(item, dict) or not isinstance(item.get("name"), str):
            raise SchemaError(f"{path}: expected an object with a name")
        lines.append(
            LinePair(
                item["name"],
                HomLine2(triple(item.get("image"), f"{path}.image")),
                HomLine2(triple(item.get("world"), f"{path}.world")),
            )
        )
    return CorrespondenceSet(
        case=str(data["case"]),
        point_pairs=tuple(points),
        line_pairs=tuple(lines),
        vanishing_line=HomLine2(triple(data["vanishing_line"], "$.vanishing_line")),
        flags=tuple(str(f) for f in data.get("flags", [])),
    )


def load_correspondences(path: str) -> CorrespondenceSet:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"$: invalid JSON ({exc})") from exc
    return correspondences_from_dict(data)
