import json

import numpy as np
import pytest

from circlefield.correspond import derive_correspondences
from circlefield.errors import SchemaError
from circlefield.homography import camera_to_homography
from circlefield.io_formats import (
    correspondences_from_dict,
    homography_from_dict,
    homography_to_dict,
    load_correspondences,
    load_homography,
    save_correspondences,
    save_homography,
)
from circlefield.projective import Homography

from conftest import case1_observation, observed_scene


def test_homography_round_trip(tmp_path, template):
    cam, _, _ = observed_scene(3, template)
    h = camera_to_homography(cam)
    path = tmp_path / "h.json"
    save_homography(h, str(path), meta={"camera_id": 3})
    data = json.loads(path.read_text())
    assert data["convention"] == "image_from_world"
    assert data["camera_id"] == 3
    assert len(data["h"]) == 9

    again = load_homography(str(path))
    # stored normalized, so the matrices agree up to normalization
    assert np.allclose(again.normalized().matrix, h.normalized().matrix, atol=1e-12)


def test_homography_wrong_convention_rejected(tmp_path):
    data = homography_to_dict(Homography(np.eye(3)))
    data["convention"] = "world_from_image"
    with pytest.raises(SchemaError, match="convention"):
        homography_from_dict(data)
    with pytest.raises(SchemaError):
        homography_from_dict({"h": [1.0] * 9})
    with pytest.raises(SchemaError, match=r"\$\.h"):
        homography_from_dict({"h": [1.0] * 8, "convention": "image_from_world"})
    with pytest.raises(SchemaError, match="numbers"):
        homography_from_dict({"h": ["x"] * 9, "convention": "image_from_world"})
    with pytest.raises(SchemaError):
        homography_from_dict([1, 2, 3])


def test_homography_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("]")
    with pytest.raises(SchemaError, match="invalid JSON"):
        load_homography(str(path))


def test_correspondences_round_trip(tmp_path, template):
    _, obs, prior = observed_scene(4, template)
    corr = derive_correspondences(case1_observation(obs), template, prior)
    path = tmp_path / "corr.json"
    save_correspondences(corr, str(path))
    again = load_correspondences(str(path))

    assert again.case == corr.case
    assert again.flags == corr.flags
    assert [p.name for p in again.point_pairs] == [p.name for p in corr.point_pairs]
    assert [l.name for l in again.line_pairs] == [l.name for l in corr.line_pairs]
    for before, after in zip(corr.point_pairs, again.point_pairs):
        assert np.array_equal(before.image.coords, after.image.coords)
        assert np.array_equal(before.world.coords, after.world.coords)
    for before, after in zip(corr.line_pairs, again.line_pairs):
        assert np.array_equal(before.image.coeffs, after.image.coeffs)
        assert np.array_equal(before.world.coeffs, after.world.coeffs)
    assert np.array_equal(again.vanishing_line.coeffs, corr.vanishing_line.coeffs)

    # byte-stable re-save
    path2 = tmp_path / "corr2.json"
    save_correspondences(again, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_correspondences_schema_errors():
    with pytest.raises(SchemaError, match=r"\$\.case"):
        correspondences_from_dict({"points": [], "lines": [], "vanishing_line": [0, 0, 1]})
    with pytest.raises(SchemaError, match=r"\$\.points\[0\]\.image"):
        correspondences_from_dict(
            {
                "case": "case1",
                "points": [{"name": "a", "image": [1.0, 2.0], "world": [0, 1, 1]}],
                "lines": [],
                "vanishing_line": [0.0, 0.0, 1.0],
            }
        )
    with pytest.raises(SchemaError, match=r"\$\.lines\[0\]"):
        correspondences_from_dict(
            {
                "case": "case1",
                "points": [],
                "lines": [{"image": [0, 0, 1], "world": [0, 0, 1]}],
                "vanishing_line": [0.0, 0.0, 1.0],
            }
        )
    with pytest.raises(SchemaError):
        correspondences_from_dict("not an object")
