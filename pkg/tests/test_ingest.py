import json

import numpy as np
import pytest
from PIL import Image

from circlefield.conics import circle_conic, fit_ellipse_direct, geom_from_conic
from circlefield.errors import (
    ClassAbsent,
    ConsensusFailure,
    DegenerateConfiguration,
    InsufficientEvidence,
    NotNested,
    SchemaError,
    TooFewCandidates,
)
from circlefield.homography import apply_homography_xy, camera_to_homography
from circlefield.ingest import (
    ConcentricEdges,
    DetectionFile,
    ExtractOptions,
    RansacOptions,
    build_observation,
    extract_concentric_edges,
    fit_line_tls,
    parse_detection_file,
    ransac_fit_concentric,
    sampson_distance,
)
from circlefield.projective import transform_under_homography
from circlefield.synthcam import observe_circle, rasterize_ring_mask
from circlefield.template import standard_template

from conftest import make_camera


def ring_pts(center, radius, n, phase=0.0):
    t = phase + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def annulus_mask(r_in=80.0, r_out=100.0):
    """Binary ring centered at index coordinates (399.5, 299.5)."""
    yy, xx = np.mgrid[0:600, 0:800]
    r = np.hypot(xx - 399.5, yy - 299.5)
    return ((r >= r_in) & (r <= r_out)).astype(np.uint8)


GOOD = {
    "image_size": [1920, 1080],
    "keypoints": [
        {"name": "circle_center", "xy": [960.0, 540.0], "confidence": 0.9},
        {"name": "circle_halfway_pos", "xy": [960.0, 300.0], "confidence": 0.7},
    ],
    "lines": [
        {"name": "halfway", "points": [[950.0, 0.0], [955.0, 500.0], [960.0, 1000.0]]},
    ],
    "mask_path": "seg.png",
    "mask_class_map": {"circle": 3},
}


# ---------------------------------------------------------------------------
# detection schema


def test_round_trip_preserves_content(tmp_path):
    det = DetectionFile.from_dict(GOOD, base_dir=str(tmp_path))
    assert det.image_size == (1920, 1080)
    assert det.keypoint("circle_center").confidence == 0.9
    assert det.keypoint("nope") is None
    assert det.line("halfway").points.shape == (3, 2)
    assert det.line("nope") is None

    path = tmp_path / "det.json"
    det.save(str(path))
    again = parse_detection_file(str(path))
    assert again.to_dict() == det.to_dict()
    # a second save produces identical bytes
    path2 = tmp_path / "det2.json"
    again.save(str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_unknown_field_rejected():
    bad = dict(GOOD, velocity=3)
    with pytest.raises(SchemaError, match=r"\$\.velocity"):
        DetectionFile.from_dict(bad)


def test_image_size_required_and_positive():
    with pytest.raises(SchemaError, match=r"\$\.image_size"):
        DetectionFile.from_dict({"keypoints": []})
    with pytest.raises(SchemaError, match=r"\$\.image_size"):
        DetectionFile.from_dict({"image_size": [1920, 0]})
    with pytest.raises(SchemaError, match=r"\$\.image_size"):
        DetectionFile.from_dict({"image_size": [1920.0, 1080.0]})


def test_error_paths_name_the_offending_entry():
    bad = json.loads(json.dumps(GOOD))
    bad["keypoints"][1]["xy"] = [5000.0, 300.0]
    with pytest.raises(SchemaError, match=r"\$\.keypoints\[1\]\.xy"):
        DetectionFile.from_dict(bad)

    bad = json.loads(json.dumps(GOOD))
    bad["lines"][0]["points"][2] = [960.0, "high"]
    with pytest.raises(SchemaError, match=r"\$\.lines\[0\]\.points\[2\]"):
        DetectionFile.from_dict(bad)

    bad = json.loads(json.dumps(GOOD))
    bad["keypoints"][0]["xy"] = [np.nan, 540.0]
    with pytest.raises(SchemaError, match="finite"):
        DetectionFile.from_dict(bad)


def test_confidence_bounds():
    bad = json.loads(json.dumps(GOOD))
    bad["keypoints"][0]["confidence"] = 1.5
    with pytest.raises(SchemaError, match=r"confidence"):
        DetectionFile.from_dict(bad)


def test_duplicate_names_rejected():
    bad = json.loads(json.dumps(GOOD))
    bad["keypoints"].append(dict(bad["keypoints"][0]))
    with pytest.raises(SchemaError, match="duplicate"):
        DetectionFile.from_dict(bad)

    bad = json.loads(json.dumps(GOOD))
    bad["lines"].append(dict(bad["lines"][0]))
    with pytest.raises(SchemaError, match="duplicate"):
        DetectionFile.from_dict(bad)


def test_line_needs_two_samples():
    bad = json.loads(json.dumps(GOOD))
    bad["lines"][0]["points"] = [[950.0, 0.0]]
    with pytest.raises(SchemaError, match="two samples"):
        DetectionFile.from_dict(bad)


def test_invalid_json_reports_schema_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError, match="invalid JSON"):
        parse_detection_file(str(path))


def test_mask_is_loaded_lazily(tmp_path):
    det = DetectionFile.from_dict(GOOD, base_dir=str(tmp_path))
    # parsing succeeds even though seg.png does not exist ...
    assert det.mask_path == "seg.png"
    # ... and the failure surfaces only on access
    with pytest.raises(OSError):
        det.load_mask()
    no_mask = DetectionFile.from_dict({"image_size": [64, 64]})
    with pytest.raises(InsufficientEvidence):
        no_mask.load_mask()


# ---------------------------------------------------------------------------
# ring tracing


def test_annulus_candidates_sit_on_both_edges():
    edges = extract_concentric_edges(annulus_mask())
    assert len(edges.inner_candidates) == 180
    center = np.array([399.5, 299.5])
    din = np.abs(np.hypot(*(edges.inner_candidates - center).T) - 80.0)
    dout = np.abs(np.hypot(*(edges.outer_candidates - center).T) - 100.0)
    assert np.median(din) < 0.5 and din.max() < 1.5
    assert np.median(dout) < 0.5 and dout.max() < 1.5


def test_half_occluded_ring_still_traced():
    mask = annulus_mask()
    mask[:, :400] = 0
    edges = extract_concentric_edges(mask)
    assert len(edges.inner_candidates) >= 60
    inner, outer = ransac_fit_concentric(edges)
    gi, go = geom_from_conic(inner), geom_from_conic(outer)
    assert np.allclose(gi.center, [399.5, 299.5], atol=2.0)
    assert np.allclose(go.center, [399.5, 299.5], atol=2.0)
    assert abs(gi.semi_axes[0] - 80.0) < 2.0
    assert abs(go.semi_axes[0] - 100.0) < 2.0


def test_filled_disk_has_no_inner_edge():
    yy, xx = np.mgrid[0:600, 0:800]
    disk = (np.hypot(xx - 399.5, yy - 299.5) <= 100).astype(np.uint8)
    with pytest.raises(TooFewCandidates):
        extract_concentric_edges(disk)


def test_band_wider_than_gap_limit_is_rejected():
    with pytest.raises(TooFewCandidates):
        extract_concentric_edges(annulus_mask(60.0, 100.0))


def test_class_id_selects_the_ring():
    mask = annulus_mask() * 7
    mask[0:10, 0:10] = 3  # unrelated blob of another class
    edges = extract_concentric_edges(mask, class_id=7)
    assert len(edges.inner_candidates) == 180
    with pytest.raises(ClassAbsent):
        extract_concentric_edges(mask, class_id=9)
    with pytest.raises(ClassAbsent):
        extract_concentric_edges(np.zeros((32, 32), dtype=np.uint8))
    with pytest.raises(SchemaError):
        extract_concentric_edges(np.zeros((4, 4, 3), dtype=np.uint8))


def test_rendered_ring_candidates_near_true_edges(thin_template):
    cam = make_camera(3, template=thin_template)
    mask = rasterize_ring_mask(cam, thin_template)
    edges = extract_concentric_edges(mask)
    assert len(edges.inner_candidates) >= 0.9 * 180

    h = camera_to_homography(cam)
    true_inner = transform_under_homography(h, circle_conic((0.0, 0.0), thin_template.inner_radius))
    true_outer = transform_under_homography(h, circle_conic((0.0, 0.0), thin_template.outer_radius))
    # the raster paints pixel (x, y) from the point (x+0.5, y+0.5); candidates
    # live at integer-index centers, so shift back before comparing
    shift = np.array([0.5, 0.5])
    din = sampson_distance(true_inner, edges.inner_candidates + shift)
    dout = sampson_distance(true_outer, edges.outer_candidates + shift)
    assert np.median(din) < 0.5 and din.max() < 2.0
    assert np.median(dout) < 0.5 and dout.max() < 2.0


# ---------------------------------------------------------------------------
# robust concentric fit


def test_ransac_exact_on_clean_candidates():
    edges = ConcentricEdges(
        np.array([400.0, 300.0]),
        ring_pts((400, 300), 80, 60),
        ring_pts((400, 300), 100, 60, phase=0.03),
    )
    inner, outer = ransac_fit_concentric(edges)
    probe_in = ring_pts((400, 300), 80, 200, phase=0.01)
    probe_out = ring_pts((400, 300), 100, 200, phase=0.01)
    assert sampson_distance(inner, probe_in).max() < 1e-9
    assert sampson_distance(outer, probe_out).max() < 1e-9
    assert edges.inner_inliers.all() and edges.outer_inliers.all()


def test_ransac_survives_outliers():
    rng = np.random.default_rng(5)
    inner = ring_pts((400, 300), 80, 60)
    outer = ring_pts((400, 300), 100, 60, phase=0.03)
    n_bad = 18  # 30 %
    inner[:n_bad] = rng.uniform((0, 0), (800, 600), (n_bad, 2))
    outer[:n_bad] = rng.uniform((0, 0), (800, 600), (n_bad, 2))
    edges = ConcentricEdges(np.array([400.0, 300.0]), inner, outer)
    fi, fo = ransac_fit_concentric(edges, RansacOptions(seed=9))
    assert sampson_distance(fi, ring_pts((400, 300), 80, 200)).max() < 1e-8
    assert sampson_distance(fo, ring_pts((400, 300), 100, 200)).max() < 1e-8
    assert int(edges.inner_inliers.sum()) == 42
    assert int(edges.outer_inliers.sum()) == 42


def test_ransac_reorders_swapped_candidate_lists():
    edges = ConcentricEdges(
        np.array([400.0, 300.0]),
        ring_pts((400, 300), 100, 60),  # outer points in the "inner" slot
        ring_pts((400, 300), 80, 60),
    )
    first, second = ransac_fit_concentric(edges)
    assert abs(geom_from_conic(first).semi_axes[0] - 80.0) < 1e-6
    assert abs(geom_from_conic(second).semi_axes[0] - 100.0) < 1e-6


def test_ransac_rejects_disjoint_rings():
    edges = ConcentricEdges(
        np.array([350.0, 300.0]),
        ring_pts((200, 300), 50, 40),
        ring_pts((500, 300), 50, 40),
    )
    with pytest.raises(NotNested):
        ransac_fit_concentric(edges)


def test_ransac_deterministic():
    rng = np.random.default_rng(1)
    inner = ring_pts((400, 300), 80, 50) + rng.normal(0, 0.5, (50, 2))
    outer = ring_pts((400, 300), 100, 50) + rng.normal(0, 0.5, (50, 2))
    e1 = ConcentricEdges(np.array([400.0, 300.0]), inner.copy(), outer.copy())
    e2 = ConcentricEdges(np.array([400.0, 300.0]), inner.copy(), outer.copy())
    a1, b1 = ransac_fit_concentric(e1, RansacOptions(seed=4))
    a2, b2 = ransac_fit_concentric(e2, RansacOptions(seed=4))
    assert np.array_equal(a1.matrix, a2.matrix)
    assert np.array_equal(b1.matrix, b2.matrix)


def test_ransac_too_few_candidates():
    edges = ConcentricEdges(
        np.array([400.0, 300.0]),
        ring_pts((400, 300), 80, 5),
        ring_pts((400, 300), 100, 5),
    )
    with pytest.raises(ConsensusFailure):
        ransac_fit_concentric(edges)


def test_sampson_close_to_geometric_distance():
    conic = circle_conic((0.0, 0.0), 100.0)
    probes = ring_pts((0, 0), 103.0, 16)
    d = sampson_distance(conic, probes)
    assert np.allclose(d, 3.0, rtol=0.03)


# ---------------------------------------------------------------------------
# line fitting


def test_fit_line_tls_exact():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 5.0]])
    line = fit_line_tls(pts)
    v = line.coeffs / np.linalg.norm(line.coeffs[:2])
    assert np.allclose(abs(v[0]), abs(v[1]))
    assert abs(v[2]) < 1e-12
    vertical = fit_line_tls(np.array([[3.0, 0.0], [3.0, 5.0], [3.0, 9.0]]))
    v = vertical.coeffs / np.linalg.norm(vertical.coeffs[:2])
    assert abs(v[1]) < 1e-12 and np.isclose(abs(v[2]), 3.0)


def test_fit_line_degenerate_inputs():
    with pytest.raises(DegenerateConfiguration):
        fit_line_tls(np.array([[1.0, 2.0]]))
    with pytest.raises(DegenerateConfiguration):
        fit_line_tls(np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]))


# ---------------------------------------------------------------------------
# observation assembly


def scene_detection(seed, template, with_halfway=True, with_point=False, n_circle=14):
    """Detection dict for one synthetic view, built from the true homography."""
    cam = make_camera(seed, template=template)
    obs = observe_circle(cam, template, n_points=12)
    h = camera_to_homography(cam)
    circ_px = apply_homography_xy(h, ring_pts((0, 0), template.circle_radius, n_circle))
    data = {
        "image_size": list(cam.image_size),
        "keypoints": [
            {"name": "circle_center", "xy": [float(obs.center_px[0]), float(obs.center_px[1])]}
        ],
        "lines": [{"name": "circle", "points": [[float(x), float(y)] for x, y in circ_px]}],
    }
    if with_halfway:
        world = np.column_stack([np.zeros(7), np.linspace(-20, 20, 7)])
        px = apply_homography_xy(h, world)
        w, ht = cam.image_size
        keep = px[(px[:, 0] >= 0) & (px[:, 0] <= w) & (px[:, 1] >= 0) & (px[:, 1] <= ht)]
        data["lines"].append({"name": "halfway", "points": [[float(x), float(y)] for x, y in keep]})
    if with_point:
        xy = apply_homography_xy(h, np.array([[0.0, template.circle_radius]]))[0]
        data["keypoints"].append(
            {"name": "circle_halfway_pos", "xy": [float(xy[0]), float(xy[1])], "confidence": 0.8}
        )
    return data, cam, circ_px


def test_build_observation_case1(template):
    data, _, circ_px = scene_detection(2, template)
    obs = build_observation(DetectionFile.from_dict(data), template)
    assert obs.case == "case1"
    assert obs.world_circle == "center"
    assert obs.support_line[0] == "halfway"
    assert obs.support_point is None
    assert sampson_distance(obs.ellipse, circ_px).max() < 1e-8


def test_build_observation_case2(template):
    data, _, _ = scene_detection(2, template, with_halfway=False, with_point=True)
    obs = build_observation(DetectionFile.from_dict(data), template)
    assert obs.case == "case2"
    assert obs.support_point[0] == "circle_halfway_pos"
    assert obs.support_line is None


def test_build_observation_case3_from_fits(template):
    cam = make_camera(4, template=template)
    h = camera_to_homography(cam)
    inner = fit_ellipse_direct(apply_homography_xy(h, ring_pts((0, 0), template.inner_radius, 12)))
    outer = fit_ellipse_direct(apply_homography_xy(h, ring_pts((0, 0), template.outer_radius, 12)))
    det = DetectionFile.from_dict({"image_size": list(cam.image_size)})
    obs = build_observation(det, template, fits=(inner, outer))
    assert obs.case == "case3"
    assert obs.world_circle == "outer"
    assert obs.imaged_center is None
    assert obs.ellipse is outer
    # a swapped pair is reordered rather than trusted
    swapped = build_observation(det, template, fits=(outer, inner))
    assert swapped.concentric[0] is inner
    assert swapped.ellipse is outer


def test_build_observation_single_fit_conic(template):
    data, _, circ_px = scene_detection(2, template)
    del data["lines"][0]  # drop the polyline; the caller supplies the conic
    conic = fit_ellipse_direct(circ_px)
    obs = build_observation(DetectionFile.from_dict(data), template, fits=conic)
    assert obs.case == "case1"
    assert obs.ellipse is conic
    assert obs.world_circle == "center"


def test_build_observation_reports_all_three_gaps(template):
    det = DetectionFile.from_dict({"image_size": [1920, 1080]})
    with pytest.raises(InsufficientEvidence) as err:
        build_observation(det, template)
    msg = str(err.value)
    assert "case1" in msg and "case2" in msg and "case3" in msg


def test_build_observation_bad_mask_falls_back_to_polyline(template, tmp_path):
    data, _, _ = scene_detection(2, template)
    data["mask_path"] = "missing.png"
    det = DetectionFile.from_dict(data, base_dir=str(tmp_path))
    obs = build_observation(det, template)
    assert obs.case == "case1"
    assert obs.concentric is None


def test_build_observation_from_mask_file(template, tmp_path):
    mask = annulus_mask() * 5
    Image.fromarray(mask, mode="L").save(tmp_path / "seg.png")
    data = {
        "image_size": [800, 600],
        "mask_path": "seg.png",
        "mask_class_map": {"circle": 5},
    }
    det = DetectionFile.from_dict(data, base_dir=str(tmp_path))
    obs = build_observation(det, template)
    assert obs.case == "case3"
    assert obs.world_circle == "outer"
    gi = geom_from_conic(obs.concentric[0])
    go = geom_from_conic(obs.concentric[1])
    assert np.allclose(gi.center, [399.5, 299.5], atol=1.0)
    assert abs(gi.semi_axes[0] - 80.0) < 1.0
    assert abs(go.semi_axes[0] - 100.0) < 1.0
