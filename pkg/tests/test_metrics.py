import numpy as np
import pytest

from circlefield.correspond import derive_correspondences
from circlefield.errors import MissingCenter, NoCompletePairs
from circlefield.homography import apply_homography_xy, camera_to_homography
from circlefield.metrics import (
    DERIVED_OPPOSED_PAIRS,
    DETECTOR_OPPOSED_PAIRS,
    audit_from_correspondences,
    collinearity_audit,
    great_axis_pair,
    tangent_consistency,
)
from circlefield.projective import HomPoint2

from conftest import case1_observation, make_camera, observed_scene


def detector_keypoints(cam, template):
    """Exact image positions of every named template keypoint."""
    names = sorted(template.named_keypoints)
    world = np.array([template.named_keypoints[n] for n in names])
    px = apply_homography_xy(camera_to_homography(cam), world)
    return {n: px[i] for i, n in enumerate(names)}


def test_opposed_pair_tables():
    assert len(DETECTOR_OPPOSED_PAIRS) == 3
    assert len(DERIVED_OPPOSED_PAIRS) == 4
    flat = [n for pair in DETECTOR_OPPOSED_PAIRS for n in pair]
    assert "circle_center" not in flat
    assert "circle_halfway_pos" not in flat  # support-line material, not audit material
    assert set(DERIVED_OPPOSED_PAIRS) == {("a", "b"), ("d", "e"), ("g_ad", "g_be"), ("g_db", "g_ea")}


def test_exact_detections_are_collinear(template):
    for seed in range(10):
        cam = make_camera(seed, template=template)
        audit = collinearity_audit(detector_keypoints(cam, template))
        assert len(audit.residuals) == 3
        assert audit.skipped == ()
        assert audit.all_collinear
        assert audit.max_residual_px < 1e-7


def test_perturbed_point_breaks_collinearity(template):
    cam = make_camera(1, template=template)
    kps = detector_keypoints(cam, template)
    kps["circle_diag_pp"] = kps["circle_diag_pp"] + np.array([4.0, 0.0])
    audit = collinearity_audit(kps)
    assert not audit.all_collinear
    bad = {r for r in audit.residuals if not r.collinear}
    assert {(r.name_a, r.name_b) for r in bad} == {("circle_diag_pp", "circle_diag_nn")}
    assert audit.max_residual_px > 0.5


def test_missing_pairs_are_skipped_not_fatal(template):
    cam = make_camera(1, template=template)
    kps = detector_keypoints(cam, template)
    del kps["circle_axis_pos"]
    audit = collinearity_audit(kps)
    assert audit.skipped == (("circle_axis_pos", "circle_axis_neg"),)
    assert len(audit.residuals) == 2


def test_audit_requires_a_center(template):
    cam = make_camera(1, template=template)
    kps = detector_keypoints(cam, template)
    del kps["circle_center"]
    with pytest.raises(MissingCenter):
        collinearity_audit(kps)
    # an explicit center substitutes for the keypoint
    center = apply_homography_xy(camera_to_homography(cam), np.zeros((1, 2)))[0]
    audit = collinearity_audit(kps, center=center)
    assert audit.all_collinear


def test_no_complete_pairs(template):
    with pytest.raises(NoCompletePairs):
        collinearity_audit({"circle_center": np.array([10.0, 10.0])})


def test_audit_csv_layout(template):
    cam = make_camera(3, template=template)
    audit = collinearity_audit(detector_keypoints(cam, template))
    lines = audit.csv_text().strip().split("\n")
    assert lines[0] == "name_a,name_b,residual_px,collinear"
    assert len(lines) == 4
    name_a, name_b, residual, flag = lines[1].split(",")
    assert (name_a, name_b) == DETECTOR_OPPOSED_PAIRS[0]
    assert float(residual) < 1e-7
    assert flag == "1"


def test_derived_pairs_audit_clean(template):
    for seed in range(10):
        _, obs, prior = observed_scene(seed, template)
        corr = derive_correspondences(case1_observation(obs), template, prior)
        audit = audit_from_correspondences(corr, obs.center_px)
        assert len(audit.residuals) == 4
        assert audit.all_collinear
        assert audit.max_residual_px < 1e-7


def test_tangents_at_derived_pairs_meet_on_vanishing_line(template):
    _, obs, prior = observed_scene(5, template)
    observation = case1_observation(obs)
    corr = derive_correspondences(observation, template, prior)
    pairs = [
        (corr.point(a).image, corr.point(b).image) for a, b in DERIVED_OPPOSED_PAIRS
    ]
    report = tangent_consistency(observation.ellipse, pairs, corr.vanishing_line)
    assert report.all_consistent
    assert report.max_residual < 1e-6


def test_great_axis_is_not_a_central_chord(template):
    hits = 0
    for seed in range(20):
        _, obs, prior = observed_scene(seed, template)
        observation = case1_observation(obs)
        corr = derive_correspondences(observation, template, prior)
        pair = great_axis_pair(observation.ellipse)
        report = tangent_consistency(observation.ellipse, [pair], corr.vanishing_line)
        hits += report.all_consistent
    assert hits <= 1  # the axis endpoints only line up by coincidence


def test_great_axis_points_lie_on_the_ellipse(template):
    _, obs, _ = observed_scene(7, template)
    observation = case1_observation(obs)
    a, b = great_axis_pair(observation.ellipse)
    for p in (a, b):
        x = p.coords / p.coords[2]
        assert abs(x @ observation.ellipse.unit() @ x) < 1e-9


def test_tangent_check_flags_perturbed_pairs(template):
    _, obs, prior = observed_scene(5, template)
    observation = case1_observation(obs)
    corr = derive_correspondences(observation, template, prior)
    a = corr.point("a").image
    b = corr.point("b").image
    clean = tangent_consistency(observation.ellipse, [(a, b)], corr.vanishing_line)
    assert clean.all_consistent
    # swap in the wrong partner: tangents still meet, but far from the line
    e = corr.point("e").image
    wrong = tangent_consistency(observation.ellipse, [(a, e)], corr.vanishing_line)
    assert not wrong.all_consistent
    assert wrong.max_residual > 1e-3
