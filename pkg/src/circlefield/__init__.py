"""Planar calibration of sports-field cameras from the center circle.

The imaged center circle, together with one more piece of evidence (the
halfway line, a known point, or the concentric paint edges), fixes
enough projective structure to derive point and line correspondences
with the field template and estimate the world-to-image homography.
"""

from .errors import (
    AmbiguousPrior,
    CenterOnConic,
    CircleFieldError,
    CircleNotVisible,
    ClassAbsent,
    ConsensusFailure,
    DegenerateConfiguration,
    DegenerateJoin,
    DegenerateMeet,
    DegeneratePose,
    ExhaustedRetries,
    IllConditioned,
    InsufficientEvidence,
    InsufficientPoints,
    InvalidConfig,
    MissingCenter,
    MissingLine,
    MissingPoint,
    NoCompletePairs,
    NoIntersection,
    NonPositiveRadius,
    NotAnEllipse,
    NotNested,
    NoValidEigenvector,
    PointAtInfinity,
    PointNotOnConic,
    RankDeficient,
    SchemaError,
    SingularConic,
    SingularHomography,
    TooFewCandidates,
    ZeroPolar,
)
from .projective import (
    HomLine2,
    HomPoint2,
    Homography,
    canonical,
    join_points,
    meet_lines,
    pole_of_line,
    polar_of_point,
    scale_equivalent,
    transform_under_homography,
)
from .conics import (
    Conic,
    EllipseGeom,
    circle_conic,
    conic_from_geom,
    fit_ellipse_direct,
    geom_from_conic,
    intersect_line_conic,
    tangent_at,
)
from .template import FieldTemplate, standard_template
from .correspond import (
    CameraPrior,
    CircleObservation,
    CorrespondenceSet,
    LinePair,
    PointPair,
    derive_case1,
    derive_case2,
    derive_correspondences,
    extend_green_points,
    recover_center_concentric,
    resolve_orientation,
    vanishing_line_from_center,
)
from .homography import (
    DltProblem,
    apply_homography_xy,
    camera_to_homography,
    estimate_homography_dlt,
    mean_reprojection_error,
)
from .synthcam import (
    CameraRanges,
    CameraSample,
    NoiseSpec,
    ObservedCircle,
    SweepConfig,
    SweepReport,
    TrialRow,
    central_view,
    observe_circle,
    prior_from_camera,
    rasterize_ring_mask,
    ring_width_px,
    run_noise_sweep,
    sample_camera,
    visible_template_grid,
)
from .ingest import (
    ConcentricEdges,
    DetectionFile,
    ExtractOptions,
    Keypoint,
    LineDetection,
    RansacOptions,
    build_observation,
    extract_concentric_edges,
    fit_line_tls,
    parse_detection_file,
    ransac_fit_concentric,
    sampson_distance,
)
from .metrics import (
    DERIVED_OPPOSED_PAIRS,
    DETECTOR_OPPOSED_PAIRS,
    CollinearityAudit,
    TangentReport,
    audit_from_correspondences,
    collinearity_audit,
    great_axis_pair,
    tangent_consistency,
)
from .io_formats import (
    load_correspondences,
    load_homography,
    save_correspondences,
    save_homography,
)
from .render import render_png, render_svg

__version__ = "0.1.0"
