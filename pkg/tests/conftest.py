"""Shared builders for the test suite.

Everything is seeded and deterministic; the helpers mirror how the sweep
harness assembles observations so tests exercise the same code paths.
"""

import numpy as np
import pytest

from circlefield import (
    CircleObservation,
    NoiseSpec,
    fit_ellipse_direct,
    observe_circle,
    prior_from_camera,
    sample_camera,
    standard_template,
)
from circlefield.projective import HomPoint2


@pytest.fixture(scope="session")
def template():
    return standard_template()


@pytest.fixture(scope="session")
def thin_template():
    # the painted-edge experiments assume 8 cm lines
    return standard_template({"thickness": 0.08})


def make_camera(seed, template=None, **kwargs):
    rng = np.random.default_rng(seed)
    return sample_camera(rng, template=template or standard_template(), **kwargs)


def case1_observation(obs, exact_center=True):
    """CircleObservation a detector would hand over in the common case."""
    outer = fit_ellipse_direct(obs.outer_points)
    return CircleObservation(
        ellipse=outer,
        imaged_center=HomPoint2.from_xy(*obs.center_px),
        support_line=("halfway", obs.halfway_line),
        world_circle="outer",
        case="case1",
    )


def case3_observation(obs):
    inner = fit_ellipse_direct(obs.inner_points)
    outer = fit_ellipse_direct(obs.outer_points)
    return CircleObservation(
        ellipse=outer,
        support_line=("halfway", obs.halfway_line),
        concentric=(inner, outer),
        world_circle="outer",
        case="case3",
    )


def observed_scene(seed, template, sigma=0.0, target="ellipse_points", n_points=8):
    """Camera + exact-or-noisy projection for one seeded trial."""
    cam = make_camera(seed, template=template)
    obs = observe_circle(cam, template, n_points, NoiseSpec(sigma, seed, target))
    return cam, obs, prior_from_camera(cam)
