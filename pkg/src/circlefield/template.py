"""Planar soccer-field template: dimensions, center circle, named landmarks.

World frame: origin at the pitch center, x along the long axis (towards
the goals), y along the halfway line, meters. The halfway line is x = 0.
Only the geometry needed for center-circle calibration is modeled: the
pitch rectangle, the halfway line, and the center circle with its
painted thickness (inner/outer concentric edges at r -/+ thickness/2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .conics import Conic, circle_conic
from .errors import InvalidConfig
from .projective import HomLine2, HomPoint2

DEFAULT_LENGTH = 105.0
DEFAULT_WIDTH = 68.0
DEFAULT_CIRCLE_RADIUS = 9.15
DEFAULT_THICKNESS = 0.10

_CONFIG_KEYS = ("length", "width", "circle_radius", "thickness")


@dataclass(frozen=True)
class FieldTemplate:
    length: float
    width: float
    circle_radius: float
    marking_thickness: float
    named_keypoints: dict[str, np.ndarray] = field(default_factory=dict)
    named_lines: dict[str, HomLine2] = field(default_factory=dict)

    @property
    def inner_radius(self) -> float:
        return self.circle_radius - 0.5 * self.marking_thickness

    @property
    def outer_radius(self) -> float:
        return self.circle_radius + 0.5 * self.marking_thickness

    @property
    def center(self) -> np.ndarray:
        return np.zeros(2)

    @property
    def halfway_line(self) -> HomLine2:
        return self.named_lines["halfway"]

    def circle(self, which: str = "center") -> Conic:
        """Conic of a template circle: 'center', 'inner' or 'outer'."""
        radius = {
            "center": self.circle_radius,
            "inner": self.inner_radius,
            "outer": self.outer_radius,
        }.get(which)
        if radius is None:
            raise InvalidConfig(f"unknown template circle {which!r}")
        return circle_conic(self.center, radius)

    def circle_radius_of(self, which: str) -> float:
        return {
            "center": self.circle_radius,
            "inner": self.inner_radius,
            "outer": self.outer_radius,
        }[which]

    def keypoint(self, name: str) -> HomPoint2:
        xy = self.named_keypoints[name]
        return HomPoint2.from_xy(xy[0], xy[1])


def standard_template(config: dict | str | None = None) -> FieldTemplate:
    """Build the template, optionally overriding dimensions from a config.

    ``config`` may be a dict, a path to a JSON file, or None for the
    defaults (105 x 68 m pitch, 9.15 m circle, 0.10 m markings). Keys:
    length, width, circle_radius, thickness. Unknown keys are rejected.
    """
    values = {
        "length": DEFAULT_LENGTH,
        "width": DEFAULT_WIDTH,
        "circle_radius": DEFAULT_CIRCLE_RADIUS,
        "thickness": DEFAULT_THICKNESS,
    }
    if config is not None:
        if isinstance(config, str):
            try:
                with open(config) as fh:
                    config = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidConfig(f"cannot read template config: {exc}") from exc
        if not isinstance(config, dict):
            raise InvalidConfig(f"template config must be an object, got {type(config).__name__}")
        unknown = set(config) - set(_CONFIG_KEYS)
        if unknown:
            raise InvalidConfig(f"unknown template config keys: {sorted(unknown)}")
        for key in _CONFIG_KEYS:
            if key in config:
                try:
                    values[key] = float(config[key])
                except (TypeError, ValueError) as exc:
                    raise InvalidConfig(f"template config {key!r} must be a number") from exc

    length, width = values["length"], values["width"]
    radius, thickness = values["circle_radius"], values["thickness"]
    if length <= 0 or width <= 0:
        raise InvalidConfig(f"pitch dimensions must be positive, got {length} x {width}")
    if radius <= 0:
        raise InvalidConfig(f"circle radius must be positive, got {radius}")
    if not 0 < thickness < 2 * radius:
        raise InvalidConfig(f"marking thickness {thickness} incompatible with radius {radius}")
    if 2 * radius >= min(length, width):
        raise InvalidConfig("center circle does not fit inside the pitch")

    r = radius
    h = r / math.sqrt(2.0)
    keypoints = {
        "circle_center": np.array([0.0, 0.0]),
        # halfway-line intersections with the circle
        "circle_halfway_pos": np.array([0.0, r]),
        "circle_halfway_neg": np.array([0.0, -r]),
        # extremes along the pitch axis
        "circle_axis_pos": np.array([r, 0.0]),
        "circle_axis_neg": np.array([-r, 0.0]),
        # the four +/-45 degree points
        "circle_diag_pp": np.array([h, h]),
        "circle_diag_pn": np.array([h, -h]),
        "circle_diag_np": np.array([-h, h]),
        "circle_diag_nn": np.array([-h, -h]),
    }
    lines = {
        "halfway": HomLine2.from_abc(1.0, 0.0, 0.0),
        "touchline_pos": HomLine2.from_abc(0.0, 1.0, -width / 2.0),
        "touchline_neg": HomLine2.from_abc(0.0, 1.0, width / 2.0),
        "goal_line_pos": HomLine2.from_abc(1.0, 0.0, -length / 2.0),
        "goal_line_neg": HomLine2.from_abc(1.0, 0.0, length / 2.0),
    }
    return FieldTemplate(
        length=length,
        width=width,
        circle_radius=radius,
        marking_thickness=thickness,
        named_keypoints=keypoints,
        named_lines=lines,
    )
