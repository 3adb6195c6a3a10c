"""Shared state types and 2D rigid-frame geometry.

World frame: right-handed, x east, y north, headings in radians
counterclockwise from +x. Ego frame: the ego agent sits at the origin with
its heading mapped onto +y ("up" in the birdview image).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class SimError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SimError):
    """User-supplied data violates a documented precondition."""


class ContractError(SimError):
    """API misuse: incompatible shapes, out-of-range arguments, bad state."""


class NumericError(SimError):
    """A computation produced NaN or Inf."""


class ParseError(SimError):
    """A scenario or map file could not be parsed."""


class AgentKind(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"


class LightColor(str, Enum):
    RED = "red"
    YELLOW = "yellow"
    GREEN = "green"
    OFF = "off"


def normalize_angle(phi):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise InvalidInputError("angle must be finite")
    out = np.pi - (np.pi - phi) % TWO_PI
    return float(out) if out.ndim == 0 else out


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidInputError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class AgentState:
    """Pose and signed speed of one agent at one timestep.

    x, y in meters (world frame), phi in radians counterclockwise from +x
    (normalized to (-pi, pi] at construction), v in m/s.
    """

    x: float
    y: float
    phi: float
    v: float

    def __post_init__(self):
        _require_finite("AgentState", self.x, self.y, self.phi, self.v)
        object.__setattr__(self, "phi", normalize_angle(self.phi))

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.phi, self.v])

    @classmethod
    def from_array(cls, arr) -> "AgentState":
        x, y, phi, v = (float(a) for a in arr)
        return cls(x, y, phi, v)


@dataclass(frozen=True)
class AgentAttributes:
    """Constant per-agent bounding-box extents and kind."""

    length: float
    width: float
    kind: AgentKind = AgentKind.VEHICLE

    def __post_init__(self):
        _require_finite("AgentAttributes", self.length, self.width)
        if self.length <= 0 or self.width <= 0:
            raise InvalidInputError("agent extents must be positive")


@dataclass(frozen=True)
class Action:
    """Control input: a1 is acceleration (m/s^2); a2 is the steering angle
    (radians, bicycle) or angular velocity (rad/s, unicycle)."""

    a1: float
    a2: float

    def __post_init__(self):
        _require_finite("Action", self.a1, self.a2)


@dataclass(frozen=True)
class TrafficLightState:
    """Color of one traffic-light channel; light_id names a stop line
    declared in the AIM manifest."""

    light_id: str
    color: LightColor


@dataclass(frozen=True)
class Scene:
    """All agents and light states at a single timestep.

    Agent order is stable across timesteps within a scenario; downstream
    code indexes agents by position in this tuple.
    """

    timestep: int
    agents: tuple  # of (AgentState, AgentAttributes)
    lights: tuple = field(default_factory=tuple)  # of TrafficLightState

    def __post_init__(self):
        if len(self.agents) < 1:
            raise InvalidInputError("a scene needs at least one agent")
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "lights", tuple(self.lights))

    @property
    def num_agents(self) -> int:
        return len(self.agents)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def oriented_box_corners(state: AgentState, attrs: AgentAttributes) -> np.ndarray:
    """Return the agent's bounding-box corners as a (4, 2) world-frame array.

    Counterclockwise order starting at the front-left corner; the long axis
    is aligned with the heading.
    """
    half_l, half_w = attrs.length / 2.0, attrs.width / 2.0
    local = np.array(
        [[half_l, half_w], [-half_l, half_w], [-half_l, -half_w], [half_l, -half_w]]
    )
    return state.position() + local @ rotation_matrix(state.phi).T


def box_corners_array(xs, ys, phis, lengths, widths) -> np.ndarray:
    """Vectorized oriented_box_corners: inputs broadcast to shape S, output
    (S..., 4, 2). Corner order matches oriented_box_corners."""
    xs, ys, phis = np.asarray(xs, float), np.asarray(ys, float), np.asarray(phis, float)
    hl = np.asarray(lengths, float) / 2.0
    hw = np.asarray(widths, float) / 2.0
    c, s = np.cos(phis), np.sin(phis)
    sign_l = np.array([1.0, -1.0, -1.0, 1.0])
    sign_w = np.array([1.0, 1.0, -1.0, -1.0])
    lx = sign_l * hl[..., None]
    ly = sign_w * hw[..., None]
    cx = xs[..., None] + c[..., None] * lx - s[..., None] * ly
    cy = ys[..., None] + s[..., None] * lx + c[..., None] * ly
    return np.stack([cx, cy], axis=-1)


def world_to_ego(point, ego: AgentState) -> np.ndarray:
    """Map world-frame point(s) of shape (..., 2) into the ego frame.

    The ego position maps to the origin and its heading to the +y axis.
    """
    point = np.asarray(point, dtype=float)
    delta = point - ego.position()
    return delta @ rotation_matrix(math.pi / 2.0 - ego.phi).T


def ego_to_world(point, ego: AgentState) -> np.ndarray:
    """Inverse of world_to_ego."""
    point = np.asarray(point, dtype=float)
    return point @ rotation_matrix(ego.phi - math.pi / 2.0).T + ego.position()


def scene_bounds(states: Sequence[AgentState], pad: float = 0.0) -> np.ndarray:
    """Axis-aligned bounds [[xmin, ymin], [xmax, ymax]] of agent centers."""
    pts = np.array([[s.x, s.y] for s in states])
    return np.stack([pts.min(axis=0) - pad, pts.max(axis=0) + pad])
