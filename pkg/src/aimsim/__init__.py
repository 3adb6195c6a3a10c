"""Differentiable birdview traffic simulator on aerial-image maps."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Action,
    AgentAttributes,
    AgentKind,
    AgentState,
    ContractError,
    InvalidInputError,
    LightColor,
    NumericError,
    ParseError,
    Scene,
    SimError,
    TrafficLightState,
    normalize_angle,
    oriented_box_corners,
    world_to_ego,
    ego_to_world,
)
