"""Semantic particle-filter localisation in synthetic vineyards.

Thin wrapper over the C++ core. Trajectories are (N, 4) float arrays with
columns t, x, y, theta.
"""

from ._semloc import (
    ConfigError,
    Error,
    InvalidArgument,
    ParseError,
    Scenario,
    WallMap,
    World,
    WorldSpec,
    blend_alpha,
    cep_to_sigma,
    combined_loglik,
    evaluate,
    generate_world,
    gps_loglik,
    load_scenario,
    load_trajectory,
    load_world,
    localize,
    normalize_weights,
    parse_scenario,
    pixel_to_camera,
    replay,
    run,
    sweep,
)

METHODS = ("spf", "spf_nogps", "classless", "gps_only", "poles_only", "trunks_only")

__all__ = [
    "METHODS",
    "ConfigError",
    "Error",
    "InvalidArgument",
    "ParseError",
    "Scenario",
    "WallMap",
    "World",
    "WorldSpec",
    "blend_alpha",
    "cep_to_sigma",
    "combined_loglik",
    "evaluate",
    "generate_world",
    "gps_loglik",
    "load_scenario",
    "load_trajectory",
    "load_world",
    "localize",
    "normalize_weights",
    "parse_scenario",
    "pixel_to_camera",
    "replay",
    "run",
    "sweep",
]
