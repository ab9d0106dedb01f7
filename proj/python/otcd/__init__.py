"""Change detection between two point cloud epochs via (unbalanced) optimal transport.

Points are float arrays of shape (n, 3); labels and classes are uint8 arrays
with 0 = unchanged, 1 = new, 2 = demolished.
"""

from ._otcd import (
    DEFAULT_EPSILON_REL,
    DEFAULT_RHO,
    DEMOLISHED,
    NEW,
    UNCHANGED,
    ConfigError,
    DataError,
    Error,
    NumericError,
    ParseError,
    ResourceError,
    confusion,
    cost_matrix,
    detect_changes,
    exact_ot,
    iou,
    preset_names,
    read_cloud,
    sinkhorn,
    sinkhorn_cost,
    sweep_scores,
    synth,
    write_xyz,
)

__all__ = [
    "DEFAULT_EPSILON_REL",
    "DEFAULT_RHO",
    "DEMOLISHED",
    "NEW",
    "UNCHANGED",
    "ConfigError",
    "DataError",
    "Error",
    "NumericError",
    "ParseError",
    "ResourceError",
    "confusion",
    "cost_matrix",
    "detect_changes",
    "exact_ot",
    "iou",
    "preset_names",
    "read_cloud",
    "sinkhorn",
    "sinkhorn_cost",
    "sweep_scores",
    "synth",
    "write_xyz",
]
