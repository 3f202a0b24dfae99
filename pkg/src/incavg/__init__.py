"""Averaging of multi-frequency differential inclusions and control systems.

Convex sets are carried as sampled support functions; set-valued maps are
support-function oracles vectorised in time.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .averaging import (
    ALPHA_CLOSED_FORM,
    ALPHA_PRINTED,
    alpha_quadrature,
    average_periodic,
    chattering_average,
    chattering_map,
    estimate_delta_modulus,
    estimate_gauge,
)
from .bounds import (
    BoundReport,
    additivity_bound,
    componentwise_bound,
    control_bound,
    estimate_constants,
    gauge_bound,
    key_lemma_bound,
    periodic_bound,
    sqrt_delta_bound,
)
from .convex import ConvexSet, DirectionGrid, hausdorff, minkowski_sum, project
from .decouple import averaged_lift, lift, phi, verify_correspondence
from .setmap import Box, ControlSystem, ControlTerm, SetMap, control_map, partial_average
from .trajectory import (
    SelectionStrategy,
    Trajectory,
    endpoint_reach_interval,
    filippov_track,
    solution_set_distance,
)

__all__ = [
    "ALPHA_CLOSED_FORM", "ALPHA_PRINTED", "BACKEND", "BoundReport", "Box", "ControlSystem",
    "ControlTerm", "ConvexSet", "DirectionGrid", "SelectionStrategy", "SetMap", "Trajectory",
    "additivity_bound", "alpha_quadrature", "average_periodic", "averaged_lift", "chattering_average",
    "chattering_map", "componentwise_bound", "control_bound", "control_map", "endpoint_reach_interval",
    "estimate_constants", "estimate_delta_modulus", "estimate_gauge", "filippov_track", "gauge_bound",
    "hausdorff", "key_lemma_bound", "lift", "minkowski_sum", "partial_average", "periodic_bound", "phi",
    "project", "solution_set_distance", "sqrt_delta_bound", "verify_correspondence",
]
