"""Delay embedding, Rips persistent cohomology and circular coordinates."""
from .circular import (
    CircularCoordinate,
    MixedCoordinates,
    PersistenceConfig,
    ThresholdRule,
    bar_lengths,
    circular_coordinate,
    mixed_coordinates,
    periodic_coordinate,
    significant_cocycles,
    smooth_cocycle,
)
from .embedding import PointCloud, delay_embed, maxmin_landmarks, pairwise_distances
from .rips import (
    Cocycle,
    PersistenceDiagram,
    enclosing_radius,
    lift,
    persistence_from_distances,
    rips_persistence,
)

__all__ = [
    "CircularCoordinate", "Cocycle", "MixedCoordinates", "PersistenceConfig",
    "PersistenceDiagram", "PointCloud", "ThresholdRule", "bar_lengths",
    "circular_coordinate", "delay_embed", "enclosing_radius", "lift",
    "maxmin_landmarks", "mixed_coordinates", "pairwise_distances",
    "periodic_coordinate", "persistence_from_distances", "rips_persistence",
    "significant_cocycles", "smooth_cocycle",
]
