"""Terrain traversability mapping from LiDAR heights and semantic labels, with Hybrid A* planning."""

from .config import DEFAULT_FOOTPRINT, ConfigError, PipelineConfig, load_config
from .fusion import FORBIDDEN, TraversabilityScore, fuse, fuse_grid, update_traversability_layer
from .geometry import GeoThresholds, MachineSpec, derive_thresholds, geometric_traversability
from .gridmap import ElevationGridMap, GridSpec, Pose, world_to_index
from .pipeline import MappingPipeline
from .planner import NoPath, InvalidStart, PlannedPath, PlannerConfig, VehicleFootprint, plan
from .postprocess import OccupancyGrid, find_nontraversable_regions, remove_small_regions, to_occupancy
from .semantics import CameraModel, SemanticClass, label_cloud, majority_label, project_point

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_FOOTPRINT", "ConfigError", "PipelineConfig", "load_config",
    "FORBIDDEN", "TraversabilityScore", "fuse", "fuse_grid", "update_traversability_layer",
    "GeoThresholds", "MachineSpec", "derive_thresholds", "geometric_traversability",
    "ElevationGridMap", "GridSpec", "Pose", "world_to_index", "MappingPipeline",
    "NoPath", "InvalidStart", "PlannedPath", "PlannerConfig", "VehicleFootprint", "plan",
    "OccupancyGrid", "find_nontraversable_regions", "remove_small_regions", "to_occupancy",
    "CameraModel", "SemanticClass", "label_cloud", "majority_label", "project_point",
]
