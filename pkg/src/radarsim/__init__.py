"""Radar scene simulation, SFCW signal synthesis and matched-filter imaging."""

__version__ = "0.1.0"

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

from .scene import (
    AntennaArray,
    RigidPose,
    Scene,
    TriangleMesh,
    apply_pose,
    build_planar_array,
    load_mesh,
)
from .raytracer import MaterialParams, PathSet, PropagationPath, TraceConfig, trace_paths
from .signal import IFDataCube, SfcwConfig, path_length, synthesize_if
from .imaging import RadarImagePair, VoxelGrid, VoxelVolume, matched_filter, max_project, normalize_pair

__all__ = [
    "SPEED_OF_LIGHT",
    "TriangleMesh",
    "RigidPose",
    "AntennaArray",
    "Scene",
    "load_mesh",
    "apply_pose",
    "build_planar_array",
    "MaterialParams",
    "TraceConfig",
    "PropagationPath",
    "PathSet",
    "trace_paths",
    "SfcwConfig",
    "IFDataCube",
    "path_length",
    "synthesize_if",
    "VoxelGrid",
    "VoxelVolume",
    "RadarImagePair",
    "matched_filter",
    "max_project",
    "normalize_pair",
]
