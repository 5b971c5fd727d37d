"""Acoustic localization of a hidden source from sound diffracted around edges."""
from .errors import LocalizationError, SceneError
from .scene import (DoorwayScene, EdgeScene, MicArray, PhysicsConfig, Point3, SourceGroundTruth,
                    doorway_preset, edge_preset)

__version__ = "0.1.0"

__all__ = ["DoorwayScene", "EdgeScene", "LocalizationError", "MicArray", "PhysicsConfig",
           "Point3", "SceneError", "SourceGroundTruth", "doorway_preset", "edge_preset"]
