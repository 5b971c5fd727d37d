"""
Scene geometry: points, vertical microphone arrays, doorway and single-edge scenes.

Coordinates are right-handed meters with ``z`` the height above the floor.
Edges are infinite vertical lines, so only horizontal geometry enters the
propagation distances; heights are handled by the wavefront model.

Azimuths are degrees at the interface. An azimuth is measured about the
diffractive edge from the line of sight (LOS), i.e. the direction from the
(near) array through the edge, and is positive into the acoustic shadow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float = 0.0

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class MicArray:
    """Vertical line array; microphone ``k`` sits at ``base.z + k * pitch``."""

    base: Point3
    count: int
    pitch: float
    id: str = "array"

    @property
    def heights(self) -> np.ndarray:
        return self.base.z + self.pitch * np.arange(self.count)

    def positions(self) -> np.ndarray:
        """``(count, 3)`` microphone coordinates."""
        pos = np.empty((self.count, 3))
        pos[:, 0] = self.base.x
        pos[:, 1] = self.base.y
        pos[:, 2] = self.heights
        return pos


@dataclass(frozen=True)
class PhysicsConfig:
    c: float = 343.0
    fs: float = 48000.0


@dataclass(frozen=True)
class SourceGroundTruth:
    r1: float
    theta: float
    z0: float
    t0: float = 0.0


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise ValueError("cannot normalise a zero horizontal vector")
    return np.asarray(v, dtype=float) / n


def _cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


@dataclass(frozen=True)
class DoorwayScene:
    """Doorway with a diffractive near edge and a reflective far edge.

    ``r2_d`` / ``r2_r`` are the measured visible-side distances from the array
    to each edge. They are scene constants used by the inverse pipeline and may
    differ slightly from the true geometry (calibration error).
    """

    edge_d: Point3
    edge_r: Point3
    array: MicArray
    r2_d: float
    r2_r: float
    door_width: float

    kind = "doorway"

    @property
    def arrays(self) -> tuple[MicArray, ...]:
        return (self.array,)

    @property
    def los_direction(self) -> np.ndarray:
        return _unit(self.edge_d.xy - self.array.base.xy)

    @property
    def shadow_sign(self) -> float:
        # the door opening (far edge side) is the lit side
        side = _cross(self.los_direction, self.edge_r.xy - self.edge_d.xy)
        return -1.0 if side > 0 else 1.0

    def source_position(self, source: SourceGroundTruth) -> Point3:
        return source_from_polar(source.r1, self.shadow_sign * source.theta, source.z0,
                                 self.edge_d, self.los_direction)

    def polar(self, point: Point3) -> tuple[float, float, float]:
        r1, theta, z = polar_from_point(point, self.edge_d, self.los_direction)
        return r1, self.shadow_sign * theta, z


@dataclass(frozen=True)
class EdgeScene:
    """Single vertical edge observed by two arrays at different azimuths.

    ``arrays[0]`` is the near-LOS pole; ``arrays[1]`` sits ``delta_theta``
    degrees further into the shadow as seen from the edge.
    """

    edge: Point3
    arrays: tuple[MicArray, ...]
    r2: tuple[float, ...]
    delta_theta: float

    kind = "edge"

    @property
    def los_direction(self) -> np.ndarray:
        return _unit(self.edge.xy - self.arrays[0].base.xy)

    @property
    def shadow_sign(self) -> float:
        side = _cross(self.los_direction, self.arrays[1].base.xy - self.edge.xy)
        return -1.0 if side < 0 else 1.0

    def source_position(self, source: SourceGroundTruth) -> Point3:
        return source_from_polar(source.r1, self.shadow_sign * source.theta, source.z0,
                                 self.edge, self.los_direction)

    def polar(self, point: Point3) -> tuple[float, float, float]:
        r1, theta, z = polar_from_point(point, self.edge, self.los_direction)
        return r1, self.shadow_sign * theta, z


def path_distance(grid_point: Point3, edge: Point3, r2: float) -> float:
    """Horizontal propagation distance from ``grid_point`` via ``edge`` to the array."""
    return math.hypot(grid_point.x - edge.x, grid_point.y - edge.y) + r2


def path_distances(xy: np.ndarray, edge: Point3, r2: float) -> np.ndarray:
    """Vectorised :func:`path_distance` over an ``(..., 2)`` array of horizontal points."""
    xy = np.asarray(xy, dtype=float)
    return np.hypot(xy[..., 0] - edge.x, xy[..., 1] - edge.y) + r2


def source_from_polar(r1: float, theta: float, z0: float, edge: Point3,
                      los_direction) -> Point3:
    """Point at horizontal distance ``r1`` from ``edge``, ``theta`` degrees
    counter-clockwise from ``los_direction``, at height ``z0``."""
    u = _unit(np.asarray(los_direction, dtype=float)[:2])
    a = math.radians(theta)
    ca, sa = math.cos(a), math.sin(a)
    dx = r1 * (ca * u[0] - sa * u[1])
    dy = r1 * (sa * u[0] + ca * u[1])
    return Point3(edge.x + dx, edge.y + dy, z0)


def polar_from_point(point: Point3, edge: Point3, los_direction) -> tuple[float, float, float]:
    """Inverse of :func:`source_from_polar`; returns ``(r1, theta_deg, z)``."""
    u = _unit(np.asarray(los_direction, dtype=float)[:2])
    d = np.array([point.x - edge.x, point.y - edge.y])
    r1 = float(np.hypot(*d))
    theta = math.degrees(math.atan2(_cross(u, d), float(np.dot(u, d))))
    return r1, theta, point.z


def validate_physics(physics: PhysicsConfig, max_freq: float = 9000.0) -> list[str]:
    out = []
    if not physics.c > 0:
        out.append("PhysicsConfig.c: must be > 0")
    if not physics.fs > 0:
        out.append("PhysicsConfig.fs: must be > 0")
    elif physics.fs < 2 * max_freq:
        out.append(f"PhysicsConfig.fs: must be >= {2 * max_freq:g} Hz "
                   f"(twice the highest analysis frequency)")
    return out


def _validate_point(p: Point3, name: str, physical: bool = True) -> list[str]:
    vals = (p.x, p.y, p.z)
    if not all(math.isfinite(v) for v in vals):
        return [f"{name}: coordinates must be finite"]
    if physical and p.z < 0:
        return [f"{name}.z: must be >= 0 (floor at z = 0)"]
    return []


def _validate_array(a: MicArray, name: str) -> list[str]:
    out = _validate_point(a.base, f"{name}.base")
    if not (isinstance(a.count, (int, np.integer)) and a.count >= 2):
        out.append(f"{name}.count: must be an integer >= 2")
    if not a.pitch > 0:
        out.append(f"{name}.pitch: must be > 0")
    return out


def validate_scene(scene) -> list[str]:
    """Return a list of invariant violations; empty iff the scene is valid.

    Each entry reads ``"<Type.field>: <constraint>"``.
    """
    out: list[str] = []
    if isinstance(scene, DoorwayScene):
        out += _validate_point(scene.edge_d, "DoorwayScene.edge_d")
        out += _validate_point(scene.edge_r, "DoorwayScene.edge_r")
        out += _validate_array(scene.array, "MicArray")
        if not scene.r2_d > 0:
            out.append("DoorwayScene.r2_d: must be > 0")
        if not scene.r2_r > 0:
            out.append("DoorwayScene.r2_r: must be > 0")
        if not scene.door_width > 0:
            out.append("DoorwayScene.door_width: must be > 0")
        if scene.r2_d > scene.r2_r:
            out.append("DoorwayScene.r2_d: must be <= r2_r")
    elif isinstance(scene, EdgeScene):
        out += _validate_point(scene.edge, "EdgeScene.edge")
        if len(scene.arrays) != 2:
            out.append("EdgeScene.arrays: exactly 2 arrays required")
        for a in scene.arrays:
            out += _validate_array(a, "MicArray")
        if len(scene.r2) != len(scene.arrays) or any(not r > 0 for r in scene.r2):
            out.append("EdgeScene.r2: one positive distance per array required")
        if not 0 < scene.delta_theta < 90:
            out.append("EdgeScene.delta_theta: must satisfy 0 < delta_theta < 90")
    else:
        out.append(f"scene: unsupported type {type(scene).__name__}")
    return out


def validate_source(source: SourceGroundTruth) -> list[str]:
    out = []
    if not source.r1 > 0:
        out.append("SourceGroundTruth.r1: must be > 0")
    if not source.z0 >= 0:
        out.append("SourceGroundTruth.z0: must be >= 0")
    return out


def doorway_preset() -> DoorwayScene:
    """Doorway experiment: 15 mics at 13 cm pitch from 46 cm, 0.8 m from the
    diffractive edge, 0.9 m wide door. LOS runs along +x, shadow towards +y."""
    array = MicArray(Point3(-0.8, 0.0, 0.46), 15, 0.13, "door")
    edge_d = Point3(0.0, 0.0, 0.0)
    edge_r = Point3(0.0, -0.9, 0.0)
    r2_r = math.hypot(0.8, 0.9)
    return DoorwayScene(edge_d, edge_r, array, 0.8, r2_r, 0.9)


def edge_preset(delta_theta: float = 25.0, r2: float = 0.8) -> EdgeScene:
    """Single edge with two 8-mic arrays (26 cm pitch from 46 cm), both ``r2``
    from the edge and ``delta_theta`` apart in azimuth."""
    near = MicArray(Point3(-r2, 0.0, 0.46), 8, 0.26, "near")
    a = math.radians(180.0 - delta_theta)
    far = MicArray(Point3(r2 * math.cos(a), r2 * math.sin(a), 0.46), 8, 0.26, "far")
    return EdgeScene(Point3(0.0, 0.0, 0.0), (near, far), (r2, r2), delta_theta)
