"""Core domain types: images, camera model, point clouds, masks, rigid poses.

Conventions used throughout the package:
  * camera frame, right-handed: +x right, +y down, +z forward (into the scene)
  * coordinates in meters; depth images store millimeters as uint16, 0 = no return
  * point clouds are numpy-column containers, one row per point
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


class Ripeness(enum.Enum):
    RIPE = "ripe"
    UNRIPE = "unripe"


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float = 800.0
    fy: float = 800.0
    cx: float = 319.5
    cy: float = 239.5

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ParameterError("focal lengths must be positive")

    def validate_for(self, width: int, height: int) -> None:
        if not (0 <= self.cx < width and 0 <= self.cy < height):
            raise ParameterError(
                f"principal point ({self.cx}, {self.cy}) outside {width}x{height} image"
            )


@dataclass(frozen=True)
class DepthImage:
    """Depth in millimeters, uint16, 0 marks an invalid pixel (no return)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ParameterError("depth image must be 2-D (H, W)")
        if v.dtype != np.uint16:
            if np.issubdtype(v.dtype, np.integer) and v.min(initial=0) >= 0 and v.max(initial=0) <= 65535:
                v = v.astype(np.uint16)
            else:
                raise ParameterError("depth image must be 16-bit unsigned millimeters")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """8-bit RGB image, shape (H, W, 3)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or v.shape[2] != 3:
            raise ParameterError("rgb image must have shape (H, W, 3)")
        if v.dtype != np.uint8:
            v = v.astype(np.uint8)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Point:
    """Single point view; convenience accessor over PointCloud rows."""

    x: float
    y: float
    z: float
    color: tuple[int, int, int] | None = None
    source_pixel: tuple[int, int] | None = None
    instance_id: int | None = None

    @property
    def xyz(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class PointCloud:
    """Ordered point container with optional per-point provenance.

    xyz           (N, 3) float64 meters, camera frame
    colors        (N, 3) uint8 or None
    source_pixels (N, 2) int32 (u, v) pixel coordinates or None
    instance_ids  (N,)   int32 or None

    Treated as immutable after construction; operations return new clouds.
    """

    xyz: np.ndarray
    colors: np.ndarray | None = None
    source_pixels: np.ndarray | None = None
    instance_ids: np.ndarray | None = None

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ParameterError("xyz must have shape (N, 3)")
        if xyz.size and not np.isfinite(xyz).all():
            raise ParameterError("point coordinates must be finite")
        object.__setattr__(self, "xyz", xyz)
        n = len(xyz)
        if self.colors is not None:
            c = np.asarray(self.colors, dtype=np.uint8)
            if c.shape != (n, 3):
                raise ParameterError("colors must have shape (N, 3)")
            object.__setattr__(self, "colors", c)
        if self.source_pixels is not None:
            sp = np.asarray(self.source_pixels, dtype=np.int32)
            if sp.shape != (n, 2):
                raise ParameterError("source_pixels must have shape (N, 2)")
            object.__setattr__(self, "source_pixels", sp)
        if self.instance_ids is not None:
            ids = np.asarray(self.instance_ids, dtype=np.int32)
            if ids.shape != (n,):
                raise ParameterError("instance_ids must have shape (N,)")
            object.__setattr__(self, "instance_ids", ids)

    def __len__(self) -> int:
        return len(self.xyz)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(xyz=np.zeros((0, 3)))

    def centroid(self) -> np.ndarray:
        if len(self) == 0:
            raise ParameterError("centroid of empty cloud")
        return self.xyz.mean(axis=0)

    def take(self, index: np.ndarray) -> "PointCloud":
        """Subset by boolean mask or integer index array, keeping attributes."""
        return PointCloud(
            xyz=self.xyz[index],
            colors=None if self.colors is None else self.colors[index],
            source_pixels=None if self.source_pixels is None else self.source_pixels[index],
            instance_ids=None if self.instance_ids is None else self.instance_ids[index],
        )

    def point(self, i: int) -> Point:
        x, y, z = self.xyz[i]
        return Point(
            x=float(x),
            y=float(y),
            z=float(z),
            color=None if self.colors is None else tuple(int(v) for v in self.colors[i]),
            source_pixel=None if self.source_pixels is None else tuple(int(v) for v in self.source_pixels[i]),
            instance_id=None if self.instance_ids is None else int(self.instance_ids[i]),
        )

    def with_instance_id(self, instance_id: int) -> "PointCloud":
        return PointCloud(
            xyz=self.xyz,
            colors=self.colors,
            source_pixels=self.source_pixels,
            instance_ids=np.full(len(self), instance_id, dtype=np.int32),
        )

    @staticmethod
    def concatenate(clouds: list["PointCloud"]) -> "PointCloud":
        clouds = [c for c in clouds if len(c) > 0]
        if not clouds:
            return PointCloud.empty()
        def _merge(attr):
            parts = [getattr(c, attr) for c in clouds]
            if any(p is None for p in parts):
                return None
            return np.concatenate(parts, axis=0)
        return PointCloud(
            xyz=np.concatenate([c.xyz for c in clouds], axis=0),
            colors=_merge("colors"),
            source_pixels=_merge("source_pixels"),
            instance_ids=_merge("instance_ids"),
        )


@dataclass(frozen=True)
class InstanceMask:
    """Binary per-pixel instance mask with a ripeness label."""

    bits: np.ndarray  # (H, W) bool
    instance_id: int
    ripeness: Ripeness

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ParameterError("mask bits must be 2-D (H, W)")
        if b.dtype != np.bool_:
            b = b.astype(bool)
        object.__setattr__(self, "bits", b)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def pixel_count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class VoxelParams:
    """Voxel grid downsampling parameters: cube edge (m) and the minimum
    member count a voxel needs to emit a centroid."""

    voxel_size: float = 0.005
    min_points: int = 30

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ParameterError("voxel_size must be positive")
        if self.min_points < 1:
            raise ParameterError("min_points must be >= 1")


@dataclass(frozen=True)
class OutlierParams:
    """Statistical outlier removal: k nearest neighbors and the standard
    deviation multiplier on the mean-neighbor-distance statistic."""

    k_neighbors: int = 16
    std_ratio: float = 2.0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ParameterError("k_neighbors must be >= 1")
        if self.std_ratio <= 0:
            raise ParameterError("std_ratio must be positive")


@dataclass(frozen=True)
class LossWeights:
    """Per-resolution weights for the multi-scale completion loss."""

    lambda0: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        w = (self.lambda0, self.lambda1, self.lambda2)
        if any(v < 0 for v in w):
            raise ParameterError("loss weights must be nonnegative")
        if all(v == 0 for v in w):
            raise ParameterError("at least one loss weight must be positive")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lambda0, self.lambda1, self.lambda2)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p_out = rotation @ p_in + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ParameterError("pose needs a 3x3 rotation and a 3-vector translation")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9):
            raise ParameterError("rotation must be orthonormal")
        if np.linalg.det(r) < 0:
            raise ParameterError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        return np.asarray(xyz) @ self.rotation.T + self.translation

    def apply_cloud(self, cloud: PointCloud) -> PointCloud:
        return PointCloud(
            xyz=self.apply(cloud.xyz),
            colors=cloud.colors,
            source_pixels=cloud.source_pixels,
            instance_ids=cloud.instance_ids,
        )

    def compose(self, other: "Pose") -> "Pose":
        """self after other: result.apply(p) == self.apply(other.apply(p))."""
        return Pose(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rotation=rt, translation=-rt @ self.translation)


def rotation_about_axis(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ParameterError("rotation axis must be nonzero")
    x, y, z = axis / n
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle_rad) * k + (1.0 - np.cos(angle_rad)) * (k @ k)


def rotation_aligning(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotation taking direction a to direction b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise ParameterError("cannot align zero-length directions")
    a = a / na
    b = b / nb
    c = float(np.dot(a, b))
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        # antiparallel: rotate pi about any axis perpendicular to a
        helper = np.array([1.0, 0.0, 0.0])
        if abs(a[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        axis = np.cross(a, helper)
        return rotation_about_axis(axis, np.pi)
    axis = np.cross(a, b)
    angle = float(np.arccos(np.clip(c, -1.0, 1.0)))
    return rotation_about_axis(axis, angle)
