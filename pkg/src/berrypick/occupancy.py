"""Obstacle aggregation and occupancy-grid construction.

The planner treats the end-effector as a point, so the grid absorbs the
gripper geometry by inflating obstacles: a cell is occupied when an obstacle
point falls inside it, or when the cell's center lies within the inflation
radius of any obstacle point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParameterError
from .types import PointCloud


@dataclass(frozen=True)
class ObstacleSet:
    """Union of the non-target clouds, tagged with the id they exclude."""

    points: PointCloud
    excluded_id: int | None = None

    def __post_init__(self):
        ids = self.points.instance_ids
        if self.excluded_id is not None and ids is not None and len(self.points):
            if (ids == self.excluded_id).any():
                raise ParameterError("obstacle set contains the target instance")

    def __len__(self) -> int:
        return len(self.points)


def build_obstacles(candidates, target_id: int) -> ObstacleSet:
    """Union of every candidate cloud except the target's.

    candidates: iterable of objects with .instance_id and .cloud (PointCloud).
    """
    clouds = [c.cloud for c in candidates if c.instance_id != target_id]
    if not clouds:
        return ObstacleSet(points=PointCloud.empty(), excluded_id=target_id)
    return ObstacleSet(points=PointCloud.concatenate(clouds), excluded_id=target_id)


@dataclass(frozen=True)
class OccupancyGrid:
    origin: np.ndarray  # world position of the (0,0,0) cell's min corner
    resolution: float
    dims: tuple[int, int, int]
    occupied: np.ndarray  # bool, shape dims

    def __post_init__(self):
        if self.resolution <= 0:
            raise ParameterError("grid resolution must be positive")
        if self.occupied.shape != tuple(self.dims):
            raise ParameterError("occupancy array shape does not match dims")

    def cell_of(self, point: np.ndarray) -> tuple[int, int, int]:
        idx = np.floor((np.asarray(point) - self.origin) / self.resolution).astype(int)
        if not self.in_bounds(tuple(idx)):
            raise ParameterError(f"point {point} outside grid bounds")
        return tuple(idx)

    def center_of(self, cell: tuple[int, int, int]) -> np.ndarray:
        return self.origin + (np.asarray(cell) + 0.5) * self.resolution

    def in_bounds(self, cell: tuple[int, int, int]) -> bool:
        return all(0 <= c < d for c, d in zip(cell, self.dims))

    def is_occupied(self, cell: tuple[int, int, int]) -> bool:
        return bool(self.occupied[cell])

    def linear_index(self, cell: tuple[int, int, int]) -> int:
        i, j, k = cell
        return (i * self.dims[1] + j) * self.dims[2] + k

    @property
    def occupied_count(self) -> int:
        return int(self.occupied.sum())


def build_occupancy(
    obstacles: ObstacleSet,
    resolution: float = 0.005,
    inflation: float = 0.015,
    include_points=None,
    bounds: tuple[np.ndarray, np.ndarray] | None = None,
) -> OccupancyGrid:
    """Rasterize inflated obstacles into a grid that covers both the obstacle
    extent and any extra points of interest (end-effector, grasp region).

    include_points widens the bounds without marking anything occupied.
    bounds, when given, pins the grid extent exactly (points outside raise).
    """
    if resolution <= 0:
        raise ParameterError("resolution must be positive")
    if inflation < 0:
        raise ParameterError("inflation must be nonnegative")

    pts = obstacles.points.xyz if len(obstacles) else np.zeros((0, 3))
    anchors = [pts]
    if include_points is not None:
        extra = np.atleast_2d(np.asarray(include_points, dtype=np.float64))
        anchors.append(extra)
    anchor_rows = [a for a in anchors if len(a)]
    if not anchor_rows:
        raise ParameterError("cannot size a grid with no obstacles and no points")
    anchor = np.concatenate(anchor_rows, axis=0)

    pad = inflation + 2 * resolution
    if bounds is None:
        lo = anchor.min(axis=0) - pad
        hi = anchor.max(axis=0) + pad
    else:
        lo = np.asarray(bounds[0], dtype=np.float64)
        hi = np.asarray(bounds[1], dtype=np.float64)
        if (anchor < lo).any() or (anchor > hi).any():
            raise ParameterError("points fall outside the requested bounds")
    dims = tuple(int(d) for d in np.maximum(np.ceil((hi - lo) / resolution), 1).astype(int))

    occupied = np.zeros(dims, dtype=bool)
    if len(pts):
        cells = np.floor((pts - lo) / resolution).astype(int)
        cells = np.clip(cells, 0, np.asarray(dims) - 1)
        occupied[cells[:, 0], cells[:, 1], cells[:, 2]] = True

        if inflation > 0:
            # only cells near the obstacle AABB can possibly be within range
            lo_cell = np.floor((pts.min(axis=0) - inflation - lo) / resolution).astype(int)
            hi_cell = np.floor((pts.max(axis=0) + inflation - lo) / resolution).astype(int)
            lo_cell = np.clip(lo_cell, 0, np.asarray(dims) - 1)
            hi_cell = np.clip(hi_cell, 0, np.asarray(dims) - 1)
            axes = [np.arange(a, b + 1) for a, b in zip(lo_cell, hi_cell)]
            ii, jj, kk = np.meshgrid(*axes, indexing="ij")
            sub = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3)
            centers = lo + (sub + 0.5) * resolution
            dist, _ = cKDTree(pts).query(centers)
            near = sub[dist <= inflation]
            occupied[near[:, 0], near[:, 1], near[:, 2]] = True

    return OccupancyGrid(origin=lo, resolution=resolution, dims=dims, occupied=occupied)
