"""Target selection, grasp estimation, A* trajectory planning and a
ground-truth execution check.

The end-effector is a point; the occupancy grid has already absorbed the
gripper radius through obstacle inflation. Paths are 26-connected shortest
paths over free cells with Euclidean edge costs, found by A* with a
deterministic tie-break so planning is reproducible bit for bit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, NoRipeTargetError, ParameterError
from .occupancy import OccupancyGrid
from .render import GroundTruth
from .types import PointCloud, Ripeness


@dataclass(frozen=True)
class RobotState:
    p_ee: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.05]))
    gripper_radius: float = 0.015

    def __post_init__(self):
        object.__setattr__(self, "p_ee", np.asarray(self.p_ee, dtype=np.float64))
        if self.p_ee.shape != (3,):
            raise ParameterError("end-effector position must be a 3-vector")
        if self.gripper_radius <= 0:
            raise ParameterError("gripper radius must be positive")


@dataclass(frozen=True)
class Candidate:
    """One detected berry as the planner sees it: a cloud with identity."""

    instance_id: int
    ripeness: Ripeness
    cloud: PointCloud

    @property
    def centroid(self) -> np.ndarray:
        return self.cloud.centroid()


@dataclass(frozen=True)
class GraspPose:
    grasp_point: np.ndarray
    approach_dir: np.ndarray
    pregrasp_offset: float

    def __post_init__(self):
        object.__setattr__(self, "grasp_point", np.asarray(self.grasp_point, dtype=np.float64))
        object.__setattr__(self, "approach_dir", np.asarray(self.approach_dir, dtype=np.float64))
        if abs(np.linalg.norm(self.approach_dir) - 1.0) > 1e-9:
            raise ParameterError("approach direction must be a unit vector")
        if self.pregrasp_offset <= 0:
            raise ParameterError("pregrasp offset must be positive")

    @property
    def pregrasp_point(self) -> np.ndarray:
        return self.grasp_point - self.pregrasp_offset * self.approach_dir


@dataclass(frozen=True)
class Trajectory:
    waypoints: np.ndarray  # (N, 3)
    feasible: bool

    def __post_init__(self):
        object.__setattr__(
            self, "waypoints", np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 3)
        )

    def length_m(self) -> float:
        if len(self.waypoints) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())


def select_target(candidates, p_ee: np.ndarray) -> int:
    """Nearest ripe candidate by centroid distance to the end-effector.

    Ties break toward the lowest instance id. Raises NoRipeTargetError when
    nothing ripe is in view.
    """
    p_ee = np.asarray(p_ee, dtype=np.float64)
    ranked = sorted(
        (
            (float(np.linalg.norm(c.centroid - p_ee)), c.instance_id)
            for c in candidates
            if c.ripeness is Ripeness.RIPE
        ),
    )
    if not ranked:
        raise NoRipeTargetError("no ripe instance among the candidates")
    return ranked[0][1]


def estimate_grasp(target_cloud: PointCloud, state: RobotState, berry_width_m: float) -> GraspPose:
    """Grasp at the completed centroid, approaching horizontally.

    The approach direction is the end-effector-to-target vector flattened to
    the horizontal plane (zero vertical component), matching a front-on
    approach to a hanging fruit. The pregrasp point backs off by the berry
    width plus a centimeter.
    """
    grasp = target_cloud.centroid()
    direction = grasp - state.p_ee
    direction[1] = 0.0
    norm = np.linalg.norm(direction)
    if norm < 1e-9:
        raise GeometryError("target is directly at or above the end-effector")
    return GraspPose(
        grasp_point=grasp,
        approach_dir=direction / norm,
        pregrasp_offset=berry_width_m + 0.01,
    )


_NEIGHBOR_STEPS: list[tuple[int, int, int, float]] = [
    (di, dj, dk, math.sqrt(di * di + dj * dj + dk * dk))
    for di in (-1, 0, 1)
    for dj in (-1, 0, 1)
    for dk in (-1, 0, 1)
    if (di, dj, dk) != (0, 0, 0)
]


def astar_grid(
    grid: OccupancyGrid,
    start: tuple[int, int, int],
    goal: tuple[int, int, int],
) -> tuple[list[tuple[int, int, int]], float] | None:
    """Shortest 26-connected path over free cells, or None when disconnected.

    Costs are Euclidean center-to-center distances in cell units scaled by the
    grid resolution. Ties on f-value break toward the lower linearized cell
    index, making expansion order and the returned path deterministic.

    The search runs on flat indices into a one-cell-padded copy of the
    occupancy array whose border reads occupied, which removes per-neighbor
    bounds checks from the inner loop.
    """
    for name, cell in (("start", start), ("goal", goal)):
        if not grid.in_bounds(cell):
            raise ParameterError(f"{name} cell {cell} outside grid")
    if grid.is_occupied(start) or grid.is_occupied(goal):
        return None

    res = grid.resolution
    nx, ny, nz = grid.dims
    py, pz = ny + 2, nz + 2
    padded = np.ones((nx + 2, py, pz), dtype=bool)
    padded[1:-1, 1:-1, 1:-1] = grid.occupied
    occ = padded.ravel().tobytes()  # byte lookup beats ndarray indexing here

    def flat(cell: tuple[int, int, int]) -> int:
        return ((cell[0] + 1) * py + cell[1] + 1) * pz + cell[2] + 1

    sxy = py * pz
    gx, gy, gz = goal[0] + 1, goal[1] + 1, goal[2] + 1

    def heuristic(f: int) -> float:
        x, rem = divmod(f, sxy)
        y, z = divmod(rem, pz)
        return math.sqrt((x - gx) ** 2 + (y - gy) ** 2 + (z - gz) ** 2) * res

    # tie-break key: the cell's linearized index in the unpadded grid
    def tie(f: int) -> int:
        x, rem = divmod(f, sxy)
        y, z = divmod(rem, pz)
        return ((x - 1) * ny + (y - 1)) * nz + (z - 1)

    moves = [((di * py + dj) * pz + dk, step * res) for di, dj, dk, step in _NEIGHBOR_STEPS]
    start_f, goal_f = flat(start), flat(goal)

    g_cost: dict[int, float] = {start_f: 0.0}
    parent: dict[int, int] = {}
    closed: set[int] = set()
    frontier: list[tuple[float, int, int]] = [(heuristic(start_f), tie(start_f), start_f)]

    while frontier:
        _, _, cell = heapq.heappop(frontier)
        if cell in closed:
            continue
        if cell == goal_f:
            flats = [cell]
            while flats[-1] != start_f:
                flats.append(parent[flats[-1]])
            flats.reverse()
            path = []
            for f in flats:
                x, rem = divmod(f, sxy)
                y, z = divmod(rem, pz)
                path.append((x - 1, y - 1, z - 1))
            return path, g_cost[goal_f]
        closed.add(cell)
        base = g_cost[cell]
        for off, step in moves:
            nxt = cell + off
            if occ[nxt] or nxt in closed:
                continue
            cand = base + step
            if cand < g_cost.get(nxt, math.inf) - 1e-15:
                g_cost[nxt] = cand
                parent[nxt] = cell
                heapq.heappush(frontier, (cand + heuristic(nxt), tie(nxt), nxt))
    return None


def plan_trajectory(grasp: GraspPose, grid: OccupancyGrid, state: RobotState) -> Trajectory:
    """Plan p_ee -> pregrasp -> grasp over the grid.

    Waypoints are free-cell centers; the first and last are snapped to the
    exact end-effector and grasp positions. Infeasibility (an occupied
    endpoint cell or a disconnected grid) yields feasible=False rather than
    an exception; endpoints outside the grid raise ParameterError.
    """
    start = grid.cell_of(state.p_ee)
    mid = grid.cell_of(grasp.pregrasp_point)
    goal = grid.cell_of(grasp.grasp_point)

    leg1 = astar_grid(grid, start, mid)
    if leg1 is None:
        return Trajectory(waypoints=np.zeros((0, 3)), feasible=False)
    leg2 = astar_grid(grid, mid, goal)
    if leg2 is None:
        return Trajectory(waypoints=np.zeros((0, 3)), feasible=False)

    cells = leg1[0] + leg2[0][1:]
    waypoints = np.array([grid.center_of(c) for c in cells])
    waypoints[0] = state.p_ee
    waypoints[-1] = grasp.grasp_point
    return Trajectory(waypoints=waypoints, feasible=True)


@dataclass(frozen=True)
class ExecutionOutcome:
    success: bool
    hits: frozenset[int]


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def simulate_execution(
    trajectory: Trajectory,
    truth: GroundTruth,
    target_id: int,
    state: RobotState,
) -> ExecutionOutcome:
    """Score a trajectory against ground truth.

    Success means the final waypoint lands within 1 cm of the target's true
    center. Hits are the non-target berries whose true surface comes within
    the gripper radius of any swept trajectory segment.
    """
    if not trajectory.feasible or len(trajectory.waypoints) == 0:
        raise ParameterError("execution requires a feasible trajectory")

    true_center = truth.instance(target_id).pose.translation
    success = bool(
        np.linalg.norm(trajectory.waypoints[-1] - true_center) <= 0.01
    )

    hits = set()
    segments = list(zip(trajectory.waypoints[:-1], trajectory.waypoints[1:]))
    if not segments:
        segments = [(trajectory.waypoints[0], trajectory.waypoints[0])]
    for inst in truth.instances:
        if inst.instance_id == target_id:
            continue
        surface = inst.surfaces[2].xyz
        for a, b in segments:
            if _segment_distances(surface, a, b).min() <= state.gripper_radius:
                hits.add(inst.instance_id)
                break
    return ExecutionOutcome(success=success, hits=frozenset(hits))
