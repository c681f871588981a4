"""End-to-end perception-to-grasp pipeline and benchmark harness.

One trial runs: oracle detections -> depth filtering and back-projection ->
per-instance extraction, downsampling, outlier removal -> completion of every
instance -> ripe target selection -> obstacle union -> occupancy grid ->
grasp estimation -> A* planning -> simulated execution against ground truth.
Each stage's failure maps to a recorded reason; a trial never raises for an
algorithmic failure, so batches always run to completion.

Two ablation switches mirror the evaluation design: use_completion=False
feeds the denoised partial clouds straight to planning, and
use_obstacles=False plans through an empty occupancy map.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .chamfer import chamfer_metric_mm
from .completion import IcpParams, complete_cloud
from .errors import (
    ContractError,
    GeometryError,
    InputError,
    InsufficientDataError,
    NoRipeTargetError,
    ParameterError,
    RegistrationError,
    SceneGenerationError,
)
from .occupancy import ObstacleSet, build_obstacles, build_occupancy
from .planning import (
    Candidate,
    RobotState,
    estimate_grasp,
    plan_trajectory,
    select_target,
    simulate_execution,
)
from .preprocess import (
    extract_masked,
    median_filter,
    project_point_cloud,
    remove_outliers,
    voxel_downsample,
)
from .prior import StrawberryPrior
from .render import GroundTruth, RenderParams, render_rgbd, sample_ground_truth
from .scene import SceneConfig, SceneTemplate, generate_scene
from .types import (
    DepthImage,
    InstanceMask,
    LossWeights,
    OutlierParams,
    PointCloud,
    RgbImage,
    Ripeness,
    VoxelParams,
)


class FailureReason(str, enum.Enum):
    NO_RIPE = "no_ripe"
    REGISTRATION_FAILURE = "registration_failure"
    INFEASIBLE_PATH = "infeasible_path"
    MISSED_GRASP = "missed_grasp"


def _strict_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise InputError(f"unknown {where} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class PipelineConfig:
    voxel: VoxelParams = field(default_factory=VoxelParams)
    outliers: OutlierParams = field(default_factory=OutlierParams)
    weights: LossWeights = field(default_factory=LossWeights)
    icp: IcpParams = field(default_factory=IcpParams)
    grid_resolution: float = 0.005
    inflation: float = 0.015
    gripper_radius: float = 0.015
    use_completion: bool = True
    use_obstacles: bool = True
    rng_seed: int = 0
    p_ee: tuple[float, float, float] = (0.0, 0.0, 0.05)

    def __post_init__(self):
        if self.grid_resolution <= 0:
            raise ParameterError("grid_resolution must be positive")
        if self.inflation < 0:
            raise ParameterError("inflation must be nonnegative")
        if self.gripper_radius <= 0:
            raise ParameterError("gripper_radius must be positive")
        object.__setattr__(self, "p_ee", tuple(float(v) for v in self.p_ee))
        if len(self.p_ee) != 3:
            raise ParameterError("p_ee must be a 3-vector")

    def robot_state(self) -> RobotState:
        return RobotState(p_ee=np.array(self.p_ee), gripper_radius=self.gripper_radius)

    def to_json(self) -> dict:
        return {
            "voxel": {"voxel_size": self.voxel.voxel_size, "min_points": self.voxel.min_points},
            "outliers": {
                "k_neighbors": self.outliers.k_neighbors,
                "std_ratio": self.outliers.std_ratio,
            },
            "weights": {
                "lambda0": self.weights.lambda0,
                "lambda1": self.weights.lambda1,
                "lambda2": self.weights.lambda2,
            },
            "icp": {
                "max_iterations": self.icp.max_iterations,
                "convergence_tol": self.icp.convergence_tol,
                "max_correspondence_dist": self.icp.max_correspondence_dist,
                "restart_count": self.icp.restart_count,
            },
            "grid_resolution": self.grid_resolution,
            "inflation": self.inflation,
            "gripper_radius": self.gripper_radius,
            "use_completion": self.use_completion,
            "use_obstacles": self.use_obstacles,
            "rng_seed": self.rng_seed,
            "p_ee": list(self.p_ee),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        """Strict parse: unknown keys anywhere in the document are rejected."""
        if not isinstance(obj, dict):
            raise InputError("config must be a JSON object")
        _strict_keys(obj, set(cls().to_json()), "config")
        kwargs: dict = {}
        try:
            if "voxel" in obj:
                _strict_keys(obj["voxel"], {"voxel_size", "min_points"}, "voxel")
                kwargs["voxel"] = VoxelParams(**obj["voxel"])
            if "outliers" in obj:
                _strict_keys(obj["outliers"], {"k_neighbors", "std_ratio"}, "outliers")
                kwargs["outliers"] = OutlierParams(**obj["outliers"])
            if "weights" in obj:
                _strict_keys(obj["weights"], {"lambda0", "lambda1", "lambda2"}, "weights")
                kwargs["weights"] = LossWeights(**obj["weights"])
            if "icp" in obj:
                _strict_keys(
                    obj["icp"],
                    {"max_iterations", "convergence_tol", "max_correspondence_dist", "restart_count"},
                    "icp",
                )
                kwargs["icp"] = IcpParams(**obj["icp"])
            for key in (
                "grid_resolution",
                "inflation",
                "gripper_radius",
                "use_completion",
                "use_obstacles",
                "rng_seed",
                "p_ee",
            ):
                if key in obj:
                    kwargs[key] = obj[key]
            return cls(**kwargs)
        except ParameterError as exc:
            raise InputError(f"invalid config value: {exc}") from exc


@dataclass(frozen=True)
class SceneArtifacts:
    """Everything a trial consumes: sensor images, oracle masks, ground truth."""

    scene: SceneTemplate
    rgb: RgbImage
    depth: DepthImage
    masks: tuple[InstanceMask, ...]
    truth: GroundTruth

    def __post_init__(self):
        missing = [
            name
            for name, value in (
                ("scene", self.scene),
                ("rgb", self.rgb),
                ("depth", self.depth),
                ("masks", self.masks),
                ("truth", self.truth),
            )
            if value is None
        ]
        if missing:
            raise InputError(f"scene artifacts missing: {missing}")


@dataclass(frozen=True)
class TrialResult:
    scene_id: int
    detections: int
    attempted: bool
    success: bool
    hit_ids: frozenset[int]
    cd_mm: tuple[float, ...]
    failure_reason: FailureReason | None

    def __post_init__(self):
        if self.success and not self.attempted:
            raise ParameterError("a successful trial must have been attempted")

    @property
    def cd_mm_mean(self) -> float | None:
        return float(np.mean(self.cd_mm)) if self.cd_mm else None


def render_scene_artifacts(
    scene: SceneTemplate,
    prior: StrawberryPrior,
    render_params: RenderParams = RenderParams(),
    render_seed=0,
    truth_seed=1,
) -> SceneArtifacts:
    rendered = render_rgbd(scene, prior, render_params, render_seed)
    truth = sample_ground_truth(scene, prior, truth_seed)
    return SceneArtifacts(
        scene=scene, rgb=rendered.rgb, depth=rendered.depth, masks=rendered.masks, truth=truth
    )


@dataclass(frozen=True)
class Perception:
    """What the perception half of a trial produced."""

    detections: int
    ripe_detected: bool
    candidates: tuple[Candidate, ...]
    leftovers: tuple[Candidate, ...]  # uncompleted clouds; still block space
    cd_mm: tuple[float, ...]


def perceive(
    artifacts: SceneArtifacts,
    cfg: PipelineConfig,
    prior: StrawberryPrior,
) -> Perception:
    """Detections through completion: produce one planning cloud per berry."""
    detections = [m for m in artifacts.masks if m.pixel_count() > 0]
    ripe_detected = any(m.ripeness is Ripeness.RIPE for m in detections)
    if not ripe_detected:
        return Perception(len(detections), False, (), (), ())

    filtered = median_filter(artifacts.depth)
    full = project_point_cloud(artifacts.rgb, filtered, artifacts.scene.intrinsics)

    partials: list[tuple[InstanceMask, PointCloud]] = []
    for mask in detections:
        cloud = extract_masked(full, mask)
        cloud = voxel_downsample(cloud, cfg.voxel)
        cloud = remove_outliers(cloud, cfg.outliers)
        if len(cloud):
            partials.append((mask, cloud))

    candidates: list[Candidate] = []
    leftovers: list[Candidate] = []
    cds: list[float] = []
    if cfg.use_completion:
        for mask, cloud in partials:
            try:
                completed = complete_cloud(cloud, prior, cfg.icp)
            except (InsufficientDataError, RegistrationError):
                leftovers.append(Candidate(mask.instance_id, mask.ripeness, cloud))
                continue
            candidates.append(Candidate(mask.instance_id, mask.ripeness, completed.p2))
            truth_s2 = artifacts.truth.instance(mask.instance_id).surfaces[2]
            cds.append(chamfer_metric_mm(completed.p2, truth_s2))
    else:
        candidates = [Candidate(m.instance_id, m.ripeness, c) for m, c in partials]

    return Perception(
        detections=len(detections),
        ripe_detected=True,
        candidates=tuple(candidates),
        leftovers=tuple(leftovers),
        cd_mm=tuple(cds),
    )


def _finish_trial(
    artifacts: SceneArtifacts,
    perception: Perception,
    cfg: PipelineConfig,
    prior: StrawberryPrior,
    scene_id: int,
) -> TrialResult:
    """Selection through execution, given a finished perception stage."""
    state = cfg.robot_state()
    n_det = perception.detections

    def failed(reason: FailureReason) -> TrialResult:
        return TrialResult(
            scene_id=scene_id,
            detections=n_det,
            attempted=False,
            success=False,
            hit_ids=frozenset(),
            cd_mm=perception.cd_mm,
            failure_reason=reason,
        )

    if not perception.ripe_detected:
        return failed(FailureReason.NO_RIPE)
    try:
        target_id = select_target(perception.candidates, state.p_ee)
    except NoRipeTargetError:
        # ripe berries were detected but none survived to a plannable cloud
        return failed(FailureReason.REGISTRATION_FAILURE)

    try:
        grasp, grid, trajectory = _plan_from_perception(
            perception, target_id, cfg, state, prior
        )
    except GeometryError:
        return failed(FailureReason.INFEASIBLE_PATH)
    if not trajectory.feasible:
        return failed(FailureReason.INFEASIBLE_PATH)

    for waypoint in trajectory.waypoints[1:-1]:  # independent post-hoc check
        if grid.is_occupied(grid.cell_of(waypoint)):
            raise ContractError("planned trajectory crosses an occupied cell")

    outcome = simulate_execution(trajectory, artifacts.truth, target_id, state)
    return TrialResult(
        scene_id=scene_id,
        detections=n_det,
        attempted=True,
        success=outcome.success,
        hit_ids=outcome.hits,
        cd_mm=perception.cd_mm,
        failure_reason=None if outcome.success else FailureReason.MISSED_GRASP,
    )


def run_pipeline(
    artifacts: SceneArtifacts,
    cfg: PipelineConfig = PipelineConfig(),
    prior: StrawberryPrior | None = None,
    scene_id: int = 0,
) -> TrialResult:
    """Run one trial; every algorithmic failure becomes a TrialResult."""
    prior = prior or StrawberryPrior.builtin()
    perception = perceive(artifacts, cfg, prior)
    return _finish_trial(artifacts, perception, cfg, prior, scene_id)


def _plan_from_perception(perception, target_id, cfg, state, prior):
    target = next(c for c in perception.candidates if c.instance_id == target_id)
    grasp = estimate_grasp(target.cloud, state, prior.width_m)
    if cfg.use_obstacles:
        obstacles = build_obstacles(
            list(perception.candidates) + list(perception.leftovers), target_id
        )
    else:
        obstacles = ObstacleSet(points=PointCloud.empty(), excluded_id=target_id)
    grid = build_occupancy(
        obstacles,
        resolution=cfg.grid_resolution,
        inflation=cfg.inflation,
        include_points=[state.p_ee, grasp.grasp_point, grasp.pregrasp_point],
    )
    return grasp, grid, plan_trajectory(grasp, grid, state)


def plan_scene(
    artifacts: SceneArtifacts,
    cfg: PipelineConfig = PipelineConfig(),
    prior: StrawberryPrior | None = None,
) -> dict:
    """Perception plus planning for one scene, reported as a plain dict
    (target, grasp pose, waypoints, feasibility, grid load).

    Raises NoRipeTargetError when no ripe berry is detected or completable;
    an infeasible path is not an error, just feasible=false in the result.
    """
    prior = prior or StrawberryPrior.builtin()
    state = cfg.robot_state()
    perception = perceive(artifacts, cfg, prior)
    if not perception.ripe_detected:
        raise NoRipeTargetError("no ripe berry detected in the scene")
    target_id = select_target(perception.candidates, state.p_ee)
    grasp, grid, trajectory = _plan_from_perception(perception, target_id, cfg, state, prior)
    return {
        "target_id": target_id,
        "grasp": {
            "grasp_point": grasp.grasp_point.tolist(),
            "approach_dir": grasp.approach_dir.tolist(),
            "pregrasp_offset": grasp.pregrasp_offset,
        },
        "feasible": trajectory.feasible,
        "waypoints": trajectory.waypoints.tolist(),
        "occupied_cells": grid.occupied_count,
        "detections": perception.detections,
        "cd_mm": list(perception.cd_mm),
    }


def run_benchmark(
    template: SceneConfig,
    n_scenes: int,
    cfg: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    render_params: RenderParams = RenderParams(),
    prior: StrawberryPrior | None = None,
) -> list[TrialResult]:
    """n_scenes seeded trials; (template, cfg, seed) determines every result.

    Scene generation, rendering noise and ground-truth sampling each draw
    from independent child streams of one root seed, so toggling pipeline
    flags replays the exact same scenes.
    """
    if n_scenes < 1:
        raise ParameterError("n_scenes must be at least 1")
    prior = prior or StrawberryPrior.builtin()
    results = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_scenes)):
        gen_ss, render_ss, truth_ss = child.spawn(3)
        scene = generate_scene(
            template, prior, np.random.Generator(np.random.Philox(gen_ss))
        )
        artifacts = render_scene_artifacts(scene, prior, render_params, render_ss, truth_ss)
        results.append(run_pipeline(artifacts, cfg, prior, scene_id=i))
    return results


def run_ablation(
    template: SceneConfig,
    n_scenes: int,
    cfg: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    render_params: RenderParams = RenderParams(),
    prior: StrawberryPrior | None = None,
) -> dict[str, list[TrialResult]]:
    """The three pipeline variants over identical scenes: full, obstacles
    disabled, completion disabled.

    Equivalent to three run_benchmark calls with the same seed (the scene
    stream only depends on template and seed), but each scene is rendered
    once and each perception mode computed once, then reused across variants.
    """
    prior = prior or StrawberryPrior.builtin()
    variants = {
        "full": replace(cfg, use_completion=True, use_obstacles=True),
        "no_obstacles": replace(cfg, use_completion=True, use_obstacles=False),
        "no_completion": replace(cfg, use_completion=False, use_obstacles=True),
    }
    results: dict[str, list[TrialResult]] = {name: [] for name in variants}
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_scenes)):
        gen_ss, render_ss, truth_ss = child.spawn(3)
        scene = generate_scene(
            template, prior, np.random.Generator(np.random.Philox(gen_ss))
        )
        artifacts = render_scene_artifacts(scene, prior, render_params, render_ss, truth_ss)
        perceptions = {
            True: perceive(artifacts, replace(cfg, use_completion=True), prior),
            False: perceive(artifacts, replace(cfg, use_completion=False), prior),
        }
        for name, variant in variants.items():
            results[name].append(
                _finish_trial(
                    artifacts, perceptions[variant.use_completion], variant, prior, i
                )
            )
    return results


def run_completion_benchmark(
    template: SceneConfig,
    n_berries: int,
    cfg: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    render_params: RenderParams = RenderParams(),
    min_visibility: float = 0.4,
    prior: StrawberryPrior | None = None,
) -> list[float]:
    """Completion accuracy in isolation: chamfer_metric_mm(p2, true S2) for
    n_berries berries drawn from freshly generated scenes.

    Only berries whose rendered visibility reaches min_visibility count.
    A completion failure on an eligible berry contributes inf rather than
    being skipped, so systematic registration problems surface in the mean
    instead of silently shrinking the sample.
    """
    if n_berries < 1:
        raise ParameterError("n_berries must be at least 1")
    prior = prior or StrawberryPrior.builtin()
    root = np.random.SeedSequence(seed)
    cds: list[float] = []
    for _ in range(20 * n_berries):  # generous budget for visibility rejections
        if len(cds) >= n_berries:
            break
        gen_ss, render_ss, truth_ss = root.spawn(1)[0].spawn(3)
        scene = generate_scene(
            template, prior, np.random.Generator(np.random.Philox(gen_ss))
        )
        rendered = render_rgbd(scene, prior, render_params, render_ss)
        truth = sample_ground_truth(scene, prior, truth_ss)
        filtered = median_filter(rendered.depth)
        full = project_point_cloud(rendered.rgb, filtered, scene.intrinsics)
        for mask in rendered.masks:
            if len(cds) >= n_berries:
                break
            if rendered.visibility.get(mask.instance_id, 0.0) < min_visibility:
                continue
            cloud = extract_masked(full, mask)
            cloud = voxel_downsample(cloud, cfg.voxel)
            cloud = remove_outliers(cloud, cfg.outliers)
            try:
                completed = complete_cloud(cloud, prior, cfg.icp)
            except (InsufficientDataError, RegistrationError):
                cds.append(float("inf"))
                continue
            truth_s2 = truth.instance(mask.instance_id).surfaces[2]
            cds.append(chamfer_metric_mm(completed.p2, truth_s2))
    if len(cds) < n_berries:
        raise SceneGenerationError(
            f"only {len(cds)} of {n_berries} berries met the "
            f"{min_visibility:.0%} visibility floor within the scene budget"
        )
    return cds
