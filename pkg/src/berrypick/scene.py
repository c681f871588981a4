"""Synthetic tabletop scene model and randomized generation.

A scene is a set of posed berry instances (ripe or unripe) hanging roughly
stem-up in front of the camera, plus optional leaf occluders placed on the
camera-to-berry sight lines so they actually block parts of the fruit. All
geometry is in the camera frame, meters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SceneGenerationError
from .prior import StrawberryPrior
from .types import CameraIntrinsics, Pose, Ripeness, rotation_about_axis, rotation_aligning

# Sampling volume in front of the camera. At the default intrinsics this spans
# most of the image while keeping every berry inside the frustum.
WORKSPACE_LO = np.array([-0.09, -0.06, 0.30])
WORKSPACE_HI = np.array([0.09, 0.06, 0.42])

_MAX_PLACEMENT_TRIES = 200


@dataclass(frozen=True)
class BerryInstance:
    """One berry: the shared prior under a rigid pose, with a ripeness label."""

    instance_id: int
    pose: Pose
    ripeness: Ripeness

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "rotation": self.pose.rotation.tolist(),
            "translation": self.pose.translation.tolist(),
            "ripeness": self.ripeness.value,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BerryInstance":
        return cls(
            instance_id=int(obj["instance_id"]),
            pose=Pose(
                rotation=np.asarray(obj["rotation"], dtype=np.float64),
                translation=np.asarray(obj["translation"], dtype=np.float64),
            ),
            ripeness=Ripeness(obj["ripeness"]),
        )


@dataclass(frozen=True)
class Occluder:
    """Planar elliptical leaf: center, unit normal, in-plane semi-axes."""

    center: np.ndarray
    normal: np.ndarray
    semi_major: float
    semi_minor: float
    roll_rad: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise ParameterError("occluder normal must be nonzero")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "normal", n / norm)
        if self.semi_major <= 0 or self.semi_minor <= 0:
            raise ParameterError("occluder semi-axes must be positive")

    def mesh(self, segments: int = 24) -> tuple[np.ndarray, np.ndarray]:
        """Triangle fan tessellating the ellipse, in the camera frame."""
        basis = rotation_aligning(np.array([0.0, 0.0, 1.0]), self.normal)
        roll = rotation_about_axis(np.array([0.0, 0.0, 1.0]), self.roll_rad)
        frame = basis @ roll
        theta = 2 * np.pi * np.arange(segments) / segments
        rim_local = np.stack(
            [
                self.semi_major * np.cos(theta),
                self.semi_minor * np.sin(theta),
                np.zeros(segments),
            ],
            axis=1,
        )
        vertices = np.concatenate([[np.zeros(3)], rim_local], axis=0) @ frame.T + self.center
        faces = np.array(
            [[0, 1 + j, 1 + (j + 1) % segments] for j in range(segments)], dtype=np.int32
        )
        return vertices, faces

    def to_json(self) -> dict:
        return {
            "center": self.center.tolist(),
            "normal": self.normal.tolist(),
            "semi_major": self.semi_major,
            "semi_minor": self.semi_minor,
            "roll_rad": self.roll_rad,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Occluder":
        return cls(
            center=np.asarray(obj["center"], dtype=np.float64),
            normal=np.asarray(obj["normal"], dtype=np.float64),
            semi_major=float(obj["semi_major"]),
            semi_minor=float(obj["semi_minor"]),
            roll_rad=float(obj["roll_rad"]),
        )


@dataclass(frozen=True)
class SceneConfig:
    """Knobs for randomized scene generation."""

    n_ripe: int = 2
    n_unripe: int = 2
    n_occluders: int = 2
    clutter_spacing: float = 0.01
    max_tilt_rad: float = 0.44
    occluder_fraction_range: tuple[float, float] = (0.55, 0.8)
    occluder_lateral_sigma: float = 0.010
    occluder_semi_axis_range: tuple[float, float] = (0.012, 0.030)
    workspace_lo: tuple[float, float, float] = tuple(WORKSPACE_LO)
    workspace_hi: tuple[float, float, float] = tuple(WORKSPACE_HI)

    def __post_init__(self):
        if self.n_ripe < 0 or self.n_unripe < 0 or self.n_occluders < 0:
            raise ParameterError("object counts must be nonnegative")
        if self.clutter_spacing < 0:
            raise ParameterError("clutter_spacing must be nonnegative")
        lo, hi = self.occluder_fraction_range
        if not (0.0 < lo <= hi < 1.0):
            raise ParameterError("occluder fractions must lie strictly inside (0, 1)")
        object.__setattr__(self, "workspace_lo", tuple(float(v) for v in self.workspace_lo))
        object.__setattr__(self, "workspace_hi", tuple(float(v) for v in self.workspace_hi))
        if any(a >= b for a, b in zip(self.workspace_lo, self.workspace_hi)):
            raise ParameterError("workspace_lo must be strictly below workspace_hi")
        if self.workspace_lo[2] <= 0:
            raise ParameterError("workspace must sit in front of the camera")

    def to_json(self) -> dict:
        return {
            "n_ripe": self.n_ripe,
            "n_unripe": self.n_unripe,
            "n_occluders": self.n_occluders,
            "clutter_spacing": self.clutter_spacing,
            "max_tilt_rad": self.max_tilt_rad,
            "occluder_fraction_range": list(self.occluder_fraction_range),
            "occluder_lateral_sigma": self.occluder_lateral_sigma,
            "occluder_semi_axis_range": list(self.occluder_semi_axis_range),
            "workspace_lo": list(self.workspace_lo),
            "workspace_hi": list(self.workspace_hi),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SceneConfig":
        kwargs = dict(obj)
        for key in (
            "occluder_fraction_range",
            "occluder_semi_axis_range",
            "workspace_lo",
            "workspace_hi",
        ):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class SceneTemplate:
    """A fully specified scene: berries, occluders, camera."""

    berries: tuple[BerryInstance, ...]
    occluders: tuple[Occluder, ...] = ()
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    width: int = 640
    height: int = 480

    def __post_init__(self):
        ids = [b.instance_id for b in self.berries]
        if len(set(ids)) != len(ids):
            raise ParameterError("duplicate berry instance ids")
        self.intrinsics.validate_for(self.width, self.height)

    @property
    def ripe_ids(self) -> tuple[int, ...]:
        return tuple(b.instance_id for b in self.berries if b.ripeness is Ripeness.RIPE)

    def berry(self, instance_id: int) -> BerryInstance:
        for b in self.berries:
            if b.instance_id == instance_id:
                return b
        raise KeyError(instance_id)

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "intrinsics": {
                "fx": self.intrinsics.fx,
                "fy": self.intrinsics.fy,
                "cx": self.intrinsics.cx,
                "cy": self.intrinsics.cy,
            },
            "berries": [b.to_json() for b in self.berries],
            "occluders": [o.to_json() for o in self.occluders],
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, obj: dict) -> "SceneTemplate":
        k = obj["intrinsics"]
        return cls(
            berries=tuple(BerryInstance.from_json(b) for b in obj["berries"]),
            occluders=tuple(Occluder.from_json(o) for o in obj.get("occluders", ())),
            intrinsics=CameraIntrinsics(fx=k["fx"], fy=k["fy"], cx=k["cx"], cy=k["cy"]),
            width=int(obj["width"]),
            height=int(obj["height"]),
        )


def _hanging_pose(rng: np.random.Generator, center: np.ndarray, max_tilt_rad: float) -> Pose:
    # Berries hang tip-down: the canonical +z (stem-to-tip) axis points near -y
    # (camera up is -y), with a bounded random tilt and a free spin about the axis.
    tilt = rng.uniform(0.0, max_tilt_rad)
    azimuth = rng.uniform(0.0, 2 * np.pi)
    axis = np.array(
        [
            np.sin(tilt) * np.cos(azimuth),
            -np.cos(tilt),
            np.sin(tilt) * np.sin(azimuth),
        ]
    )
    align = rotation_aligning(np.array([0.0, 0.0, 1.0]), axis)
    spin = rotation_about_axis(np.array([0.0, 0.0, 1.0]), rng.uniform(0.0, 2 * np.pi))
    return Pose(rotation=align @ spin, translation=center)


def generate_scene(
    config: SceneConfig,
    prior: StrawberryPrior,
    rng: np.random.Generator,
    intrinsics: CameraIntrinsics | None = None,
    width: int = 640,
    height: int = 480,
) -> SceneTemplate:
    """Rejection-sample berry centers with a minimum mutual distance, then hang
    leaves on the sight lines of randomly chosen berries.

    Raises SceneGenerationError when the workspace cannot fit the requested
    clutter within the retry budget.
    """
    intrinsics = intrinsics or CameraIntrinsics()
    min_dist = 2 * prior.bounding_radius_m + config.clutter_spacing
    ws_lo = np.asarray(config.workspace_lo, dtype=float)
    ws_hi = np.asarray(config.workspace_hi, dtype=float)

    centers: list[np.ndarray] = []
    n_total = config.n_ripe + config.n_unripe
    for _ in range(n_total):
        for _attempt in range(_MAX_PLACEMENT_TRIES):
            cand = rng.uniform(ws_lo, ws_hi)
            if all(np.linalg.norm(cand - c) >= min_dist for c in centers):
                centers.append(cand)
                break
        else:
            raise SceneGenerationError(
                f"could not place berry {len(centers)} of {n_total} "
                f"with spacing {min_dist:.3f} m"
            )

    ripeness = [Ripeness.RIPE] * config.n_ripe + [Ripeness.UNRIPE] * config.n_unripe
    order = rng.permutation(n_total)
    berries = tuple(
        BerryInstance(
            instance_id=i,
            pose=_hanging_pose(rng, centers[i], config.max_tilt_rad),
            ripeness=ripeness[order[i]],
        )
        for i in range(n_total)
    )

    occluders = []
    if config.n_occluders > 0 and n_total == 0:
        raise SceneGenerationError("occluders need at least one berry to occlude")
    for _ in range(config.n_occluders):
        target = berries[rng.integers(n_total)]
        frac = rng.uniform(*config.occluder_fraction_range)
        center = frac * target.pose.translation
        lateral = rng.normal(0.0, config.occluder_lateral_sigma, size=3)
        lateral[2] = 0.0  # jitter across the sight line, not along it
        center = center + lateral
        sight = target.pose.translation / np.linalg.norm(target.pose.translation)
        lo, hi = config.occluder_semi_axis_range
        axes = np.sort(rng.uniform(lo, hi, size=2))
        occluders.append(
            Occluder(
                center=center,
                normal=sight,
                semi_major=float(axes[1]),
                semi_minor=float(axes[0]),
                roll_rad=float(rng.uniform(0.0, 2 * np.pi)),
            )
        )

    return SceneTemplate(
        berries=berries,
        occluders=tuple(occluders),
        intrinsics=intrinsics,
        width=width,
        height=height,
    )
