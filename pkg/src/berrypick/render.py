"""Synthetic RGB-D rendering and ground-truth sampling.

Rendering casts one ray per pixel against every triangle of every object. For
a triangle fully in front of the camera this reduces to a screen-space
point-in-triangle test on the projected vertices plus a ray-plane
intersection, so the implementation below is exact ray casting, not an
approximate rasterizer. Each object gets its own depth buffer; the composite
keeps the nearest surface per pixel. Instance masks and visibility fractions
come from the composite before sensor noise is applied.

Depth corruption mimics a structured-light sensor: quantize to millimeters,
add Gaussian noise, re-quantize, then drop pixels to zero at a fixed rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError
from .prior import StrawberryPrior
from .scene import SceneTemplate
from .types import (
    CameraIntrinsics,
    DepthImage,
    InstanceMask,
    PointCloud,
    Pose,
    RgbImage,
    Ripeness,
)

RIPE_COLOR = (204, 30, 48)
UNRIPE_COLOR = (120, 186, 66)
LEAF_COLOR = (26, 77, 41)


@dataclass(frozen=True)
class RenderParams:
    noise_sigma_mm: float = 1.0
    dropout_rate: float = 0.02

    def __post_init__(self):
        if self.noise_sigma_mm < 0:
            raise ParameterError("noise sigma must be nonnegative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError("dropout rate must lie in [0, 1)")


@dataclass
class RenderResult:
    rgb: RgbImage
    depth: DepthImage
    clean_depth: DepthImage
    masks: tuple[InstanceMask, ...]
    visibility: dict[int, float]


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _stream(seedseq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seedseq))


def rasterize(
    vertices: np.ndarray,
    faces: np.ndarray,
    k: CameraIntrinsics,
    width: int,
    height: int,
) -> np.ndarray:
    """Depth buffer (meters) for one mesh; np.inf where no surface is hit.

    All faces are processed in one flattened batch: every face contributes its
    screen bounding-box pixels to a single candidate list, candidates failing
    the in-triangle test or behind the camera are masked out, and surviving
    ray-plane depths are scattered into the buffer with a running minimum.
    """
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    if (v[:, 2] <= 1e-6).any():
        raise GeometryError("mesh extends behind the camera")
    depth = np.full((height, width), np.inf)

    z = v[:, 2]
    us = k.fx * v[:, 0] / z + k.cx
    vs = k.fy * v[:, 1] / z + k.cy
    pu = us[f]  # (F, 3) screen coordinates per face corner
    pv = vs[f]

    u0 = np.maximum(np.ceil(pu.min(axis=1)), 0).astype(np.int64)
    u1 = np.minimum(np.floor(pu.max(axis=1)), width - 1).astype(np.int64)
    v0 = np.maximum(np.ceil(pv.min(axis=1)), 0).astype(np.int64)
    v1 = np.minimum(np.floor(pv.max(axis=1)), height - 1).astype(np.int64)
    wbox = u1 - u0 + 1
    hbox = v1 - v0 + 1
    area2 = (pu[:, 1] - pu[:, 0]) * (pv[:, 2] - pv[:, 0]) - (pv[:, 1] - pv[:, 0]) * (
        pu[:, 2] - pu[:, 0]
    )
    keep = (wbox > 0) & (hbox > 0) & (np.abs(area2) > 1e-12)
    if not keep.any():
        return depth

    tri = v[f[keep]]
    pu, pv = pu[keep], pv[keep]
    u0, v0 = u0[keep], v0[keep]
    wbox, hbox = wbox[keep], hbox[keep]
    sign = np.where(area2[keep] > 0, 1.0, -1.0)

    # flatten every face's bbox pixels into one candidate array
    box = wbox * hbox
    rep = np.repeat(np.arange(len(box)), box)
    offset = np.arange(box.sum()) - np.repeat(np.cumsum(box) - box, box)
    gu = u0[rep] + offset % wbox[rep]
    gv = v0[rep] + offset // wbox[rep]

    w0 = (pu[rep, 1] - pu[rep, 0]) * (gv - pv[rep, 0]) - (pv[rep, 1] - pv[rep, 0]) * (
        gu - pu[rep, 0]
    )
    w1 = (pu[rep, 2] - pu[rep, 1]) * (gv - pv[rep, 1]) - (pv[rep, 2] - pv[rep, 1]) * (
        gu - pu[rep, 1]
    )
    w2 = (pu[rep, 0] - pu[rep, 2]) * (gv - pv[rep, 2]) - (pv[rep, 0] - pv[rep, 2]) * (
        gu - pu[rep, 2]
    )
    s = sign[rep]
    inside = (s * w0 >= 0) & (s * w1 >= 0) & (s * w2 >= 0)
    if not inside.any():
        return depth

    rep = rep[inside]
    gu, gv = gu[inside], gv[inside]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    n = np.cross(e1, e2)
    n_rep = n[rep]
    # pixel ray (du, dv, 1): the intersection parameter equals z-depth
    denom = (
        n_rep[:, 0] * (gu - k.cx) / k.fx + n_rep[:, 1] * (gv - k.cy) / k.fy + n_rep[:, 2]
    )
    plane = np.einsum("ij,ij->i", n, tri[:, 0])[rep]
    safe = np.abs(denom) > 1e-15
    t = np.where(safe, plane / np.where(safe, denom, 1.0), np.inf)
    hit = safe & (t > 1e-6)
    if not hit.any():
        return depth
    np.minimum.at(depth, (gv[hit], gu[hit]), t[hit])
    return depth


def render_rgbd(
    scene: SceneTemplate,
    prior: StrawberryPrior,
    params: RenderParams = RenderParams(),
    seed: int | np.random.SeedSequence = 0,
) -> RenderResult:
    """Render the scene to RGB, noisy depth, per-berry masks and visibility."""
    h, w = scene.height, scene.width
    k = scene.intrinsics

    meshes: list[tuple[np.ndarray, np.ndarray, tuple[int, int, int]]] = []
    for berry in scene.berries:
        color = RIPE_COLOR if berry.ripeness is Ripeness.RIPE else UNRIPE_COLOR
        meshes.append((berry.pose.apply(prior.vertices), prior.faces, color))
    for occ in scene.occluders:
        ov, of = occ.mesh()
        meshes.append((ov, of, LEAF_COLOR))

    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    clean_mm = np.zeros((h, w), dtype=np.uint16)
    masks = []
    visibility: dict[int, float] = {}

    if meshes:
        buffers = np.stack([rasterize(mv, mf, k, w, h) for mv, mf, _ in meshes])
        nearest = buffers.min(axis=0)
        winner = buffers.argmin(axis=0)  # ties resolve to the lower index
        valid = np.isfinite(nearest)

        for i, (_, _, color) in enumerate(meshes):
            rgb[valid & (winner == i)] = color
        for i, berry in enumerate(scene.berries):
            bits = valid & (winner == i)
            masks.append(
                InstanceMask(bits=bits, instance_id=berry.instance_id, ripeness=berry.ripeness)
            )
            solo = int(np.isfinite(buffers[i]).sum())
            visibility[berry.instance_id] = float(bits.sum()) / solo if solo else 0.0

        mm = np.rint(nearest[valid] * 1000.0)
        clean_mm[valid] = np.clip(mm, 0, 65535).astype(np.uint16)
    else:
        for berry in scene.berries:
            masks.append(
                InstanceMask(
                    bits=np.zeros((h, w), dtype=bool),
                    instance_id=berry.instance_id,
                    ripeness=berry.ripeness,
                )
            )
            visibility[berry.instance_id] = 0.0

    noise_ss, drop_ss = _as_seedseq(seed).spawn(2)
    noisy = clean_mm.astype(np.float64)
    live = clean_mm > 0
    if params.noise_sigma_mm > 0:
        jitter = _stream(noise_ss).normal(0.0, params.noise_sigma_mm, size=(h, w))
        noisy[live] += jitter[live]
    noisy = np.clip(np.rint(noisy), 0, 65535).astype(np.uint16)
    if params.dropout_rate > 0:
        dropped = _stream(drop_ss).random((h, w)) < params.dropout_rate
        noisy[dropped & live] = 0

    return RenderResult(
        rgb=RgbImage(values=rgb),
        depth=DepthImage(values=noisy),
        clean_depth=DepthImage(values=clean_mm),
        masks=tuple(masks),
        visibility=visibility,
    )


@dataclass(frozen=True)
class GroundTruthInstance:
    """True pose and surface samplings for one berry, ascending density."""

    instance_id: int
    ripeness: Ripeness
    pose: Pose
    surfaces: tuple[PointCloud, PointCloud, PointCloud]

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "ripeness": self.ripeness.value,
            "rotation": self.pose.rotation.tolist(),
            "translation": self.pose.translation.tolist(),
            "surfaces": [s.xyz.tolist() for s in self.surfaces],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruthInstance":
        return cls(
            instance_id=int(obj["instance_id"]),
            ripeness=Ripeness(obj["ripeness"]),
            pose=Pose(
                rotation=np.asarray(obj["rotation"], dtype=np.float64),
                translation=np.asarray(obj["translation"], dtype=np.float64),
            ),
            surfaces=tuple(
                PointCloud(xyz=np.asarray(s, dtype=np.float64)) for s in obj["surfaces"]
            ),
        )


@dataclass(frozen=True)
class GroundTruth:
    instances: tuple[GroundTruthInstance, ...]

    def instance(self, instance_id: int) -> GroundTruthInstance:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        raise KeyError(instance_id)

    def to_json(self) -> dict:
        return {"instances": [inst.to_json() for inst in self.instances]}

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruth":
        return cls(
            instances=tuple(GroundTruthInstance.from_json(o) for o in obj["instances"])
        )


def sample_ground_truth(
    scene: SceneTemplate,
    prior: StrawberryPrior,
    seed: int | np.random.SeedSequence = 0,
) -> GroundTruth:
    """Independent per-berry surface samplings at the prior's densities."""
    ss = _as_seedseq(seed)
    children = ss.spawn(len(scene.berries)) if scene.berries else []
    instances = []
    for berry, child in zip(scene.berries, children):
        surfaces = prior.sample_ground_truth(berry.pose, _stream(child))
        instances.append(
            GroundTruthInstance(
                instance_id=berry.instance_id,
                ripeness=berry.ripeness,
                pose=berry.pose,
                surfaces=surfaces,
            )
        )
    return GroundTruth(instances=tuple(instances))
