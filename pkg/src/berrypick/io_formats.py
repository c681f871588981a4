"""File formats: ASCII PLY clouds, PGM/PPM images, JSON scene documents.

Coordinates are written with repr(), which emits the shortest decimal string
that round-trips to the same float64, so save/load is exact. Depth images are
16-bit big-endian PGM with millimeter values; masks are 8-bit PGM (nonzero =
member) with a JSON sidecar carrying identity and ripeness.

Read-side problems (missing or malformed files) raise InputError; write-side
failures raise StorageError. The CLI maps these to exit codes 1 and 2.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import InputError, StorageError
from .pipeline import SceneArtifacts
from .render import GroundTruth
from .scene import SceneTemplate
from .types import DepthImage, InstanceMask, PointCloud, RgbImage, Ripeness


def _wrap_write(path: str, fn):
    try:
        return fn()
    except OSError as exc:
        raise StorageError(f"failed writing {path}: {exc}") from exc


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


# -- PLY ----------------------------------------------------------------------


def write_ply(path: str, cloud: PointCloud) -> None:
    has_color = cloud.colors is not None
    lines = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}"]
    lines += [f"property double {axis}" for axis in "xyz"]
    if has_color:
        lines += [f"property uchar {c}" for c in ("red", "green", "blue")]
    lines.append("end_header")
    for i in range(len(cloud)):
        x, y, z = (float(v) for v in cloud.xyz[i])
        row = f"{x!r} {y!r} {z!r}"
        if has_color:
            r, g, b = (int(v) for v in cloud.colors[i])
            row += f" {r} {g} {b}"
        lines.append(row)

    def do():
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")

    _wrap_write(path, do)


def read_ply(path: str) -> PointCloud:
    text = _read_bytes(path).decode("ascii", errors="replace")
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise InputError(f"{path}: not a PLY file")
    n_vertex = None
    properties: list[str] = []
    body_at = None
    for i, line in enumerate(lines[1:], start=1):
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1] != "ascii":
                raise InputError(f"{path}: only ascii PLY is supported")
        elif tokens[0] == "element":
            if tokens[1] != "vertex":
                raise InputError(f"{path}: unsupported element {tokens[1]}")
            n_vertex = int(tokens[2])
        elif tokens[0] == "property":
            properties.append(tokens[2])
        elif tokens[0] == "end_header":
            body_at = i + 1
            break
    if n_vertex is None or body_at is None:
        raise InputError(f"{path}: malformed PLY header")
    if properties[:3] != ["x", "y", "z"]:
        raise InputError(f"{path}: expected x y z properties, got {properties}")
    has_color = properties[3:6] == ["red", "green", "blue"]

    rows = [line.split() for line in lines[body_at : body_at + n_vertex]]
    if len(rows) != n_vertex:
        raise InputError(f"{path}: expected {n_vertex} vertices, found {len(rows)}")
    if n_vertex == 0:
        return PointCloud.empty()
    try:
        xyz = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows])
        colors = None
        if has_color:
            colors = np.array(
                [[int(r[3]), int(r[4]), int(r[5])] for r in rows], dtype=np.uint8
            )
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed vertex row: {exc}") from exc
    return PointCloud(xyz=xyz, colors=colors)


# -- PGM / PPM ----------------------------------------------------------------


def _parse_netpbm_header(data: bytes, magic: bytes, path: str) -> tuple[int, int, int, int]:
    """Returns (width, height, maxval, data offset)."""
    if not data.startswith(magic):
        raise InputError(f"{path}: expected {magic.decode()} file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    return fields[0], fields[1], fields[2], pos


def write_pgm16(path: str, depth: DepthImage) -> None:
    header = f"P5\n{depth.width} {depth.height}\n65535\n".encode("ascii")
    payload = depth.values.astype(">u2").tobytes()

    def do():
        with open(path, "wb") as fh:
            fh.write(header + payload)

    _wrap_write(path, do)


def read_pgm16(path: str) -> DepthImage:
    data = _read_bytes(path)
    w, h, maxval, offset = _parse_netpbm_header(data, b"P5", path)
    if maxval != 65535:
        raise InputError(f"{path}: expected 16-bit PGM (maxval 65535), got {maxval}")
    expected = w * h * 2
    body = data[offset : offset + expected]
    if len(body) != expected:
        raise InputError(f"{path}: truncated PGM payload")
    values = np.frombuffer(body, dtype=">u2").reshape(h, w).astype(np.uint16)
    return DepthImage(values=values)


def write_ppm(path: str, rgb: RgbImage) -> None:
    h, w = rgb.values.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")

    def do():
        with open(path, "wb") as fh:
            fh.write(header + rgb.values.tobytes())

    _wrap_write(path, do)


def read_ppm(path: str) -> RgbImage:
    data = _read_bytes(path)
    w, h, maxval, offset = _parse_netpbm_header(data, b"P6", path)
    if maxval != 255:
        raise InputError(f"{path}: expected 8-bit PPM, got maxval {maxval}")
    expected = w * h * 3
    body = data[offset : offset + expected]
    if len(body) != expected:
        raise InputError(f"{path}: truncated PPM payload")
    values = np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()
    return RgbImage(values=values)


def write_mask(path: str, mask: InstanceMask) -> None:
    """Writes <path>.pgm plus a <path>.json sidecar."""
    h, w = mask.bits.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    payload = np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()

    def do():
        with open(path + ".pgm", "wb") as fh:
            fh.write(header + payload)
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(
                {"instance_id": mask.instance_id, "ripeness": mask.ripeness.value},
                fh,
                sort_keys=True,
            )
            fh.write("\n")

    _wrap_write(path, do)


def read_mask(path: str) -> InstanceMask:
    """path without extension; reads <path>.pgm and <path>.json."""
    data = _read_bytes(path + ".pgm")
    w, h, maxval, offset = _parse_netpbm_header(data, b"P5", path + ".pgm")
    if maxval != 255:
        raise InputError(f"{path}.pgm: expected 8-bit mask PGM")
    body = data[offset : offset + w * h]
    if len(body) != w * h:
        raise InputError(f"{path}.pgm: truncated payload")
    bits = np.frombuffer(body, dtype=np.uint8).reshape(h, w) > 0
    try:
        with open(path + ".json", "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read mask sidecar {path}.json: {exc}") from exc
    return InstanceMask(
        bits=bits, instance_id=int(meta["instance_id"]), ripeness=Ripeness(meta["ripeness"])
    )


# -- JSON documents -----------------------------------------------------------


def _write_text(path: str, text: str) -> None:
    def do():
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)

    _wrap_write(path, do)


def save_scene(path: str, scene: SceneTemplate) -> None:
    _write_text(path, scene.to_json_str() + "\n")


def load_scene(path: str) -> SceneTemplate:
    try:
        obj = json.loads(_read_bytes(path))
        return SceneTemplate.from_json(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"invalid scene document {path}: {exc}") from exc


def save_ground_truth(path: str, truth: GroundTruth) -> None:
    _write_text(path, truth.to_json_str() + "\n")


def load_ground_truth(path: str) -> GroundTruth:
    try:
        return GroundTruth.from_json(json.loads(_read_bytes(path)))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"invalid ground truth document {path}: {exc}") from exc


# -- artifact directories -----------------------------------------------------


def save_artifacts(out_dir: str, artifacts: SceneArtifacts) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create {out_dir}: {exc}") from exc
    save_scene(os.path.join(out_dir, "scene.json"), artifacts.scene)
    write_ppm(os.path.join(out_dir, "rgb.ppm"), artifacts.rgb)
    write_pgm16(os.path.join(out_dir, "depth.pgm"), artifacts.depth)
    for mask in artifacts.masks:
        write_mask(os.path.join(out_dir, f"mask_{mask.instance_id:03d}"), mask)
    save_ground_truth(os.path.join(out_dir, "ground_truth.json"), artifacts.truth)


def load_artifacts(scene_dir: str) -> SceneArtifacts:
    scene_path = os.path.join(scene_dir, "scene.json")
    if not os.path.isdir(scene_dir):
        raise InputError(f"scene directory {scene_dir} does not exist")
    for required in ("scene.json", "rgb.ppm", "depth.pgm", "ground_truth.json"):
        if not os.path.exists(os.path.join(scene_dir, required)):
            raise InputError(f"scene artifacts missing {required} in {scene_dir}")
    scene = load_scene(scene_path)
    rgb = read_ppm(os.path.join(scene_dir, "rgb.ppm"))
    depth = read_pgm16(os.path.join(scene_dir, "depth.pgm"))
    truth = load_ground_truth(os.path.join(scene_dir, "ground_truth.json"))
    stems = sorted(
        name[:-4]
        for name in os.listdir(scene_dir)
        if name.startswith("mask_") and name.endswith(".pgm")
    )
    masks = tuple(read_mask(os.path.join(scene_dir, stem)) for stem in stems)
    return SceneArtifacts(scene=scene, rgb=rgb, depth=depth, masks=masks, truth=truth)
