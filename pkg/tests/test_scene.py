"""Scene model and randomized generation: JSON round-trips, placement
guarantees, and determinism of the generator under a fixed stream."""

from __future__ import annotations

import numpy as np
import pytest

from berrypick import (
    BerryInstance,
    CameraIntrinsics,
    Occluder,
    ParameterError,
    Ripeness,
    SceneConfig,
    SceneGenerationError,
    SceneTemplate,
    generate_scene,
)
from berrypick.types import Pose


def _rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _generate(config, prior, seed=0):
    return generate_scene(config, prior, _rng(seed))


def test_generate_counts_and_labels(prior):
    config = SceneConfig(n_ripe=2, n_unripe=3, n_occluders=2)
    scene = _generate(config, prior)
    assert len(scene.berries) == 5
    assert len(scene.occluders) == 2
    labels = [b.ripeness for b in scene.berries]
    assert labels.count(Ripeness.RIPE) == 2
    assert labels.count(Ripeness.UNRIPE) == 3
    assert sorted(b.instance_id for b in scene.berries) == list(range(5))


def test_generate_respects_minimum_spacing(prior):
    config = SceneConfig(n_ripe=3, n_unripe=2, clutter_spacing=0.004)
    min_dist = 2 * prior.bounding_radius_m + config.clutter_spacing
    for seed in range(8):
        scene = _generate(config, prior, seed)
        centers = np.array([b.pose.translation for b in scene.berries])
        diffs = centers[:, None, :] - centers[None, :, :]
        dists = np.linalg.norm(diffs, axis=2)
        np.fill_diagonal(dists, np.inf)
        assert dists.min() >= min_dist


def test_generate_keeps_centers_in_workspace(prior):
    config = SceneConfig(
        n_ripe=1,
        n_unripe=1,
        workspace_lo=(-0.03, -0.02, 0.32),
        workspace_hi=(0.03, 0.02, 0.38),
    )
    for seed in range(5):
        scene = _generate(config, prior, seed)
        centers = np.array([b.pose.translation for b in scene.berries])
        assert (centers >= config.workspace_lo).all()
        assert (centers <= config.workspace_hi).all()


def test_generate_hanging_axis_tilt_bounded(prior):
    config = SceneConfig(max_tilt_rad=0.3)
    down = np.array([0.0, -1.0, 0.0])  # camera frame: berries hang toward -y
    for seed in range(5):
        scene = _generate(config, prior, seed)
        for berry in scene.berries:
            axis = berry.pose.rotation @ np.array([0.0, 0.0, 1.0])
            assert float(axis @ down) >= np.cos(config.max_tilt_rad) - 1e-9


def test_generate_occluders_sit_on_sight_lines(prior):
    config = SceneConfig(n_occluders=3, occluder_lateral_sigma=0.005)
    lo, hi = config.occluder_fraction_range
    scene = _generate(config, prior, seed=3)
    berry_z = np.array([b.pose.translation[2] for b in scene.berries])
    for occluder in scene.occluders:
        # lateral jitter never moves the leaf along z, so z pins the fraction
        fractions = occluder.center[2] / berry_z
        assert ((fractions >= lo - 1e-9) & (fractions <= hi + 1e-9)).any()
        assert occluder.semi_minor <= occluder.semi_major
        assert config.occluder_semi_axis_range[0] <= occluder.semi_minor
        assert occluder.semi_major <= config.occluder_semi_axis_range[1]


def test_generate_is_deterministic_per_stream(prior):
    config = SceneConfig(n_ripe=2, n_unripe=2, n_occluders=2)
    a = _generate(config, prior, seed=17)
    b = _generate(config, prior, seed=17)
    assert a.to_json_str() == b.to_json_str()
    c = _generate(config, prior, seed=18)
    assert a.to_json_str() != c.to_json_str()


def test_generate_raises_when_overpacked(prior):
    config = SceneConfig(
        n_ripe=6,
        n_unripe=6,
        workspace_lo=(-0.02, -0.02, 0.35),
        workspace_hi=(0.02, 0.02, 0.39),
    )
    with pytest.raises(SceneGenerationError):
        _generate(config, prior)


def test_config_validation():
    with pytest.raises(ParameterError):
        SceneConfig(n_ripe=-1)
    with pytest.raises(ParameterError):
        SceneConfig(clutter_spacing=-0.01)
    with pytest.raises(ParameterError):
        SceneConfig(occluder_fraction_range=(0.8, 0.55))
    with pytest.raises(ParameterError):
        SceneConfig(workspace_lo=(0.1, -0.06, 0.30), workspace_hi=(0.09, 0.06, 0.42))
    with pytest.raises(ParameterError):
        SceneConfig(workspace_lo=(-0.09, -0.06, -0.1), workspace_hi=(0.09, 0.06, 0.42))


def test_config_json_round_trip():
    config = SceneConfig(
        n_ripe=1,
        n_unripe=4,
        n_occluders=3,
        clutter_spacing=0.002,
        workspace_lo=(-0.05, -0.04, 0.31),
        workspace_hi=(0.05, 0.04, 0.40),
    )
    assert SceneConfig.from_json(config.to_json()) == config


def test_scene_template_json_round_trip(prior):
    scene = _generate(SceneConfig(), prior, seed=9)
    loaded = SceneTemplate.from_json(scene.to_json())
    assert loaded.to_json_str() == scene.to_json_str()


def test_scene_template_rejects_duplicate_ids():
    berry = BerryInstance(0, Pose(np.eye(3), np.array([0.0, 0.0, 0.35])), Ripeness.RIPE)
    with pytest.raises(ParameterError):
        SceneTemplate(berries=(berry, berry), occluders=(), intrinsics=CameraIntrinsics())


def test_occluder_mesh_is_planar_fan():
    occluder = Occluder(
        center=np.array([0.01, -0.02, 0.3]),
        normal=np.array([0.0, 0.3, 1.0]),
        semi_major=0.03,
        semi_minor=0.015,
        roll_rad=0.7,
    )
    vertices, faces = occluder.mesh(segments=24)
    assert vertices.shape == (25, 3)
    assert faces.shape == (24, 3)
    offsets = (vertices - occluder.center) @ occluder.normal
    assert np.abs(offsets).max() < 1e-12


def test_occluder_normalizes_normal_and_validates():
    occluder = Occluder(
        center=np.zeros(3), normal=np.array([0.0, 0.0, 2.0]), semi_major=0.02, semi_minor=0.01
    )
    assert np.linalg.norm(occluder.normal) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        Occluder(center=np.zeros(3), normal=np.zeros(3), semi_major=0.02, semi_minor=0.01)
    with pytest.raises(ParameterError):
        Occluder(center=np.zeros(3), normal=np.array([0.0, 0.0, 1.0]), semi_major=0.0, semi_minor=0.01)
