"""Registration and completion tests.

Pose recovery is judged modulo the prior's own symmetries: the canonical
berry is a surface of revolution and mirror-symmetric along its axis, so
only the axis direction (up to sign) and the translation are observable.
"""

from __future__ import annotations

import numpy as np
import pytest

from berrypick import (
    CompletionResult,
    IcpParams,
    InsufficientDataError,
    ParameterError,
    PointCloud,
    RegistrationError,
    chamfer_loss,
    chamfer_metric_mm,
    complete_cloud,
    evaluate_completion,
    icp_refine,
    init_pose,
)
from berrypick.types import LossWeights, Pose, rotation_aligning


def _rotation(axis, degrees):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    theta = np.radians(degrees)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(theta) * k + (1 - np.cos(theta)) * (k @ k)


def _full_sample(prior, pose, n=2000, seed=0):
    rng = np.random.Generator(np.random.Philox(seed))
    return PointCloud(xyz=pose.apply(prior.sample_surface(n, rng)))


def _front_crop(cloud, fraction):
    """Keep the camera-facing fraction of points (smallest z first)."""
    order = np.argsort(cloud.xyz[:, 2])
    keep = order[: max(1, int(round(fraction * len(cloud))))]
    return PointCloud(xyz=cloud.xyz[keep])


def _axis_error_deg(estimated: Pose, true: Pose) -> float:
    dot = abs(float(estimated.rotation[:, 2] @ true.rotation[:, 2]))
    return float(np.degrees(np.arccos(np.clip(dot, 0.0, 1.0))))


# ---------------------------------------------------------------- init_pose


def test_init_pose_on_full_sample_hits_true_center(prior):
    true = Pose(rotation=np.eye(3), translation=np.array([0.01, -0.005, 0.36]))
    guess = init_pose(_full_sample(prior, true), prior)
    assert np.linalg.norm(guess.translation - true.translation) < 0.002


def test_init_pose_is_translation_equivariant(prior):
    base = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    cloud = _full_sample(prior, base)
    shifted = PointCloud(xyz=cloud.xyz + np.array([0.05, 0.0, 0.0]))
    a = init_pose(cloud, prior)
    b = init_pose(shifted, prior)
    delta = b.translation - a.translation
    assert np.linalg.norm(delta - np.array([0.05, 0.0, 0.0])) < 0.002


def test_init_pose_pushes_thin_shells_away_from_camera(prior):
    true = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    shell = _front_crop(_full_sample(prior, true, n=4000), 0.3)
    guess = init_pose(shell, prior)
    assert guess.translation[2] > shell.xyz[:, 2].mean()


def test_init_pose_needs_ten_points(prior):
    cloud = PointCloud(xyz=np.random.default_rng(0).normal(size=(9, 3)))
    with pytest.raises(InsufficientDataError):
        init_pose(cloud, prior)


# ---------------------------------------------------------------- icp_refine


def test_icp_recovers_small_perturbation(prior):
    true = Pose(
        rotation=_rotation([1.0, 0.3, 0.2], 8.0),
        translation=np.array([0.004, -0.002, 0.355]),
    )
    partial = _front_crop(_full_sample(prior, true, n=3000, seed=3), 0.6)
    init = Pose(
        rotation=_rotation([0.0, 1.0, 0.0], 5.0) @ true.rotation,
        translation=true.translation + np.array([0.002, 0.002, -0.001]),
    )
    pose, fitness = icp_refine(partial, prior, init)
    assert _axis_error_deg(pose, true) < 2.0
    assert np.linalg.norm(pose.translation - true.translation) < 0.001
    assert fitness < 1.5


def test_icp_aligned_input_is_a_fixed_point(prior):
    true = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    partial = _full_sample(prior, true, n=1500)
    result = icp_refine(partial, prior, true)
    assert result.converged
    assert _axis_error_deg(result.pose, true) < 0.5
    assert np.linalg.norm(result.pose.translation - true.translation) < 5e-4
    assert result.fitness_mm < 1.0


def test_icp_gives_up_when_nothing_is_in_range(prior):
    true = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    partial = _full_sample(prior, true, n=500)
    far = Pose(rotation=np.eye(3), translation=true.translation + np.array([0.1, 0, 0]))
    with pytest.raises(RegistrationError):
        icp_refine(partial, prior, far, IcpParams(max_correspondence_dist=5.0))


def test_icp_residual_history_never_worsens(prior):
    true = Pose(
        rotation=_rotation([0.2, 1.0, 0.0], 12.0),
        translation=np.array([-0.006, 0.003, 0.37]),
    )
    partial = _front_crop(_full_sample(prior, true, n=2500, seed=11), 0.5)
    init = Pose(rotation=np.eye(3), translation=true.translation + 0.004)
    result = icp_refine(partial, prior, init)
    history = result.residual_history_mm
    assert len(history) >= 1
    assert all(b <= a for a, b in zip(history, history[1:]))
    assert result.fitness_mm == pytest.approx(history[-1])


def test_icp_result_unpacks_to_pose_and_fitness(prior):
    true = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    partial = _full_sample(prior, true, n=400)
    pose, fitness = icp_refine(partial, prior, true)
    assert isinstance(pose, Pose)
    assert fitness >= 0.0


def test_icp_needs_three_points(prior):
    cloud = PointCloud(xyz=np.zeros((2, 3)) + [0, 0, 0.36])
    with pytest.raises(InsufficientDataError):
        icp_refine(cloud, prior, Pose.identity())


def test_icp_params_validation():
    with pytest.raises(ParameterError):
        IcpParams(max_iterations=0)
    with pytest.raises(ParameterError):
        IcpParams(max_correspondence_dist=-1.0)


# ---------------------------------------------------------------- complete_cloud


def test_complete_full_sample_reconstructs_below_a_millimeter(prior):
    true = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    partial = _full_sample(prior, true, n=3000, seed=5)
    truth = prior.sample_ground_truth(true, np.random.Generator(np.random.Philox(6)))
    result = complete_cloud(partial, prior)
    assert chamfer_metric_mm(result.p2, truth[2]) <= 1.0


def test_complete_forty_percent_view_stays_within_two_millimeters(prior):
    true = Pose(
        rotation=_rotation([1.0, 0.0, 0.3], 10.0),
        translation=np.array([0.005, -0.003, 0.36]),
    )
    partial = _front_crop(_full_sample(prior, true, n=5000, seed=7), 0.4)
    truth = prior.sample_ground_truth(true, np.random.Generator(np.random.Philox(8)))
    result = complete_cloud(partial, prior)
    assert chamfer_metric_mm(result.p2, truth[2]) <= 2.0


def test_complete_output_densities_ascend(prior):
    true = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    result = complete_cloud(_full_sample(prior, true, n=1000), prior)
    assert tuple(len(c) for c in result.clouds) == prior.densities
    assert np.linalg.norm(result.centroid() - true.translation) < 0.002


def test_complete_stamps_the_instance_id(prior):
    true = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    partial = _full_sample(prior, true, n=800)
    tagged = partial.with_instance_id(7)
    result = complete_cloud(tagged, prior)
    for cloud in result.clouds:
        assert cloud.instance_ids is not None
        assert (cloud.instance_ids == 7).all()


def test_complete_needs_ten_points(prior):
    with pytest.raises(InsufficientDataError):
        complete_cloud(PointCloud(xyz=np.zeros((4, 3)) + [0, 0, 0.3]), prior)


def test_completion_result_rejects_non_ascending_densities():
    tiny = PointCloud(xyz=np.zeros((5, 3)))
    with pytest.raises(ParameterError):
        CompletionResult(p0=tiny, p1=tiny, p2=tiny, pose=Pose.identity(), fitness=0.0)


# ---------------------------------------------------------------- evaluation


def _completed_and_truth(prior, seed=9):
    true = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 0.36]))
    partial = _full_sample(prior, true, n=1200, seed=seed)
    truth = prior.sample_ground_truth(
        true, np.random.Generator(np.random.Philox(seed + 1))
    )
    return complete_cloud(partial, prior), truth


def test_evaluate_final_level_weight_reduces_to_plain_chamfer(prior):
    result, truth = _completed_and_truth(prior)
    report = evaluate_completion(result, truth, LossWeights(0.0, 0.0, 1.0))
    assert report["hierarchical"] == pytest.approx(
        chamfer_loss(result.p2, truth[2]), rel=1e-12
    )


def test_evaluate_scales_linearly_with_weights(prior):
    result, truth = _completed_and_truth(prior)
    single = evaluate_completion(result, truth, LossWeights(1.0, 1.0, 1.0))
    double = evaluate_completion(result, truth, LossWeights(2.0, 2.0, 2.0))
    assert double["hierarchical"] == pytest.approx(2 * single["hierarchical"], rel=1e-12)


def test_evaluate_reports_each_level_in_millimeters(prior):
    result, truth = _completed_and_truth(prior)
    report = evaluate_completion(result, truth)
    assert len(report["metric_mm"]) == 3
    for level, (pred, ref) in enumerate(zip(result.clouds, truth)):
        assert report["metric_mm"][level] == pytest.approx(
            chamfer_metric_mm(pred, ref)
        )


def test_evaluate_rejects_mismatched_truth(prior):
    result, truth = _completed_and_truth(prior)
    with pytest.raises(ParameterError):
        evaluate_completion(result, truth[:2])
    with pytest.raises(ParameterError):
        evaluate_completion(result, (truth[0], truth[1], truth[1]))
