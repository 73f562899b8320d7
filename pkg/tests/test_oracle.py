import math

import numpy as np
import pytest

from graspcover.errors import BudgetExceededError
from graspcover.geometry import Aabb, quat_canonical, quat_mul, quat_to_matrix, uniform_quats
from graspcover.gripper import dilated_bounds
from graspcover.mesh import TriMesh
from graspcover.oracle import (
    ReferenceSet,
    evaluate_grasp,
    generate_reference,
    label_robustness,
)
from graspcover.primitives import box_mesh
from graspcover.se3 import GridSpec, MetricParams, Pose, pose_distance_matrix, sample_uniform_poses

DOWN = np.array([0.0, 1.0, 0.0, 0.0])
PARAMS = MetricParams()


def small_grid(mesh, gripper, step_t=15.0, step_r=60.0):
    return GridSpec(step_t, step_r, dilated_bounds(mesh.aabb, gripper))


def _tilted_slab(angle_deg):
    # thin slab whose face normal makes `angle_deg` with the closing axis
    a = math.radians(angle_deg)
    q_face_x = np.array([math.cos(math.pi / 4), 0.0, math.sin(math.pi / 4), 0.0])  # 90 about y
    q_tilt = np.array([math.cos(a / 2), 0.0, math.sin(a / 2), 0.0])
    q = quat_canonical(quat_mul(q_tilt, q_face_x))
    base = box_mesh(60.0, 40.0, 2.0)
    r = quat_to_matrix(q)
    return TriMesh(vertices=base.vertices @ r.T, faces=base.faces)


def test_flat_pinch_full_quality(cube20, gripper):
    lab = evaluate_grasp(cube20, Pose(np.zeros(3), DOWN), gripper)
    assert lab.valid and lab.success
    assert lab.jaw_width == pytest.approx(20.0, abs=1e-9)
    assert lab.quality == pytest.approx(1.0, abs=1e-12)


def test_far_pose_invalid(cube20, gripper):
    lab = evaluate_grasp(cube20, Pose(np.array([500.0, 0, 0]), DOWN), gripper)
    assert not lab.valid and not lab.success


@pytest.mark.parametrize("angle,expect", [(40.0, True), (50.0, False)])
def test_contact_normals_against_friction_cone(angle, expect, gripper):
    # contacts on faces tilted beyond atan(mu) = 45 deg must fail
    mesh = _tilted_slab(angle)
    lab = evaluate_grasp(mesh, Pose(np.zeros(3), DOWN), gripper, mu=1.0)
    assert lab.valid
    assert lab.success == expect
    if expect:
        assert 0.0 < lab.quality <= 1.0 - angle / 45.0 + 1e-6


def test_sphere_centered_pinches_always_succeed(sphere_mesh, gripper, rng):
    quats = uniform_quats(rng, 200)
    for q in quats:
        lab = evaluate_grasp(sphere_mesh, Pose(np.zeros(3), q), gripper)
        if lab.valid:
            assert lab.success


def test_success_implies_contact_and_jaw(cube20, gripper, rng):
    pos, quats = sample_uniform_poses(dilated_bounds(cube20.aabb, gripper), rng, 1500)
    from graspcover.oracle import evaluate_grasps_batch

    out = evaluate_grasps_batch(cube20, quat_to_matrix(quats), pos, gripper)
    s = out["success"]
    assert np.all(out["validity"][s] == 0)
    assert np.all(out["jaw_width"][s] > 0.0)
    assert np.all(out["jaw_width"][s] <= gripper.max_opening + 1e-9)
    assert np.all((out["quality"] >= 0.0) & (out["quality"] <= 1.0))


def test_evaluate_rigid_invariance(cube20, gripper, rng):
    pos, quats = sample_uniform_poses(dilated_bounds(cube20.aabb, gripper), rng, 200)
    q0 = uniform_quats(rng, 1)[0]
    r0 = quat_to_matrix(q0)
    t0 = rng.uniform(-30, 30, 3)
    moved = TriMesh(vertices=cube20.vertices @ r0.T + t0, faces=cube20.faces)
    for i in range(200):
        a = evaluate_grasp(cube20, Pose(pos[i], quats[i]), gripper)
        b = evaluate_grasp(
            moved, Pose(r0 @ pos[i] + t0, quat_canonical(quat_mul(q0, quats[i]))), gripper
        )
        assert (a.valid, a.success) == (b.valid, b.success)
        if a.valid and not math.isnan(a.jaw_width):
            assert a.jaw_width == pytest.approx(b.jaw_width, abs=1e-6)


# ---------------------------------------------------------------------------
# reference generation
# ---------------------------------------------------------------------------

def test_generate_reference_basics(cube20, gripper):
    ref = generate_reference(cube20, gripper, small_grid(cube20, gripper), object_id="cube")
    assert ref.counts["success"] > 0
    assert ref.counts["success"] <= ref.counts["valid"]
    assert ref.counts["valid"] / ref.counts["enumerated"] < 0.10
    assert len(ref) == ref.counts["valid"]
    assert np.array_equal(ref.success, ref.success.astype(bool))
    # stored poses are exactly grid poses: all positions on the lattice
    from graspcover.se3 import translation_lattice

    xs, ys, zs = translation_lattice(ref.grid)
    for k, ax in enumerate((xs, ys, zs)):
        assert np.all(np.isin(np.round(ref.positions[:, k], 9), np.round(ax, 9)))


def test_generate_reference_deterministic(cube20, gripper):
    g = small_grid(cube20, gripper)
    a = generate_reference(cube20, gripper, g, object_id="cube")
    b = generate_reference(cube20, gripper, g, object_id="cube")
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.quats, b.quats)
    assert np.array_equal(a.success, b.success)
    assert a.counts == b.counts


def test_generate_reference_parallel_merge(cube20, gripper):
    g = small_grid(cube20, gripper, 20.0, 90.0)
    a = generate_reference(cube20, gripper, g, jobs=1)
    b = generate_reference(cube20, gripper, g, jobs=2)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.success, b.success)


def test_generate_reference_budget(cube20, gripper):
    with pytest.raises(BudgetExceededError):
        generate_reference(cube20, gripper, small_grid(cube20, gripper), max_enumerated=1000)


# ---------------------------------------------------------------------------
# robustness labels
# ---------------------------------------------------------------------------

def _synthetic_ref(positions, success, gripper):
    n = len(positions)
    quats = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    return ReferenceSet(
        object_id="synthetic",
        grid=GridSpec(10.0, 90.0, Aabb(np.full(3, -100.0), np.full(3, 100.0))),
        gripper=gripper,
        mu=1.0,
        oracle_version="test",
        positions=np.asarray(positions, dtype=float),
        quats=quats,
        orientation_index=np.zeros(n, dtype=np.int32),
        success=np.asarray(success, dtype=bool),
        jaw_width=np.full(n, 10.0),
        quality=np.ones(n),
        counts={"enumerated": n, "valid": n, "success": int(np.sum(success))},
    )


def test_robustness_isolated_and_counted(gripper):
    # grasp 0 isolated; grasps 1-4 mutually within eps: 3 successes, 1 failure
    eps = 0.109
    positions = [[0, 0, 0], [500, 0, 0], [505, 0, 0], [500, 5, 0], [500, 0, 5]]
    success = [True, True, True, True, False]
    ref = _synthetic_ref(positions, success, gripper)
    out = label_robustness(ref, eps, PARAMS)
    assert out.robustness[0] == pytest.approx(1.0)
    for i in (1, 2, 3, 4):
        assert out.robustness[i] == pytest.approx(0.75)


def test_robustness_matches_brute_force(cube20, gripper):
    ref = generate_reference(cube20, gripper, small_grid(cube20, gripper, 20.0, 90.0))
    assert 0 < len(ref) <= 5000
    out = label_robustness(ref, 0.2, PARAMS)
    D = pose_distance_matrix(ref.positions, ref.quats, ref.positions, ref.quats, PARAMS)
    nb = D <= 0.2
    want = (nb & ref.success[None, :]).sum(axis=1) / nb.sum(axis=1)
    assert np.allclose(out.robustness, want, atol=1e-12)


def test_robustness_small_eps_is_success_indicator(cube20, gripper):
    ref = generate_reference(cube20, gripper, small_grid(cube20, gripper, 20.0, 90.0))
    out = label_robustness(ref, 1e-9, PARAMS)
    assert np.allclose(out.robustness, ref.success.astype(float))
    assert np.all((out.robustness >= 0.0) & (out.robustness <= 1.0))


def test_robustness_enumerated_denominator(gripper):
    # one valid grasp on the lattice: 7-cell ball, 6 invalid neighbors
    ref = _synthetic_ref([[0.0, 0.0, 0.0]], [True], gripper)
    out = label_robustness(ref, 0.109, PARAMS, include_all_enumerated=True)
    assert out.robustness[0] == pytest.approx(1.0 / 7.0)
