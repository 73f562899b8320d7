"""Parallel-jaw gripper: body geometry, validity tests, finger closing.

Gripper frame convention: the origin is the midpoint between the fingertip
inner faces; the approach axis points from palm to fingertips, so the hand
body occupies approach-coordinates <= 0 (fingers span [-finger_length, 0],
palm behind them).  The closing axis is the direction the jaws travel.

Scalar operations wrap the batch kernels (single-pose batch), so sampled
and re-checked validity always agree bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .geometry import Aabb, OrientedBox, quat_to_matrix, tris_intersect_box, ray_hits_reduce, unit
from .mesh import SurfacePoint, TriMesh
from .se3 import Pose


class Validity(IntEnum):
    VALID = 0
    COLLIDING_BODY = 1
    EMPTY_CLOSING_REGION = 2


@dataclass(frozen=True)
class GripperSpec:
    """Parallel-jaw geometry (mm); defaults approximate a Franka Panda hand.

    ``finger_box`` extents are (along closing axis, lateral, along approach);
    ``palm_box`` likewise.  ``standoff_range`` bounds the approach-sampler
    standoff draw.
    """

    max_opening: float = 80.0
    finger_length: float = 53.8
    finger_box: tuple[float, float, float] = (10.0, 20.0, 53.8)
    palm_box: tuple[float, float, float] = (63.0, 28.0, 20.0)
    closing_axis: tuple[float, float, float] = (1.0, 0.0, 0.0)
    approach_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    standoff_range: tuple[float, float] = (0.0, 53.8)
    finger_rays: tuple[int, int] = (5, 9)

    def __post_init__(self):
        if not (self.max_opening > 0 and self.finger_length > 0):
            raise ValueError("gripper dimensions must be positive")
        c = unit(np.asarray(self.closing_axis, dtype=float))
        a = unit(np.asarray(self.approach_axis, dtype=float))
        if abs(float(np.dot(c, a))) > 1e-9:
            raise ValueError("closing_axis must be orthogonal to approach_axis")
        lo, hi = self.standoff_range
        if not (0.0 <= lo <= hi <= self.finger_length):
            raise ValueError("standoff_range must lie within [0, finger_length]")

    @property
    def basis(self) -> np.ndarray:
        """Columns: closing, lateral (a x c), approach axes in gripper frame."""
        c = unit(np.asarray(self.closing_axis, dtype=float))
        a = unit(np.asarray(self.approach_axis, dtype=float))
        return np.column_stack([c, np.cross(a, c), a])

    @property
    def reach(self) -> float:
        """Finger length plus palm depth: how far the body extends behind the tips."""
        return self.finger_length + float(self.palm_box[2])

    # boxes in basis coordinates (closing, lateral, approach): (center, half)
    def body_boxes(self) -> list[tuple[np.ndarray, np.ndarray]]:
        w2 = self.max_opening / 2.0
        fx, fy, fz = self.finger_box
        px, py, pz = self.palm_box
        lf = (np.array([-(w2 + fx / 2.0), 0.0, -fz / 2.0]), np.array([fx, fy, fz]) / 2.0)
        rf = (np.array([w2 + fx / 2.0, 0.0, -fz / 2.0]), np.array([fx, fy, fz]) / 2.0)
        palm = (np.array([0.0, 0.0, -self.finger_length - pz / 2.0]), np.array([px, py, pz]) / 2.0)
        return [lf, rf, palm]

    def closing_box(self) -> tuple[np.ndarray, np.ndarray]:
        fy = self.finger_box[1]
        L = self.finger_length
        return (
            np.array([0.0, 0.0, -L / 2.0]),
            np.array([self.max_opening / 2.0, fy / 2.0, L / 2.0]),
        )

    def finger_ray_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Ray origins/directions (basis coords) on both inner finger faces.

        Left-finger rays (origins at -opening/2) travel +closing; right-finger
        rays travel -closing.  Returns (origins (2m, 3), dirs (2m, 3)); the
        first m rays belong to the left finger.
        """
        ny, nz = self.finger_rays
        fy = self.finger_box[1]
        ys = np.linspace(-fy / 2.0, fy / 2.0, ny)
        zs = np.linspace(-self.finger_length, 0.0, nz)
        yy, zz = np.meshgrid(ys, zs, indexing="ij")
        m = yy.size
        w2 = self.max_opening / 2.0
        left = np.column_stack([np.full(m, -w2), yy.ravel(), zz.ravel()])
        right = np.column_stack([np.full(m, w2), yy.ravel(), zz.ravel()])
        dirs = np.zeros((2 * m, 3))
        dirs[:m, 0] = 1.0
        dirs[m:, 0] = -1.0
        return np.vstack([left, right]), dirs


@dataclass(frozen=True)
class ClosingRegion:
    """Oriented box between the open fingers for a posed gripper."""

    box: OrientedBox

    @staticmethod
    def at(pose: Pose, gripper: GripperSpec) -> "ClosingRegion":
        c, h = gripper.closing_box()
        rot = quat_to_matrix(pose.q) @ gripper.basis
        return ClosingRegion(OrientedBox(pose.p + rot @ c, h, rot))


@dataclass(frozen=True)
class ContactPair:
    left: SurfacePoint
    right: SurfacePoint
    jaw_width: float


def posed_boxes(pose: Pose, gripper: GripperSpec) -> list[OrientedBox]:
    """World-frame body boxes (left finger, right finger, palm)."""
    rot = quat_to_matrix(pose.q) @ gripper.basis
    return [OrientedBox(pose.p + rot @ c, h, rot) for c, h in gripper.body_boxes()]


def dilated_bounds(mesh_aabb: Aabb, gripper: GripperSpec) -> Aabb:
    """Object AABB dilated by the gripper reach: contains every touching pose."""
    return mesh_aabb.dilated(gripper.reach)


# ---------------------------------------------------------------------------
# batch kernels
# ---------------------------------------------------------------------------

def _effective_rotations(R: np.ndarray, gripper: GripperSpec) -> np.ndarray:
    B = gripper.basis
    if np.allclose(B, np.eye(3), atol=0.0):
        return R
    return R @ B


def _boxes_hit_mesh(
    mesh: TriMesh,
    R: np.ndarray,
    t: np.ndarray,
    box_center: np.ndarray,
    box_half: np.ndarray,
) -> np.ndarray:
    """Whether each posed copy of one gripper box intersects the mesh.

    ``R`` is (3, 3) shared across poses or (n, 3, 3) per pose; ``t`` is (n, 3).
    Includes box-inside-mesh containment when the mesh is watertight.
    """
    t = np.ascontiguousarray(t, dtype=float)
    n = len(t)
    hit = np.zeros(n, dtype=bool)
    shared = R.ndim == 2
    if shared:
        c_w = t + R @ box_center
        half_w = np.abs(R) @ box_half
        lo = c_w - half_w
        hi = c_w + half_w
    else:
        c_w = t + np.einsum("nij,j->ni", R, box_center)
        half_w = np.einsum("nij,j->ni", np.abs(R), box_half)
        lo = c_w - half_w
        hi = c_w + half_w

    near = np.all(lo <= mesh.aabb.hi + 1e-9, axis=1) & np.all(hi >= mesh.aabb.lo - 1e-9, axis=1)
    idx = np.nonzero(near)[0]
    if len(idx):
        flo = mesh.face_lo
        fhi = mesh.face_hi
        overlap = np.all(lo[idx, None, :] <= fhi[None, :, :] + 1e-9, axis=2) & np.all(
            hi[idx, None, :] >= flo[None, :, :] - 1e-9, axis=2
        )
        pp, ff = np.nonzero(overlap)
        if len(pp):
            pose_ids = idx[pp]
            wv = mesh.tri[ff] - t[pose_ids, None, :]
            if shared:
                vg = wv @ R  # row-wise R^T (v - t)
            else:
                vg = np.einsum("kji,kvj->kvi", R[pose_ids], wv)
            s = tris_intersect_box(vg - box_center, box_half)
            hit[pose_ids[s]] = True
    if mesh.watertight:
        rem = idx[~hit[idx]]
        if len(rem):
            hit[rem] = mesh.contains(c_w[rem])
    return hit


def check_validity_batch(
    mesh: TriMesh, R: np.ndarray, t: np.ndarray, gripper: GripperSpec
) -> np.ndarray:
    """Validity codes for a batch of poses; R is (3,3) shared or (n,3,3)."""
    Re = _effective_rotations(np.asarray(R, dtype=float), gripper)
    t = np.asarray(t, dtype=float)
    n = len(t)
    collide = np.zeros(n, dtype=bool)
    for c, h in gripper.body_boxes():
        collide |= _boxes_hit_mesh(mesh, Re, t, c, h)
    cc, ch = gripper.closing_box()
    nonempty = np.zeros(n, dtype=bool)
    free = ~collide
    if np.any(free):
        if Re.ndim == 2:
            nonempty[free] = _boxes_hit_mesh(mesh, Re, t[free], cc, ch)
        else:
            nonempty[free] = _boxes_hit_mesh(mesh, Re[free], t[free], cc, ch)
    codes = np.full(n, Validity.EMPTY_CLOSING_REGION, dtype=np.uint8)
    codes[collide] = Validity.COLLIDING_BODY
    codes[nonempty & ~collide] = Validity.VALID
    return codes


def close_fingers_batch(
    mesh: TriMesh, R: np.ndarray, t: np.ndarray, gripper: GripperSpec
) -> dict[str, np.ndarray]:
    """Symmetric finger sweep for a batch of (assumed Valid) poses.

    Each inner finger face advances along the posed closing axis; its contact
    is the first surface met by any of its rays.  No contact before the
    midplane on either side means no pinch.  Returns per-pose arrays:
    ``contact`` (bool), ``jaw_width``, ``cos_left``/``cos_right`` (|cos| of
    contact normal vs closing axis), ``left_face``/``right_face``,
    ``left_point``/``right_point``.
    """
    Re = _effective_rotations(np.asarray(R, dtype=float), gripper)
    t = np.asarray(t, dtype=float)
    n = len(t)
    origins_l, dirs_l = gripper.finger_ray_grid()
    m2 = len(origins_l)
    m = m2 // 2
    shared = Re.ndim == 2
    if shared:
        o_w = t[:, None, :] + origins_l @ Re.T
        d_w = np.broadcast_to(dirs_l @ Re.T, (n, m2, 3))
        closing_w = np.broadcast_to(Re[:, 0], (n, 3))
    else:
        o_w = t[:, None, :] + np.einsum("nij,mj->nmi", Re, origins_l)
        d_w = np.einsum("nij,mj->nmi", Re, dirs_l)
        closing_w = Re[:, :, 0]

    w = gripper.max_opening
    tt, ff = ray_hits_reduce(
        o_w.reshape(-1, 3), d_w.reshape(-1, 3), mesh.tri, t_min=0.0, t_max=w / 2.0
    )
    tt = tt.reshape(n, m2)
    ff = ff.reshape(n, m2)

    def side(sl):
        ts = tt[:, sl]
        ray = np.argmin(ts, axis=1)
        rows = np.arange(n)
        return ts[rows, ray], ray

    t_left, ray_l = side(slice(0, m))
    t_right, ray_r = side(slice(m, m2))
    contact = np.isfinite(t_left) & np.isfinite(t_right)
    jaw = np.where(contact, w - t_left - t_right, np.nan)

    rows = np.arange(n)
    fl = np.where(contact, ff[rows, ray_l], -1)
    fr = np.where(contact, ff[rows, ray_r + m], -1)
    nl = np.where(contact[:, None], mesh.face_normals[fl], np.nan)
    nr = np.where(contact[:, None], mesh.face_normals[fr], np.nan)
    cos_l = np.abs(np.sum(nl * closing_w, axis=1))
    cos_r = np.abs(np.sum(nr * closing_w, axis=1))
    tl_safe = np.where(contact, t_left, 0.0)
    tr_safe = np.where(contact, t_right, 0.0)
    pt_l = o_w[rows, ray_l] + tl_safe[:, None] * d_w[rows, ray_l]
    pt_r = o_w[rows, ray_r + m] + tr_safe[:, None] * d_w[rows, ray_r + m]
    return {
        "contact": contact,
        "jaw_width": jaw,
        "cos_left": cos_l,
        "cos_right": cos_r,
        "left_face": fl,
        "right_face": fr,
        "left_point": pt_l,
        "right_point": pt_r,
    }


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------

def check_validity(mesh: TriMesh, pose: Pose, gripper: GripperSpec) -> Validity:
    """Collision test first, then the nonempty-closing-volume test."""
    R = quat_to_matrix(pose.q)
    code = check_validity_batch(mesh, R, pose.p[None, :], gripper)[0]
    return Validity(int(code))


def close_fingers(mesh: TriMesh, pose: Pose, gripper: GripperSpec) -> ContactPair | None:
    """Close both fingers symmetrically; None when no stable pinch results."""
    R = quat_to_matrix(pose.q)
    out = close_fingers_batch(mesh, R, pose.p[None, :], gripper)
    if not bool(out["contact"][0]):
        return None
    fl = int(out["left_face"][0])
    fr = int(out["right_face"][0])
    left = SurfacePoint(out["left_point"][0], mesh.face_normals[fl], fl)
    right = SurfacePoint(out["right_point"][0], mesh.face_normals[fr], fr)
    return ContactPair(left=left, right=right, jaw_width=float(out["jaw_width"][0]))
