"""Analytic grasp-success oracle and dense reference-set generation.

The oracle replaces physics: a grasp succeeds when the kinematic finger
sweep makes two contacts whose normals both lie inside the friction cone
of the closing axis (half-angle atan(mu), mu = 1.0 by default).  There is
no gravity, no dynamics, and no shaking; labels carry ``oracle_version``
so they are never mistaken for simulation results.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import BudgetExceededError
from .geometry import quat_to_matrix
from .gripper import GripperSpec, Validity, check_validity_batch, close_fingers_batch
from .mesh import TriMesh
from .se3 import GridSpec, MetricParams, Pose, so3_grid, translation_lattice

ORACLE_VERSION = "analytic-friction-cone-1"
DEFAULT_MU = 1.0
DEFAULT_MAX_ENUMERATED = 50_000_000


@dataclass(frozen=True)
class GraspLabel:
    valid: bool
    success: bool
    jaw_width: float  # nan when no contact pair
    quality: float  # antipodality margin in [0, 1], diagnostic only


@dataclass
class ReferenceSet:
    """Grid-enumerated valid poses with oracle labels for one object."""

    object_id: str
    grid: GridSpec
    gripper: GripperSpec
    mu: float
    oracle_version: str
    positions: np.ndarray  # (n, 3) valid poses, enumeration order
    quats: np.ndarray  # (n, 4)
    orientation_index: np.ndarray  # (n,) index into so3_grid(grid.rotation_step)
    success: np.ndarray  # (n,) bool
    jaw_width: np.ndarray  # (n,) nan when no contact
    quality: np.ndarray  # (n,)
    counts: dict
    watertight: bool = True
    mesh_source: str = ""
    robustness: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.positions)


def _cone_labels(closed: dict, mu: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(success, jaw, quality) from a close_fingers_batch result."""
    cone = math.atan(mu)
    cos_l = np.clip(closed["cos_left"], 0.0, 1.0)
    cos_r = np.clip(closed["cos_right"], 0.0, 1.0)
    with np.errstate(invalid="ignore"):
        ang = np.maximum(np.arccos(cos_l), np.arccos(cos_r))
    contact = closed["contact"]
    jaw = closed["jaw_width"]
    success = contact & (jaw > 0.0) & (ang <= cone)
    quality = np.where(success, np.clip(1.0 - ang / cone, 0.0, 1.0), 0.0)
    return success, jaw, quality


def evaluate_grasps_batch(
    mesh: TriMesh, R: np.ndarray, t: np.ndarray, gripper: GripperSpec, mu: float = DEFAULT_MU
) -> dict[str, np.ndarray]:
    """Label a batch of poses; R is (3,3) shared or (n,3,3) per pose."""
    codes = check_validity_batch(mesh, R, t, gripper)
    n = len(t)
    success = np.zeros(n, dtype=bool)
    jaw = np.full(n, np.nan)
    quality = np.zeros(n)
    vmask = codes == Validity.VALID
    if np.any(vmask):
        Rv = R if R.ndim == 2 else R[vmask]
        closed = close_fingers_batch(mesh, Rv, t[vmask], gripper)
        s, j, q = _cone_labels(closed, mu)
        success[vmask] = s
        jaw[vmask] = j
        quality[vmask] = q
    return {"validity": codes, "success": success, "jaw_width": jaw, "quality": quality}


def evaluate_grasp(
    mesh: TriMesh, pose: Pose, gripper: GripperSpec, mu: float = DEFAULT_MU
) -> GraspLabel:
    """Validity, kinematic closing, and the friction-cone success test."""
    out = evaluate_grasps_batch(mesh, quat_to_matrix(pose.q), pose.p[None, :], gripper, mu)
    valid = out["validity"][0] == Validity.VALID
    return GraspLabel(
        valid=bool(valid),
        success=bool(out["success"][0]),
        jaw_width=float(out["jaw_width"][0]),
        quality=float(out["quality"][0]),
    )


# ---------------------------------------------------------------------------
# reference generation over the SE(3) grid
# ---------------------------------------------------------------------------

def _reference_chunk(args) -> list[tuple]:
    """Label every lattice pose for a slice of grid orientations."""
    mesh, gripper, mu, quats, lattice, o_start = args
    rows = []
    for k, q in enumerate(quats):
        R = quat_to_matrix(q)
        out = evaluate_grasps_batch(mesh, R, lattice, gripper, mu)
        vmask = out["validity"] == Validity.VALID
        idx = np.nonzero(vmask)[0]
        rows.append(
            (
                o_start + k,
                lattice[idx],
                out["success"][idx],
                out["jaw_width"][idx],
                out["quality"][idx],
            )
        )
    return rows


def generate_reference(
    mesh: TriMesh,
    gripper: GripperSpec,
    grid: GridSpec,
    mu: float = DEFAULT_MU,
    object_id: str = "",
    max_enumerated: int = DEFAULT_MAX_ENUMERATED,
    jobs: int = 1,
) -> ReferenceSet:
    """Enumerate the grid, keep Valid poses, and label them with the oracle.

    Deterministic: results are ordered by (orientation index, lattice index)
    regardless of worker scheduling.
    """
    quats = so3_grid(grid.rotation_step)
    xs, ys, zs = translation_lattice(grid)
    lattice = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1).reshape(-1, 3)
    total = len(quats) * len(lattice)
    if total > max_enumerated:
        raise BudgetExceededError(
            f"grid would enumerate {total} poses (cap {max_enumerated})"
        )

    n_o = len(quats)
    if jobs <= 1:
        chunks = [_reference_chunk((mesh, gripper, mu, quats, lattice, 0))]
    else:
        starts = np.linspace(0, n_o, num=min(jobs * 4, n_o) + 1, dtype=int)
        tasks = [
            (mesh, gripper, mu, quats[a:b], lattice, a)
            for a, b in zip(starts[:-1], starts[1:])
            if b > a
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_reference_chunk, tasks))

    pos_parts, oi_parts, s_parts, j_parts, q_parts = [], [], [], [], []
    for rows in chunks:
        for oi, pos, succ, jaw, qual in rows:
            pos_parts.append(pos)
            oi_parts.append(np.full(len(pos), oi, dtype=np.int32))
            s_parts.append(succ)
            j_parts.append(jaw)
            q_parts.append(qual)
    positions = np.concatenate(pos_parts) if pos_parts else np.empty((0, 3))
    oidx = np.concatenate(oi_parts) if oi_parts else np.empty(0, dtype=np.int32)
    success = np.concatenate(s_parts) if s_parts else np.empty(0, dtype=bool)
    jaw = np.concatenate(j_parts) if j_parts else np.empty(0)
    quality = np.concatenate(q_parts) if q_parts else np.empty(0)
    return ReferenceSet(
        object_id=object_id or mesh.source or "object",
        grid=grid,
        gripper=gripper,
        mu=mu,
        oracle_version=ORACLE_VERSION,
        positions=positions,
        quats=quats[oidx] if len(oidx) else np.empty((0, 4)),
        orientation_index=oidx,
        success=success,
        jaw_width=jaw,
        quality=quality,
        counts={
            "enumerated": int(total),
            "valid": int(len(positions)),
            "success": int(success.sum()),
        },
        watertight=mesh.watertight,
        mesh_source=mesh.source,
    )


def label_robustness(
    ref: ReferenceSet,
    eps: float,
    params: MetricParams,
    include_all_enumerated: bool = False,
) -> ReferenceSet:
    """Per-grasp robustness: success fraction of the eps-neighborhood.

    Neighborhoods are taken over the stored (Valid) grasps and include the
    grasp itself.  With ``include_all_enumerated`` the denominator also
    counts enumerated-but-invalid grid neighbors (treated as failures).
    """
    from .metrics import PoseIndex  # local import to avoid a cycle

    if len(ref) == 0:
        raise ValueError("reference set is empty")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    index = PoseIndex(ref.positions, ref.quats, params)
    neighbors = index.within_many(ref.positions, ref.quats, eps)
    succ = ref.success.astype(float)
    num = np.array([succ[nb].sum() for nb in neighbors])
    den = np.array([len(nb) for nb in neighbors], dtype=float)
    if include_all_enumerated:
        den = _grid_neighbor_counts(ref, eps, params).astype(float)
    robustness = num / den
    return replace(ref, robustness=robustness)


def _grid_neighbor_counts(ref: ReferenceSet, eps: float, params: MetricParams) -> np.ndarray:
    """Number of enumerated grid poses within eps of each stored pose."""
    quats = so3_grid(ref.grid.rotation_step)
    xs, ys, zs = translation_lattice(ref.grid)
    axes = (xs, ys, zs)
    step = ref.grid.translation_step
    idx = np.stack(
        [np.rint((ref.positions[:, k] - axes[k][0]) / step).astype(int) for k in range(3)],
        axis=1,
    )
    sizes = np.array([len(a) for a in axes])
    geo = np.arccos(np.clip(np.abs(quats @ quats.T), 0.0, 1.0))
    counts = np.zeros(len(ref), dtype=np.int64)
    for oi in np.unique(ref.orientation_index):
        rows = np.nonzero(ref.orientation_index == oi)[0]
        gi = idx[rows]
        for oj in np.nonzero(geo[oi] <= eps)[0]:
            r = (eps - geo[oi, oj]) / params.omega / step
            m = int(math.floor(r + 1e-12))
            offs = np.stack(
                np.meshgrid(*([np.arange(-m, m + 1)] * 3), indexing="ij"), axis=-1
            ).reshape(-1, 3)
            offs = offs[np.linalg.norm(offs, axis=1) <= r + 1e-12]
            nb = gi[:, None, :] + offs[None, :, :]
            ok = np.all((nb >= 0) & (nb < sizes[None, None, :]), axis=2)
            counts[rows] += ok.sum(axis=1)
    return counts
