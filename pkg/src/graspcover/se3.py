"""Pose algebra: the weighted SE(3) grasp distance, deterministic SO(3)/SE(3)
grids, uniform pose sampling, and farthest-point subset selection.

Distance convention: rho(g, h) = omega * ||g.p - h.p|| + arccos(|<g.q, h.q>|).
The rotation term measures half the rotation angle between the orientations,
so omega = pi/360 rad/mm makes a 1 mm translation equal a 1 degree rotation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidKError, InvalidStepError
from .geometry import Aabb, icosphere, quat_canonical, quat_geodesic, uniform_quats

DEFAULT_OMEGA = math.pi / 360.0  # rad per mm: 1 mm translation == 1 deg rotation

_ICOSA_EDGE_DEG = math.degrees(math.acos(1.0 / math.sqrt(5.0)))  # 63.4349...


@dataclass(frozen=True)
class Pose:
    """Rigid-body transform: position (mm) + unit quaternion (w,x,y,z), w >= 0."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3).copy()
        q = quat_canonical(np.asarray(self.q, dtype=float).reshape(4))
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class MetricParams:
    """Weight relating translation (mm) and rotation (rad) in the distance."""

    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ValueError("omega must be positive")


@dataclass(frozen=True)
class GridSpec:
    """Deterministic SE(3) grid resolution and translation bounds."""

    translation_step: float
    rotation_step: float
    bounds: Aabb

    def __post_init__(self):
        if not self.translation_step > 0.0:
            raise ValueError("translation_step must be positive")
        if not 0.0 < self.rotation_step <= 180.0:
            raise InvalidStepError("rotation_step must be in (0, 180] degrees")


def pose_distance(g: Pose, h: Pose, params: MetricParams = MetricParams()) -> float:
    """Weighted SE(3) distance; symmetric, zero iff equal up to quaternion sign."""
    dt = float(np.linalg.norm(g.p - h.p))
    return params.omega * dt + float(quat_geodesic(g.q, h.q))


def pose_distances(
    p: np.ndarray, q: np.ndarray, ps: np.ndarray, qs: np.ndarray, params: MetricParams
) -> np.ndarray:
    """Distance from one pose (p, q) to many (ps, qs)."""
    dt = np.linalg.norm(ps - p[None, :], axis=1)
    return params.omega * dt + quat_geodesic(q[None, :], qs)


def pose_distance_matrix(
    p1: np.ndarray, q1: np.ndarray, p2: np.ndarray, q2: np.ndarray, params: MetricParams
) -> np.ndarray:
    """(n1, n2) pairwise distances; row-chunked to bound the temporaries."""
    n1 = len(p1)
    out = np.empty((n1, len(p2)))
    step = max(1, int(2**22 // max(len(p2), 1)))
    for a in range(0, n1, step):
        b = min(a + step, n1)
        dt = np.linalg.norm(p1[a:b, None, :] - p2[None, :, :], axis=2)
        dq = quat_geodesic(q1[a:b, None, :], q2[None, :, :])
        out[a:b] = params.omega * dt + dq
    return out


# ---------------------------------------------------------------------------
# deterministic grids
# ---------------------------------------------------------------------------

def _s2_depth(rotation_step: float) -> int:
    """Icosahedral subdivision depth so the nominal edge arc <= rotation_step."""
    d = 0
    while _ICOSA_EDGE_DEG / (2**d) > rotation_step:
        d += 1
    return d


def _s2_vertices(rotation_step: float) -> np.ndarray:
    # Pairwise separation must stay >= step/4 (in the quaternion metric the
    # S^2 edge arc contributes edge/2), so very coarse steps need an S^2 set
    # with edges >= step/2: the octahedron (90 deg edges) covers (126.87, 180].
    if rotation_step > 2.0 * _ICOSA_EDGE_DEG:
        return np.array(
            [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
            dtype=float,
        )
    verts, _ = icosphere(_s2_depth(rotation_step))
    return verts


def hopf_to_quat(theta: np.ndarray, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Hopf coordinates (S^2 point (theta, phi), fiber angle psi) to quaternions."""
    ct = np.cos(theta / 2.0)
    st = np.sin(theta / 2.0)
    return np.stack(
        [
            ct * np.cos(psi / 2.0),
            ct * np.sin(psi / 2.0),
            st * np.cos(phi + psi / 2.0),
            st * np.sin(phi + psi / 2.0),
        ],
        axis=-1,
    )


def so3_grid(rotation_step: float) -> np.ndarray:
    """Deterministic near-uniform orientation set, (n, 4) canonical quaternions.

    Product of an icosahedral S^2 subdivision (edge arc <= step) with an S^1
    fiber ring of ceil(360/step) angles; covers each rotation exactly once.
    """
    if not 0.0 < rotation_step <= 180.0:
        raise InvalidStepError("rotation_step must be in (0, 180] degrees")
    verts = _s2_vertices(rotation_step)
    theta = np.arccos(np.clip(verts[:, 2], -1.0, 1.0))
    phi = np.arctan2(verts[:, 1], verts[:, 0])
    n_psi = int(math.ceil(360.0 / rotation_step))
    dpsi = 2.0 * np.pi / n_psi
    psi = (np.arange(n_psi) + 0.5) * dpsi
    q = hopf_to_quat(
        np.repeat(theta, n_psi), np.repeat(phi, n_psi), np.tile(psi, len(verts))
    )
    return quat_canonical(q)


def lattice_axis(lo: float, hi: float, step: float) -> np.ndarray:
    """1-D inclusive lattice covering [lo, hi], centered in the leftover slack."""
    span = hi - lo
    n = int(math.floor(span / step + 1e-9)) + 1
    start = lo + 0.5 * (span - (n - 1) * step)
    return start + step * np.arange(n)


def translation_lattice(spec: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tuple(
        lattice_axis(spec.bounds.lo[k], spec.bounds.hi[k], spec.translation_step)
        for k in range(3)
    )


def se3_grid_size(spec: GridSpec) -> int:
    ax = translation_lattice(spec)
    return len(ax[0]) * len(ax[1]) * len(ax[2]) * len(so3_grid(spec.rotation_step))


def se3_grid(spec: GridSpec):
    """Lazily enumerate the grid as Pose values, orientation-major order."""
    quats = so3_grid(spec.rotation_step)
    xs, ys, zs = translation_lattice(spec)
    for q in quats:
        for x in xs:
            for y in ys:
                for z in zs:
                    yield Pose(np.array([x, y, z]), q)


def sample_uniform_pose(bounds: Aabb, rng: np.random.Generator) -> Pose:
    """One pose: position uniform in bounds, orientation uniform on SO(3)."""
    p, q = sample_uniform_poses(bounds, rng, 1)
    return Pose(p[0], q[0])


def sample_uniform_poses(
    bounds: Aabb, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray]:
    p = bounds.lo + rng.random((n, 3)) * (bounds.hi - bounds.lo)
    return p, uniform_quats(rng, n)


def farthest_point_indices(
    positions: np.ndarray,
    quats: np.ndarray,
    k: int,
    params: MetricParams = MetricParams(),
    seed_index: int = 0,
) -> list[int]:
    """Greedy max-min selection order over pose arrays; returns indices."""
    n = len(positions)
    if not 1 <= k <= n:
        raise InvalidKError(f"k={k} outside [1, {n}]")
    if not 0 <= seed_index < n:
        raise InvalidKError(f"seed_index={seed_index} outside [0, {n})")
    chosen = [int(seed_index)]
    dist = pose_distances(positions[seed_index], quats[seed_index], positions, quats, params)
    for _ in range(k - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(
            dist, pose_distances(positions[nxt], quats[nxt], positions, quats, params)
        )
    return chosen


def farthest_point_subset(
    poses: list[Pose] | tuple[np.ndarray, np.ndarray],
    k: int,
    params: MetricParams = MetricParams(),
    seed_index: int = 0,
) -> list[Pose] | list[int]:
    """Greedy max-min subset in selection order, starting at ``seed_index``.

    Given a list of Pose, returns the selected Pose values; given an
    (positions, quats) array pair, returns the selected indices.
    """
    if isinstance(poses, tuple) and len(poses) == 2 and isinstance(poses[0], np.ndarray):
        return farthest_point_indices(poses[0], poses[1], k, params, seed_index)
    ps = np.array([g.p for g in poses])
    qs = np.array([g.q for g in poses])
    order = farthest_point_indices(ps, qs, k, params, seed_index)
    return [poses[i] for i in order]
