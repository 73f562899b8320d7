"""Low-level geometric kernels shared by the mesh, pose, and gripper modules.

Everything here operates on plain numpy arrays (float64, mm) so the hot
paths stay vectorized.  Triangle/box/ray routines loop over the small axis
(faces, SAT axes) and vectorize over the large one (query batches).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Minimum ray parameter used when casting from points on the surface,
# avoids self-hits (mm).
T_EPS = 1e-4

# Fixed, axis-avoiding direction for point-in-mesh parity tests.
PARITY_DIR = np.array([0.57403589, 0.75690839, 0.31242907])
PARITY_DIR /= np.linalg.norm(PARITY_DIR)


def unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


def perp_unit(v: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to v."""
    v = unit(v)
    # cross with the axis v is least aligned with
    a = np.zeros(3)
    a[np.argmin(np.abs(v))] = 1.0
    return unit(np.cross(v, a))


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box, lo <= hi per axis (mm)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if np.any(self.lo > self.hi):
            raise ValueError("aabb lo > hi")

    @property
    def span(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def dilated(self, margin: float) -> "Aabb":
        return Aabb(self.lo - margin, self.hi + margin)

    def contains(self, points: np.ndarray, atol: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.lo - atol) & (p <= self.hi + atol), axis=1)


@dataclass(frozen=True)
class OrientedBox:
    """Box with arbitrary orientation: x_world = rot @ x_local + center.

    ``rot`` columns are the box axes in world coordinates; ``half`` are the
    positive half-extents along those axes (mm).
    """

    center: np.ndarray
    half: np.ndarray
    rot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half", np.asarray(self.half, dtype=float))
        object.__setattr__(self, "rot", np.asarray(self.rot, dtype=float))
        if np.any(self.half <= 0.0):
            raise ValueError("box half-extents must be positive")

    def world_aabb(self) -> Aabb:
        r = np.abs(self.rot) @ self.half
        return Aabb(self.center - r, self.center + r)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.center) @ self.rot


# ---------------------------------------------------------------------------
# quaternions (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Normalize and pick the double-cover representative with w >= 0.

    Ties (w == 0) are broken so the first nonzero of (x, y, z) is positive.
    Works on (..., 4) arrays.
    """
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    flat = np.atleast_2d(q)
    sign = np.sign(flat[:, 0])
    for k in (1, 2, 3):
        sign = np.where(sign == 0.0, np.sign(flat[:, k]), sign)
    sign = np.where(sign == 0.0, 1.0, sign)
    out = flat * sign[:, None]
    return out.reshape(q.shape)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices from unit quaternions, (..., 4) -> (..., 3, 3)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Unit quaternion (canonical sign) from a rotation matrix, (...,3,3) -> (...,4)."""
    m = np.asarray(m, dtype=float)
    batch = m.shape[:-2]
    m = m.reshape((-1, 3, 3))
    n = m.shape[0]
    q = np.empty((n, 4))
    t = np.einsum("nii->n", m)
    # Shepperd's method, branch on the largest diagonal term for stability.
    c0 = t
    c1 = m[:, 0, 0]
    c2 = m[:, 1, 1]
    c3 = m[:, 2, 2]
    choice = np.argmax(np.stack([c0, c1, c2, c3], axis=1), axis=1)

    i = choice == 0
    if np.any(i):
        s = np.sqrt(t[i] + 1.0) * 2.0
        q[i, 0] = 0.25 * s
        q[i, 1] = (m[i, 2, 1] - m[i, 1, 2]) / s
        q[i, 2] = (m[i, 0, 2] - m[i, 2, 0]) / s
        q[i, 3] = (m[i, 1, 0] - m[i, 0, 1]) / s
    i = choice == 1
    if np.any(i):
        s = np.sqrt(1.0 + m[i, 0, 0] - m[i, 1, 1] - m[i, 2, 2]) * 2.0
        q[i, 0] = (m[i, 2, 1] - m[i, 1, 2]) / s
        q[i, 1] = 0.25 * s
        q[i, 2] = (m[i, 0, 1] + m[i, 1, 0]) / s
        q[i, 3] = (m[i, 0, 2] + m[i, 2, 0]) / s
    i = choice == 2
    if np.any(i):
        s = np.sqrt(1.0 - m[i, 0, 0] + m[i, 1, 1] - m[i, 2, 2]) * 2.0
        q[i, 0] = (m[i, 0, 2] - m[i, 2, 0]) / s
        q[i, 1] = (m[i, 0, 1] + m[i, 1, 0]) / s
        q[i, 2] = 0.25 * s
        q[i, 3] = (m[i, 1, 2] + m[i, 2, 1]) / s
    i = choice == 3
    if np.any(i):
        s = np.sqrt(1.0 - m[i, 0, 0] - m[i, 1, 1] + m[i, 2, 2]) * 2.0
        q[i, 0] = (m[i, 1, 0] - m[i, 0, 1]) / s
        q[i, 1] = (m[i, 0, 2] + m[i, 2, 0]) / s
        q[i, 2] = (m[i, 1, 2] + m[i, 2, 1]) / s
        q[i, 3] = 0.25 * s
    return quat_canonical(q.reshape(batch + (4,)))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b on (..., 4) arrays (not canonicalized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def uniform_quats(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform random unit quaternions (subgroup algorithm), canonical sign."""
    u = rng.random((n, 3))
    r1 = np.sqrt(1.0 - u[:, 0])
    r2 = np.sqrt(u[:, 0])
    t1 = 2.0 * np.pi * u[:, 1]
    t2 = 2.0 * np.pi * u[:, 2]
    q = np.stack([r2 * np.cos(t2), r1 * np.sin(t1), r1 * np.cos(t1), r2 * np.sin(t2)], axis=1)
    return quat_canonical(q)


def quat_geodesic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """arccos(|<a, b>|) on broadcastable (..., 4) arrays, range [0, pi/2].

    Evaluated through the chord (2 asin(c/2), c = min |a -+ b|): identical in
    exact arithmetic but well-conditioned near zero, so bitwise-equal (or
    negated) quaternions give exactly 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    chord = np.minimum(
        np.linalg.norm(a - b, axis=-1), np.linalg.norm(a + b, axis=-1)
    )
    return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))


def perp_basis_rows(axes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row orthonormal (e1, e2) with e1, e2 perpendicular to each axis row."""
    axes = np.asarray(axes, dtype=float)
    pick = np.argmin(np.abs(axes), axis=1)
    helper = np.zeros_like(axes)
    helper[np.arange(len(axes)), pick] = 1.0
    e1 = np.cross(axes, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(axes, e1)
    return e1, e2


def cap_directions(rng: np.random.Generator, axis: np.ndarray, alpha: float, n: int) -> np.ndarray:
    """n directions uniform over the spherical cap of half-angle alpha around axis.

    alpha = 0 returns the axis exactly; alpha = pi is the full sphere.
    """
    axis = unit(axis)
    return cap_directions_about(rng, np.broadcast_to(axis, (n, 3)), alpha)


def cap_directions_about(rng: np.random.Generator, axes: np.ndarray, alpha: float) -> np.ndarray:
    """One cap-uniform direction per axis row; exact axis when alpha = 0."""
    axes = np.asarray(axes, dtype=float)
    n = len(axes)
    u = rng.random((n, 2))
    cos_t = 1.0 - u[:, 0] * (1.0 - np.cos(alpha))
    sin_t = np.sqrt(np.clip(1.0 - cos_t**2, 0.0, None))
    phi = 2.0 * np.pi * u[:, 1]
    e1, e2 = perp_basis_rows(axes)
    return (
        cos_t[:, None] * axes
        + (sin_t * np.cos(phi))[:, None] * e1
        + (sin_t * np.sin(phi))[:, None] * e2
    )


def uniform_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    """n directions uniform on the unit sphere."""
    u = rng.random((n, 2))
    z = 2.0 * u[:, 0] - 1.0
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = 2.0 * np.pi * u[:, 1]
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


# ---------------------------------------------------------------------------
# icosphere (also used for the deterministic S^2 grid)
# ---------------------------------------------------------------------------

def icosphere(depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosahedron subdivided ``depth`` times; returns (verts, faces)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts = [v for v in verts]
    for _ in range(depth):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = verts[i] + verts[j]
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces, dtype=np.int64)
    return np.array(verts), faces


# ---------------------------------------------------------------------------
# triangle vs. axis-aligned box (SAT), vectorized over triangles
# ---------------------------------------------------------------------------

def tris_intersect_box(verts: np.ndarray, half: np.ndarray) -> np.ndarray:
    """SAT overlap of K triangles with the solid box |x_i| <= half_i.

    ``verts``: (K, 3, 3) triangle vertices already in the box frame.
    Touching counts as intersecting.  Returns (K,) bool.
    """
    verts = np.asarray(verts, dtype=float)
    hx, hy, hz = float(half[0]), float(half[1]), float(half[2])
    v0, v1, v2 = verts[:, 0, :], verts[:, 1, :], verts[:, 2, :]

    mn = verts.min(axis=1)
    mx = verts.max(axis=1)
    ok = (
        (mn[:, 0] <= hx) & (mx[:, 0] >= -hx)
        & (mn[:, 1] <= hy) & (mx[:, 1] >= -hy)
        & (mn[:, 2] <= hz) & (mx[:, 2] >= -hz)
    )
    if not np.any(ok):
        return ok

    e0 = v1 - v0
    e1 = v2 - v1
    e2 = v0 - v2

    n = np.cross(e0, v2 - v0)
    r = hx * np.abs(n[:, 0]) + hy * np.abs(n[:, 1]) + hz * np.abs(n[:, 2])
    s = np.sum(n * v0, axis=1)
    ok &= np.abs(s) <= r

    # 9 cross-product axes a = box_axis x triangle_edge
    h = (hx, hy, hz)
    for e in (e0, e1, e2):
        ex, ey, ez = e[:, 0], e[:, 1], e[:, 2]
        zeros = np.zeros_like(ex)
        for ax, ay, az in (
            (zeros, -ez, ey),
            (ez, zeros, -ex),
            (-ey, ex, zeros),
        ):
            ra = h[0] * np.abs(ax) + h[1] * np.abs(ay) + h[2] * np.abs(az)
            p0 = ax * v0[:, 0] + ay * v0[:, 1] + az * v0[:, 2]
            p1 = ax * v1[:, 0] + ay * v1[:, 1] + az * v1[:, 2]
            p2 = ax * v2[:, 0] + ay * v2[:, 1] + az * v2[:, 2]
            pmin = np.minimum(np.minimum(p0, p1), p2)
            pmax = np.maximum(np.maximum(p0, p1), p2)
            ok &= (pmin <= ra) & (pmax >= -ra)
    return ok


# ---------------------------------------------------------------------------
# ray vs. triangle soup (Moller-Trumbore), vectorized over rays
# ---------------------------------------------------------------------------

_DET_EPS = 1e-12


def ray_hits_reduce(
    origins: np.ndarray,
    dirs: np.ndarray,
    tri: np.ndarray,
    t_min: float = T_EPS,
    t_max: float = np.inf,
    farthest: bool = False,
    face_subset: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """First (or farthest) hit of N rays against all triangles.

    ``tri``: (F, 3, 3) triangle vertices in world frame.  Loops over faces,
    vectorizes over rays.  Returns (t, face_index); misses get t = +inf
    (or -inf when ``farthest``) and face_index = -1.
    Ties on t go to the lowest face index.
    """
    origins = np.ascontiguousarray(origins, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    n = origins.shape[0]
    worst = -np.inf if farthest else np.inf
    best_t = np.full(n, worst)
    best_f = np.full(n, -1, dtype=np.int64)
    ox, oy, oz = origins[:, 0], origins[:, 1], origins[:, 2]
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    faces = range(tri.shape[0]) if face_subset is None else face_subset
    for f in faces:
        v0 = tri[f, 0]
        e1 = tri[f, 1] - v0
        e2 = tri[f, 2] - v0
        px = dy * e2[2] - dz * e2[1]
        py = dz * e2[0] - dx * e2[2]
        pz = dx * e2[1] - dy * e2[0]
        det = e1[0] * px + e1[1] * py + e1[2] * pz
        good = np.abs(det) >= _DET_EPS
        inv = 1.0 / np.where(good, det, 1.0)
        tx = ox - v0[0]
        ty = oy - v0[1]
        tz = oz - v0[2]
        u = (tx * px + ty * py + tz * pz) * inv
        qx = ty * e1[2] - tz * e1[1]
        qy = tz * e1[0] - tx * e1[2]
        qz = tx * e1[1] - ty * e1[0]
        v = (dx * qx + dy * qy + dz * qz) * inv
        t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
        hit = good & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t >= t_min) & (t <= t_max)
        if farthest:
            better = hit & (t > best_t)
        else:
            better = hit & (t < best_t)
        best_t = np.where(better, t, best_t)
        best_f = np.where(better, f, best_f)
    return best_t, best_f


def ray_all_hits(
    origin: np.ndarray,
    direction: np.ndarray,
    tri: np.ndarray,
    t_min: float = T_EPS,
    face_subset: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """All hits of a single ray; returns (t values, face indices) sorted by t."""
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if face_subset is None:
        sub = tri
        idx = np.arange(tri.shape[0])
    else:
        idx = np.asarray(face_subset, dtype=np.int64)
        sub = tri[idx]
    v0 = sub[:, 0, :]
    e1 = sub[:, 1, :] - v0
    e2 = sub[:, 2, :] - v0
    p = np.cross(direction[None, :], e2)
    det = np.sum(e1 * p, axis=1)
    good = np.abs(det) >= _DET_EPS
    inv = 1.0 / np.where(good, det, 1.0)
    tv = origin[None, :] - v0
    u = np.sum(tv * p, axis=1) * inv
    q = np.cross(tv, e1)
    v = np.sum(direction[None, :] * q, axis=1) * inv
    t = np.sum(e2 * q, axis=1) * inv
    hit = good & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t >= t_min)
    ts = t[hit]
    fs = idx[hit]
    order = np.lexsort((fs, ts))
    return ts[order], fs[order]
