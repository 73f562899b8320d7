"""Triangle-mesh kernel: loading, surface sampling, ray casting, box queries.

Meshes are stored in millimeters.  OBJ/STL input is interpreted as meters
by default and scaled on load (override with ``scale``).  A BVH over face
bounding boxes accelerates single queries; batch code paths gather leaf
candidates and run the same exact triangle kernels from ``geometry``.
"""
from __future__ import annotations

import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMeshError, MeshParseError
from .geometry import (
    Aabb,
    OrientedBox,
    PARITY_DIR,
    T_EPS,
    ray_all_hits,
    ray_hits_reduce,
    tris_intersect_box,
)

DEGENERATE_AREA = 1e-10  # mm^2, faces below this are dropped at load
DEFAULT_SCALE = 1000.0  # file units (m) -> mm

_LEAF_SIZE = 8


@dataclass(frozen=True)
class SurfacePoint:
    """A point on the mesh surface with its outward face normal."""

    position: np.ndarray
    normal: np.ndarray
    face_index: int


@dataclass(frozen=True)
class RayHit:
    t: float
    position: np.ndarray
    normal: np.ndarray
    face_index: int


class _Bvh:
    """Flat-array median-split BVH over face AABBs."""

    def __init__(self, tri: np.ndarray):
        f = tri.shape[0]
        lo = tri.min(axis=1)
        hi = tri.max(axis=1)
        centroid = tri.mean(axis=1)
        order = np.arange(f)

        bounds_lo, bounds_hi = [], []
        children, ranges = [], []
        # stack of (node_index, start, end); children filled after split
        stack = [(0, 0, f)]
        bounds_lo.append(np.zeros(3))
        bounds_hi.append(np.zeros(3))
        children.append((-1, -1))
        ranges.append((0, 0))
        while stack:
            node, start, end = stack.pop()
            idx = order[start:end]
            bounds_lo[node] = lo[idx].min(axis=0)
            bounds_hi[node] = hi[idx].max(axis=0)
            if end - start <= _LEAF_SIZE:
                children[node] = (-1, -1)
                ranges[node] = (start, end)
                continue
            c = centroid[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            local = np.argsort(c[:, axis], kind="stable")
            order[start:end] = idx[local]
            mid = start + (end - start) // 2
            left = len(bounds_lo)
            right = left + 1
            for _ in range(2):
                bounds_lo.append(np.zeros(3))
                bounds_hi.append(np.zeros(3))
                children.append((-1, -1))
                ranges.append((0, 0))
            children[node] = (left, right)
            ranges[node] = (start, end)
            stack.append((left, start, mid))
            stack.append((right, mid, end))

        self.lo = np.array(bounds_lo)
        self.hi = np.array(bounds_hi)
        self.children = np.array(children, dtype=np.int64)
        self.ranges = np.array(ranges, dtype=np.int64)
        self.order = order

    def faces_overlapping_aabb(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Indices of faces whose AABB overlaps [lo, hi] (superset of true hits)."""
        out = []
        stack = [0]
        while stack:
            node = stack.pop()
            if np.any(self.hi[node] < lo) or np.any(self.lo[node] > hi):
                continue
            l, r = self.children[node]
            if l < 0:
                s, e = self.ranges[node]
                out.append(self.order[s:e])
            else:
                stack.append(l)
                stack.append(r)
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(out)

    def faces_along_ray(self, origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Indices of faces whose AABB the ray (t >= 0) may pass through."""
        inv = np.where(direction != 0.0, 1.0 / np.where(direction == 0.0, 1.0, direction), np.inf)
        out = []
        stack = [0]
        while stack:
            node = stack.pop()
            t0 = (self.lo[node] - origin) * inv
            t1 = (self.hi[node] - origin) * inv
            near = np.minimum(t0, t1)
            far = np.maximum(t0, t1)
            # axes with zero direction: origin must lie inside the slab
            zero = direction == 0.0
            if np.any(zero & ((origin < self.lo[node]) | (origin > self.hi[node]))):
                continue
            near = np.where(zero, -np.inf, near)
            far = np.where(zero, np.inf, far)
            tn = near.max()
            tf = far.min()
            if tn > tf or tf < 0.0:
                continue
            l, r = self.children[node]
            if l < 0:
                s, e = self.ranges[node]
                out.append(self.order[s:e])
            else:
                stack.append(l)
                stack.append(r)
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(out)


@dataclass
class TriMesh:
    """Indexed triangle mesh with precomputed face data and a BVH."""

    vertices: np.ndarray
    faces: np.ndarray
    face_normals: np.ndarray = field(init=False)
    face_areas: np.ndarray = field(init=False)
    aabb: Aabb = field(init=False)
    com: np.ndarray = field(init=False)
    watertight: bool = field(init=False)
    degenerate_dropped: int = 0
    source: str = ""

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.faces.size and self.faces.max() >= len(self.vertices):
            raise MeshParseError("face index out of range")
        tri = self.vertices[self.faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        keep = areas >= DEGENERATE_AREA
        dropped = int(np.sum(~keep))
        if dropped:
            self.faces = self.faces[keep]
            tri = tri[keep]
            cross = cross[keep]
            areas = areas[keep]
            self.degenerate_dropped += dropped
            warnings.warn(f"dropped {dropped} degenerate face(s)", stacklevel=2)
        if len(self.faces) == 0:
            raise EmptyMeshError("mesh has no non-degenerate faces")
        self.tri = tri
        self.face_lo = tri.min(axis=1)
        self.face_hi = tri.max(axis=1)
        self.face_normals = cross / (2.0 * areas[:, None])
        self.face_areas = areas
        self.aabb = Aabb(self.vertices.min(axis=0), self.vertices.max(axis=0))
        self.watertight = self._check_watertight()
        self.com = self._center_of_mass()
        self.bvh = _Bvh(tri)
        self._area_cdf = np.cumsum(areas) / areas.sum()

    def _check_watertight(self) -> bool:
        # closed 2-manifold with consistent winding: every directed edge
        # appears exactly once and its reverse exactly once
        f = self.faces
        edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        fwd = set(map(tuple, edges.tolist()))
        if len(fwd) != len(edges):
            return False
        return all((b, a) in fwd for a, b in fwd)

    def _center_of_mass(self) -> np.ndarray:
        if self.watertight:
            v0, v1, v2 = self.tri[:, 0], self.tri[:, 1], self.tri[:, 2]
            vols = np.einsum("ij,ij->i", v0, np.cross(v1, v2)) / 6.0
            total = vols.sum()
            if abs(total) > 1e-9:
                centroids = (v0 + v1 + v2) / 4.0
                return (vols[:, None] * centroids).sum(axis=0) / total
        else:
            warnings.warn(
                "mesh is not watertight; using area-weighted surface centroid",
                stacklevel=3,
            )
        w = self.face_areas[:, None]
        return (self.tri.mean(axis=1) * w).sum(axis=0) / w.sum()

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    # -- queries ------------------------------------------------------------

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Point-in-mesh by crossing parity; only meaningful when watertight."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(points), dtype=bool)
        inside_aabb = self.aabb.contains(points)
        for i in np.nonzero(inside_aabb)[0]:
            cand = self.bvh.faces_along_ray(points[i], PARITY_DIR)
            ts, _ = ray_all_hits(points[i], PARITY_DIR, self.tri, t_min=0.0, face_subset=cand)
            out[i] = (len(np.unique(np.round(ts, 9))) % 2) == 1
        return out


def load_mesh(path: str | os.PathLike, scale: float = DEFAULT_SCALE) -> TriMesh:
    """Load an OBJ or STL file; coordinates are multiplied by ``scale`` (to mm)."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".obj":
        verts, faces = _parse_obj(path)
    elif ext == ".stl":
        verts, faces = _parse_stl(path)
    else:
        raise MeshParseError(f"unsupported mesh format: {ext!r}")
    if len(faces) == 0:
        raise EmptyMeshError(f"no faces in {path}")
    return TriMesh(vertices=verts * scale, faces=faces, source=os.path.basename(path))


def _parse_obj(path: str) -> tuple[np.ndarray, np.ndarray]:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif tag == "f":
                    idx = []
                    for tok in parts[1:]:
                        k = int(tok.split("/", 1)[0])
                        idx.append(k - 1 if k > 0 else len(verts) + k)
                    for j in range(1, len(idx) - 1):  # fan-triangulate polygons
                        faces.append([idx[0], idx[j], idx[j + 1]])
            except (ValueError, IndexError) as exc:
                raise MeshParseError(f"{path}:{lineno}: bad {tag!r} record") from exc
    if not verts:
        raise MeshParseError(f"{path}: no vertices")
    v = np.array(verts, dtype=float)
    f = np.array(faces, dtype=np.int64) if faces else np.empty((0, 3), dtype=np.int64)
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise MeshParseError(f"{path}: face index out of range")
    return v, f


def _parse_stl(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        head = fh.read(5)
    if head == b"solid":
        try:
            tris = _parse_stl_ascii(path)
        except MeshParseError:
            tris = _parse_stl_binary(path)  # some binary files start with 'solid'
    else:
        tris = _parse_stl_binary(path)
    if len(tris) == 0:
        raise MeshParseError(f"{path}: empty STL")
    flat = tris.reshape(-1, 3)
    verts, inverse = np.unique(flat, axis=0, return_inverse=True)
    faces = inverse.reshape(-1, 3).astype(np.int64)
    return verts, faces


def _parse_stl_ascii(path: str) -> np.ndarray:
    tris: list[list[list[float]]] = []
    cur: list[list[float]] = []
    with open(path, "r", errors="replace") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "vertex":
                try:
                    cur.append([float(x) for x in parts[1:4]])
                except (ValueError, IndexError) as exc:
                    raise MeshParseError(f"{path}: bad vertex line") from exc
                if len(cur) == 3:
                    tris.append(cur)
                    cur = []
    if cur:
        raise MeshParseError(f"{path}: dangling vertices")
    return np.array(tris, dtype=float) if tris else np.empty((0, 3, 3))


def _parse_stl_binary(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 84:
        raise MeshParseError(f"{path}: truncated STL header")
    (count,) = struct.unpack_from("<I", data, 80)
    if len(data) < 84 + 50 * count:
        raise MeshParseError(f"{path}: truncated STL body")
    raw = np.frombuffer(data, dtype=np.uint8, count=50 * count, offset=84)
    rec = raw.reshape(count, 50)
    floats = rec[:, :48].copy().view("<f4").reshape(count, 12)
    return floats[:, 3:12].astype(float).reshape(count, 3, 3)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def sample_surface(mesh: TriMesh, rng: np.random.Generator, n: int) -> list[SurfacePoint]:
    """n points drawn area-weighted uniformly over the surface."""
    pos, nrm, fid = sample_surface_arrays(mesh, rng, n)
    return [SurfacePoint(pos[i], nrm[i], int(fid[i])) for i in range(n)]


def sample_surface_arrays(
    mesh: TriMesh, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Array version of :func:`sample_surface`: (positions, normals, face_ids)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.empty((0, 3)), np.empty((0, 3)), np.empty(0, dtype=np.int64)
    u = rng.random(n)
    fid = np.searchsorted(mesh._area_cdf, u, side="right")
    fid = np.minimum(fid, len(mesh.faces) - 1)
    a = rng.random(n)
    b = rng.random(n)
    flip = a + b > 1.0
    a = np.where(flip, 1.0 - a, a)
    b = np.where(flip, 1.0 - b, b)
    t = mesh.tri[fid]
    pos = t[:, 0] + a[:, None] * (t[:, 1] - t[:, 0]) + b[:, None] * (t[:, 2] - t[:, 0])
    return pos, mesh.face_normals[fid], fid


def raycast(
    mesh: TriMesh,
    origin: np.ndarray,
    direction: np.ndarray,
    mode: str = "first",
    t_min: float = T_EPS,
):
    """Cast one ray; ``mode`` is 'first', 'farthest', or 'all'.

    Returns a RayHit (or list for 'all'); None / empty list when nothing is hit.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    cand = mesh.bvh.faces_along_ray(origin, direction)
    if mode == "all":
        ts, fs = ray_all_hits(origin, direction, mesh.tri, t_min=t_min, face_subset=cand)
        return [_hit(mesh, origin, direction, t, f) for t, f in zip(ts, fs)]
    if mode not in ("first", "farthest"):
        raise ValueError(f"unknown raycast mode {mode!r}")
    if len(cand) == 0:
        return None
    t, f = ray_hits_reduce(
        origin[None, :],
        direction[None, :],
        mesh.tri,
        t_min=t_min,
        farthest=(mode == "farthest"),
        face_subset=cand,
    )
    if f[0] < 0:
        return None
    return _hit(mesh, origin, direction, float(t[0]), int(f[0]))


def _hit(mesh: TriMesh, origin, direction, t: float, face: int) -> RayHit:
    return RayHit(
        t=float(t),
        position=origin + t * direction,
        normal=mesh.face_normals[face],
        face_index=int(face),
    )


def volume_intersects(mesh: TriMesh, box: OrientedBox) -> bool:
    """True iff any face intersects the box, or the box sits inside a closed mesh."""
    ab = box.world_aabb()
    cand = mesh.bvh.faces_overlapping_aabb(ab.lo - 1e-9, ab.hi + 1e-9)
    if len(cand):
        local = (mesh.tri[cand] - box.center) @ box.rot
        if bool(np.any(tris_intersect_box(local, box.half))):
            return True
    if mesh.watertight:
        return bool(mesh.contains(box.center[None, :])[0])
    return False
