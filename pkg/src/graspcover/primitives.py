"""Built-in desk-scale test meshes (generated, watertight unless noted).

All generators take dimensions in mm and return a TriMesh; ``write_obj``
emits them in meters so files round-trip through the default loader scale.
"""
from __future__ import annotations

import os

import numpy as np

from .geometry import icosphere
from .mesh import TriMesh


def _mesh(verts: np.ndarray, faces: np.ndarray, name: str) -> TriMesh:
    return TriMesh(vertices=np.asarray(verts, dtype=float), faces=np.asarray(faces, np.int64), source=name)


def box_mesh(sx: float, sy: float, sz: float, center=(0.0, 0.0, 0.0), name: str = "box") -> TriMesh:
    """Axis-aligned solid box, 12 triangles, outward winding."""
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    c = np.asarray(center, dtype=float)
    v = np.array(
        [
            [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
            [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
        ]
    ) + c
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # -z
            [4, 5, 6], [4, 6, 7],  # +z
            [0, 1, 5], [0, 5, 4],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [1, 2, 6], [1, 6, 5],  # +x
            [3, 0, 4], [3, 4, 7],  # -x
        ]
    )
    return _mesh(v, f, name)


def cube(edge: float = 20.0) -> TriMesh:
    return box_mesh(edge, edge, edge, name="cube")


def plate(sx: float = 60.0, sy: float = 40.0, sz: float = 2.0) -> TriMesh:
    return box_mesh(sx, sy, sz, name="plate")


def l_bracket(outer: float = 40.0, thickness: float = 12.0, depth: float = 20.0) -> TriMesh:
    """L-shaped prism: outer x outer footprint, two arms of given thickness."""
    o, t = outer, thickness
    # L outline (CCW in xy), centered later
    poly = np.array([[0, 0], [o, 0], [o, t], [t, t], [t, o], [0, o]], dtype=float)
    poly -= poly.mean(axis=0)
    hz = depth / 2.0
    n = len(poly)
    v_bot = np.column_stack([poly, np.full(n, -hz)])
    v_top = np.column_stack([poly, np.full(n, hz)])
    verts = np.vstack([v_bot, v_top])
    # fixed fan-free triangulation of the L hexagon (indices into poly)
    caps = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 5], [3, 4, 5]])
    faces = []
    for a, b, c in caps:
        faces.append([a, c, b])              # bottom, wound to face -z
        faces.append([a + n, b + n, c + n])  # top, +z
    for i in range(n):
        j = (i + 1) % n
        faces.append([i, j, j + n])
        faces.append([i, j + n, i + n])
    return _mesh(verts, np.array(faces), "l_bracket")


def cylinder(radius: float = 15.0, height: float = 40.0, segments: int = 24) -> TriMesh:
    a = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([radius * np.cos(a), radius * np.sin(a)])
    hz = height / 2.0
    bot = np.column_stack([ring, np.full(segments, -hz)])
    top = np.column_stack([ring, np.full(segments, hz)])
    verts = np.vstack([bot, top, [[0, 0, -hz]], [[0, 0, hz]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces.append([i, j, j + segments])
        faces.append([i, j + segments, i + segments])
        faces.append([cb, j, i])
        faces.append([ct, i + segments, j + segments])
    return _mesh(verts, np.array(faces), "cylinder")


def cup(
    outer_radius: float = 15.0,
    inner_radius: float = 12.0,
    height: float = 40.0,
    floor: float = 4.0,
    segments: int = 24,
) -> TriMesh:
    """Mug-like open cup: watertight solid with an inner cavity."""
    a = 2.0 * np.pi * np.arange(segments) / segments
    co, si = np.cos(a), np.sin(a)
    hz = height / 2.0
    ob = np.column_stack([outer_radius * co, outer_radius * si, np.full(segments, -hz)])
    ot = np.column_stack([outer_radius * co, outer_radius * si, np.full(segments, hz)])
    it = np.column_stack([inner_radius * co, inner_radius * si, np.full(segments, hz)])
    ib = np.column_stack([inner_radius * co, inner_radius * si, np.full(segments, -hz + floor)])
    verts = np.vstack([ob, ot, it, ib, [[0, 0, -hz]], [[0, 0, -hz + floor]]])
    cb = 4 * segments
    cf = 4 * segments + 1
    s = segments
    faces = []
    for i in range(s):
        j = (i + 1) % s
        faces.append([i, j, j + s]);         faces.append([i, j + s, i + s])          # outer wall
        faces.append([i + s, j + s, j + 2 * s]); faces.append([i + s, j + 2 * s, i + 2 * s])  # rim
        faces.append([i + 2 * s, j + 2 * s, j + 3 * s]); faces.append([i + 2 * s, j + 3 * s, i + 3 * s])  # inner wall
        faces.append([cb, j, i])                                  # outer bottom
        faces.append([cf, i + 3 * s, j + 3 * s])                  # cavity floor
    return _mesh(verts, np.array(faces), "cup")


def sphere(radius: float = 12.0, depth: int = 2) -> TriMesh:
    v, f = icosphere(depth)
    return _mesh(v * radius, f, "sphere")


BUILTIN = {
    "cube": cube,
    "plate": plate,
    "l_bracket": l_bracket,
    "cylinder": cylinder,
    "cup": cup,
    "sphere": sphere,
}


def write_obj(mesh: TriMesh, path: str | os.PathLike, scale: float = 1e-3) -> None:
    """Write vertices/faces as OBJ; default scale converts mm back to meters."""
    with open(path, "w") as fh:
        fh.write(f"# graspcover primitive: {mesh.source}\n")
        for v in mesh.vertices * scale:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


def write_builtin_meshes(out_dir: str | os.PathLike, names=None) -> list[str]:
    """Write the builtin meshes as OBJ files (meters); returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in names or sorted(BUILTIN):
        m = BUILTIN[name]()
        p = os.path.join(os.fspath(out_dir), f"{name}.obj")
        write_obj(m, p)
        paths.append(p)
    return paths
