import struct

import numpy as np
import pytest
from scipy.stats import chisquare

from graspcover.errors import EmptyMeshError, MeshParseError
from graspcover.geometry import OrientedBox, ray_all_hits, tris_intersect_box, uniform_directions
from graspcover.mesh import load_mesh, raycast, sample_surface, sample_surface_arrays, volume_intersects
from graspcover.primitives import BUILTIN, cube, write_obj
from graspcover.se3 import so3_grid
from graspcover.geometry import quat_to_matrix


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def test_load_unit_cube_obj(tmp_path):
    p = tmp_path / "unit.obj"
    write_obj(cube(1000.0), p)  # 1 m cube in file units
    m = load_mesh(p)
    assert len(m.vertices) == 8 and len(m.faces) == 12
    assert m.total_area == pytest.approx(6.0 * 1000.0**2, rel=1e-9)


def test_load_cube_20mm(tmp_path):
    p = tmp_path / "cube.obj"
    write_obj(cube(20.0), p)
    m = load_mesh(p)
    assert m.total_area == pytest.approx(2400.0, rel=1e-9)
    assert np.allclose(m.com, 0.0, atol=1e-9)
    assert m.watertight


def test_degenerate_face_dropped(tmp_path):
    p = tmp_path / "degen.obj"
    p.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\n"
        "f 1 2 3\n"  # valid
        "f 1 2 4\n"  # collinear, zero area
    )
    with pytest.warns(UserWarning, match="degenerate"):
        m = load_mesh(p)
    assert len(m.faces) == 1
    assert m.degenerate_dropped == 1


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_mesh("/nonexistent/mesh.obj")


def test_bad_obj(tmp_path):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0\nf 1 2 3\n")
    with pytest.raises(MeshParseError):
        load_mesh(p)


def test_empty_mesh(tmp_path):
    p = tmp_path / "empty.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\n")
    with pytest.raises(EmptyMeshError):
        load_mesh(p)


def test_stl_binary_roundtrip(tmp_path):
    m = cube(20.0)
    p = tmp_path / "cube.stl"
    tris = (m.tri / 1000.0).astype("<f4")
    with open(p, "wb") as fh:
        fh.write(b"\0" * 80)
        fh.write(struct.pack("<I", len(tris)))
        for t in tris:
            fh.write(np.zeros(3, dtype="<f4").tobytes())
            fh.write(t.tobytes())
            fh.write(b"\0\0")
    loaded = load_mesh(p)
    assert loaded.total_area == pytest.approx(2400.0, rel=1e-6)
    assert loaded.watertight  # exact-duplicate vertices are welded


def test_stl_ascii(tmp_path):
    p = tmp_path / "tri.stl"
    p.write_text(
        "solid t\n facet normal 0 0 1\n  outer loop\n"
        "   vertex 0 0 0\n   vertex 1 0 0\n   vertex 0 1 0\n"
        "  endloop\n endfacet\nendsolid t\n"
    )
    m = load_mesh(p, scale=1.0)
    assert len(m.faces) == 1
    assert m.total_area == pytest.approx(0.5)


def test_builtin_meshes_watertight():
    for name, fn in BUILTIN.items():
        m = fn()
        assert m.watertight, name
        assert m.total_area > 0.0


def test_non_watertight_fallback(tmp_path):
    m = cube(20.0)
    p = tmp_path / "open.obj"
    with open(p, "w") as fh:
        for v in m.vertices / 1000.0:
            fh.write(f"v {v[0]} {v[1]} {v[2]}\n")
        for f in m.faces[:-1] + 1:  # drop one face
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")
    with pytest.warns(UserWarning, match="watertight"):
        loaded = load_mesh(p)
    assert not loaded.watertight


# ---------------------------------------------------------------------------
# surface sampling
# ---------------------------------------------------------------------------

def test_sample_surface_zero(cube20, rng):
    assert sample_surface(cube20, rng, 0) == []


def test_sample_surface_uniformity(cube20, rng):
    pos, nrm, fid = sample_surface_arrays(cube20, rng, 60_000)
    counts = np.bincount(fid, minlength=12)
    frac = counts / 60_000.0
    assert np.all(np.abs(frac - 1.0 / 12.0) < 0.005)
    assert chisquare(counts).pvalue > 0.01


def test_sample_surface_on_faces(cube20, rng):
    pos, nrm, fid = sample_surface_arrays(cube20, rng, 2000)
    # every point satisfies the plane equation of its face
    v0 = cube20.tri[fid, 0]
    d = np.abs(np.sum((pos - v0) * cube20.face_normals[fid], axis=1))
    assert d.max() < 1e-6
    assert np.allclose(nrm, cube20.face_normals[fid], atol=0.0)


def test_sample_surface_deterministic(cube20):
    a = sample_surface_arrays(cube20, np.random.default_rng(9), 100)
    b = sample_surface_arrays(cube20, np.random.default_rng(9), 100)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_sample_surface_chisquare_large(cube20, rng):
    _, _, fid = sample_surface_arrays(cube20, rng, 100_000)
    counts = np.bincount(fid, minlength=12)
    assert chisquare(counts).pvalue > 0.01


# ---------------------------------------------------------------------------
# ray casting
# ---------------------------------------------------------------------------

def test_raycast_cube_analytic(cube20):
    o = np.array([-100.0, 0.0, 0.0])
    d = np.array([1.0, 0.0, 0.0])
    first = raycast(cube20, o, d, mode="first")
    far = raycast(cube20, o, d, mode="farthest")
    assert first.t == pytest.approx(90.0, abs=1e-9)
    assert np.allclose(first.position, [-10.0, 0.0, 0.0], atol=1e-9)
    assert far.t == pytest.approx(110.0, abs=1e-9)
    assert np.allclose(far.position, [10.0, 0.0, 0.0], atol=1e-9)
    assert raycast(cube20, o + np.array([0.0, 50.0, 0.0]), d) is None
    # off the face diagonals a through-ray reports exactly one entry, one exit
    hits = raycast(cube20, np.array([-100.0, 3.0, 4.0]), d, mode="all")
    assert [h.t for h in hits] == sorted(h.t for h in hits)
    assert len(hits) == 2
    assert hits[0].t == pytest.approx(90.0, abs=1e-9)
    assert hits[1].t == pytest.approx(110.0, abs=1e-9)


def _brute_raycast(mesh, o, d, mode):
    ts, fs = ray_all_hits(o, d, mesh.tri, t_min=1e-4)
    if len(ts) == 0:
        return None
    if mode == "first":
        return ts[0], fs[0]
    return ts[-1], fs[-1]


@pytest.mark.parametrize("mesh_name", ["cube", "cylinder", "l_bracket", "cup"])
def test_raycast_matches_brute_force(mesh_name, rng):
    mesh = BUILTIN[mesh_name]()
    n = 1000
    origins = rng.uniform(-60, 60, (n, 3))
    dirs = uniform_directions(rng, n)
    for mode in ("first", "farthest"):
        for i in range(n):
            got = raycast(mesh, origins[i], dirs[i], mode=mode)
            want = _brute_raycast(mesh, origins[i], dirs[i], mode)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert got.t == pytest.approx(want[0], abs=1e-6)


def test_raycast_forward_backward(cube20, rng):
    n = 300
    origins = rng.uniform(-80, 80, (n, 3))
    dirs = uniform_directions(rng, n)
    for i in range(n):
        fwd = raycast(cube20, origins[i], dirs[i], mode="all")
        if not fwd:
            continue
        far = fwd[-1]
        back_origin = origins[i] + (far.t + 50.0) * dirs[i]
        back = raycast(cube20, back_origin, -dirs[i], mode="all")
        a = sorted(np.round([h.t for h in fwd], 6))
        b = sorted(np.round([far.t + 50.0 - h.t for h in back], 6))
        assert a == b


# ---------------------------------------------------------------------------
# volume queries
# ---------------------------------------------------------------------------

def _brute_volume_intersects(mesh, box):
    local = (mesh.tri - box.center) @ box.rot
    if bool(np.any(tris_intersect_box(local, box.half))):
        return True
    if mesh.watertight:
        return bool(mesh.contains(box.center[None, :])[0])
    return False


def test_volume_intersects_trivial(cube20):
    assert volume_intersects(cube20, OrientedBox([0, 0, 0], [5, 5, 5], np.eye(3)))
    assert not volume_intersects(cube20, OrientedBox([1000, 0, 0], [5, 5, 5], np.eye(3)))
    assert volume_intersects(cube20, OrientedBox([0, 0, 0], [1, 1, 1], np.eye(3)))  # inside


@pytest.mark.parametrize("mesh_name", ["cube", "plate", "l_bracket", "cup"])
def test_volume_intersects_matches_brute_force(mesh_name, rng):
    mesh = BUILTIN[mesh_name]()
    quats = so3_grid(90.0)
    n = 500
    centers = rng.uniform(-50, 50, (n, 3))
    halves = rng.uniform(0.5, 25.0, (n, 3))
    qidx = rng.integers(0, len(quats), n)
    for i in range(n):
        box = OrientedBox(centers[i], halves[i], quat_to_matrix(quats[qidx[i]]))
        assert volume_intersects(mesh, box) == _brute_volume_intersects(mesh, box)
