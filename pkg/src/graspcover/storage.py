"""Persistence: reference binaries (+ JSON sidecars), report CSVs, manifests.

Reference files are a small binary container (magic, version, JSON header,
raw arrays) because dense grids produce hundreds of thousands of poses; a
sidecar JSON carries the counts for quick inspection.  All writes go
through an atomic replace.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
from dataclasses import asdict

import numpy as np

from .errors import MeshParseError, ReferenceMismatchError
from .geometry import Aabb
from .gripper import GripperSpec
from .oracle import ReferenceSet
from .se3 import GridSpec

MAGIC = b"GCREF\x00"
FORMAT_VERSION = 1

REPORT_COLUMNS = [
    "object_id", "sampler", "seed", "n_valid", "attempts", "eps", "gamma",
    "cov1", "cov2", "cov3", "precision", "wall_ms", "config_hash",
]
TIMING_COLUMNS = ("wall_ms",)

AGGREGATE_COLUMNS = [
    "sampler", "n_valid", "eps", "gamma", "n_cells",
    "cov1_mean", "cov1_std", "cov2_mean", "cov2_std",
    "cov3_mean", "cov3_std", "precision_mean", "precision_std",
]


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# reference binary
# ---------------------------------------------------------------------------

def _grid_to_dict(grid: GridSpec) -> dict:
    return {
        "translation_step": grid.translation_step,
        "rotation_step": grid.rotation_step,
        "bounds_lo": list(grid.bounds.lo),
        "bounds_hi": list(grid.bounds.hi),
    }


def _grid_from_dict(d: dict) -> GridSpec:
    return GridSpec(
        translation_step=d["translation_step"],
        rotation_step=d["rotation_step"],
        bounds=Aabb(np.array(d["bounds_lo"]), np.array(d["bounds_hi"])),
    )


def save_reference(ref: ReferenceSet, path: str | os.PathLike, reference_key: str = "") -> None:
    n = len(ref)
    header = {
        "object_id": ref.object_id,
        "grid": _grid_to_dict(ref.grid),
        "gripper": asdict(ref.gripper),
        "mu": ref.mu,
        "oracle_version": ref.oracle_version,
        "counts": ref.counts,
        "watertight": ref.watertight,
        "mesh_source": ref.mesh_source,
        "has_robustness": ref.robustness is not None,
        "n": n,
        "reference_key": reference_key,
    }
    hjson = canonical_json(header).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HI", FORMAT_VERSION, len(hjson)))
    buf.write(hjson)
    buf.write(np.ascontiguousarray(ref.positions, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(ref.quats, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(ref.orientation_index, dtype="<i4").tobytes())
    buf.write(np.packbits(ref.success.astype(bool)).tobytes())
    buf.write(np.ascontiguousarray(ref.jaw_width, dtype="<f4").tobytes())
    buf.write(np.ascontiguousarray(ref.quality, dtype="<f4").tobytes())
    if ref.robustness is not None:
        buf.write(np.ascontiguousarray(ref.robustness, dtype="<f4").tobytes())
    atomic_write_bytes(path, buf.getvalue())
    atomic_write_text(os.fspath(path) + ".json", canonical_json(header) + "\n")


def load_reference(path: str | os.PathLike) -> tuple[ReferenceSet, str]:
    """Returns (reference, reference_key)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MAGIC)] != MAGIC:
        raise MeshParseError(f"{path}: not a reference file")
    ver, hlen = struct.unpack_from("<HI", data, len(MAGIC))
    if ver != FORMAT_VERSION:
        raise ReferenceMismatchError(f"{path}: unsupported version {ver}")
    off = len(MAGIC) + 6
    header = json.loads(data[off : off + hlen].decode("utf-8"))
    off += hlen
    n = header["n"]

    def take(dtype, shape):
        nonlocal off
        a = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)), offset=off)
        off += a.nbytes
        return a.reshape(shape).copy()

    positions = take("<f8", (n, 3))
    quats = take("<f8", (n, 4))
    oidx = take("<i4", (n,)).astype(np.int32)
    nbytes = (n + 7) // 8
    success = np.unpackbits(
        np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=off), count=n
    ).astype(bool)
    off += nbytes
    jaw = take("<f4", (n,)).astype(float)
    quality = take("<f4", (n,)).astype(float)
    robustness = None
    if header["has_robustness"]:
        robustness = take("<f4", (n,)).astype(float)
    ref = ReferenceSet(
        object_id=header["object_id"],
        grid=_grid_from_dict(header["grid"]),
        gripper=GripperSpec(**{
            k: tuple(v) if isinstance(v, list) else v
            for k, v in header["gripper"].items()
        }),
        mu=header["mu"],
        oracle_version=header["oracle_version"],
        positions=positions,
        quats=quats,
        orientation_index=oidx,
        success=success,
        jaw_width=jaw,
        quality=quality,
        counts=header["counts"],
        watertight=header["watertight"],
        mesh_source=header["mesh_source"],
        robustness=robustness,
    )
    return ref, header.get("reference_key", "")


# ---------------------------------------------------------------------------
# CSV reports
# ---------------------------------------------------------------------------

def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str | os.PathLike, rows: list[dict], columns: list[str]) -> None:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt_cell(r.get(c)) for c in columns])
    atomic_write_text(path, out.getvalue())


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return list(reader.fieldnames or []), list(reader)


def canonical_report_hash(path: str | os.PathLike, exclude: tuple[str, ...] = TIMING_COLUMNS) -> str:
    """Hash of a report CSV with timing columns masked out."""
    cols, rows = read_csv(path)
    keep = [c for c in cols if c not in exclude]
    payload = canonical_json({"columns": keep, "rows": [[r[c] for c in keep] for r in rows]})
    return sha256_hex(payload.encode("utf-8"))
