"""The four evaluated grasp-sampling scheme families.

Every scheme produces a deterministic stream of candidate poses with a
validity label attached; the stream ends once ``n`` valid candidates have
been emitted (or the attempt budget runs out).  Streams are functions of
(mesh, gripper, spec) only: randomness comes from ``spec.seed`` and is
consumed in fixed-size chunks so results never depend on consumer pacing.

Standoff conventions (resolved so every scheme can actually reach the
object): the approach-based scheme plunges the fingertip plane ``s`` mm
past the anchor surface point along the sampled direction (s in
[0, finger_length]: 0 = tips at the surface, max = palm at the surface);
the antipodal scheme slides the hand so the contact midpoint sits ``|s|``
mm behind the fingertip plane (s in [s_min, 0] <= 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .geometry import (
    Aabb,
    cap_directions_about,
    matrix_to_quat,
    perp_basis_rows,
    quat_to_matrix,
    uniform_directions,
    uniform_quats,
    T_EPS,
    ray_hits_reduce,
)
from .gripper import GripperSpec, Validity, check_validity_batch, dilated_bounds
from .mesh import TriMesh, sample_surface_arrays
from .se3 import Pose, sample_uniform_poses

CHUNK = 8192
DEFAULT_LINE_SPACING = 5.0  # mm, matches the default translation grid step

KINDS = ("uniform", "line_com", "approach", "antipodal")


def _fmt_angle(x: float) -> str:
    """Compact label for common multiples of pi (0, pi/6, pi/2, ...)."""
    if x == 0.0:
        return "0"
    frac = Fraction(x / math.pi).limit_denominator(12)
    if abs(float(frac) * math.pi - x) < 1e-12 and frac.denominator <= 12:
        num, den = frac.numerator, frac.denominator
        s = "pi" if num == 1 else f"{num}pi"
        return s if den == 1 else f"{s}/{den}"
    return f"{x:.3g}"


@dataclass(frozen=True)
class SamplerSpec:
    """Which scheme to run and its parameters (angles in radians, s_min <= 0 mm).

    ``seed`` may be an int or a tuple of ints (entropy words for the RNG).
    """

    kind: str
    alpha: float = 0.0
    beta: float = 0.0
    s_min: float = 0.0
    seed: int | tuple[int, ...] = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if not (0.0 <= self.alpha <= math.pi and 0.0 <= self.beta <= math.pi):
            raise ValueError("alpha and beta must lie in [0, pi]")
        if self.s_min > 0.0:
            raise ValueError("s_min must be <= 0")

    @property
    def label(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        if self.kind == "line_com":
            return "line_com"
        if self.kind == "approach":
            return f"approach({_fmt_angle(self.alpha)},{_fmt_angle(self.beta)})"
        if self.s_min == 0.0:
            return f"antipodal({_fmt_angle(self.alpha)})"
        return f"antipodal({_fmt_angle(self.alpha)},{self.s_min:g})"


@dataclass(frozen=True)
class CandidateGrasp:
    pose: Pose
    validity: Validity
    sampler_attempt_index: int


@dataclass
class CandidateBatch:
    """Struct-of-arrays slice of a sampler stream (candidates in stream order)."""

    positions: np.ndarray
    quats: np.ndarray
    validity: np.ndarray  # uint8 Validity codes
    attempt_index: np.ndarray  # global attempt number per candidate
    attempts_total: int  # attempts consumed through the end of this batch
    construction_rejects: int  # attempts that never produced a candidate pose
    exhausted: bool = False  # budget ran out before n valid


def default_attempt_budget(n: int) -> int:
    return max(1_000_000, 1000 * n)


# ---------------------------------------------------------------------------
# per-scheme chunk constructors: draw a fixed block of attempts, return
# (positions, quats, attempt_offsets, rejects) for the candidates produced
# ---------------------------------------------------------------------------

def _chunk_uniform(mesh, gripper, spec, rng, bounds, m):
    pos, quat = sample_uniform_poses(bounds, rng, m)
    return pos, quat, np.arange(m), 0


def _chunk_approach(mesh, gripper, spec, rng, bounds, m):
    sp, normals, _ = sample_surface_arrays(mesh, rng, m)
    d = cap_directions_about(rng, normals, spec.alpha)
    lo, hi = gripper.standoff_range
    s = lo + rng.random(m) * (hi - lo)
    a = cap_directions_about(rng, d, spec.beta)
    roll = 2.0 * np.pi * rng.random(m)
    approach_w = -a
    e1, e2 = perp_basis_rows(approach_w)
    closing_w = np.cos(roll)[:, None] * e1 + np.sin(roll)[:, None] * e2
    lateral_w = np.cross(approach_w, closing_w)
    rot = np.stack([closing_w, lateral_w, approach_w], axis=2)
    quat = matrix_to_quat(rot)
    pos = sp - s[:, None] * d
    return pos, quat, np.arange(m), 0


def _chunk_antipodal(mesh, gripper, spec, rng, bounds, m):
    sp, normals, _ = sample_surface_arrays(mesh, rng, m)
    ray = cap_directions_about(rng, -normals, spec.alpha)
    roll = 2.0 * np.pi * rng.random(m)
    s = spec.s_min + rng.random(m) * (0.0 - spec.s_min)
    t, f = ray_hits_reduce(sp, ray, mesh.tri, t_min=T_EPS, farthest=True)
    keep = (f >= 0) & (t <= gripper.max_opening)
    idx = np.nonzero(keep)[0]
    rejects = m - len(idx)
    if not len(idx):
        return np.empty((0, 3)), np.empty((0, 4)), np.empty(0, dtype=int), rejects
    closing_w = ray[idx]
    mid = sp[idx] + 0.5 * t[idx, None] * closing_w
    e1, e2 = perp_basis_rows(closing_w)
    rr = roll[idx]
    approach_w = np.cos(rr)[:, None] * e1 + np.sin(rr)[:, None] * e2
    lateral_w = np.cross(approach_w, closing_w)
    rot = np.stack([closing_w, lateral_w, approach_w], axis=2)
    quat = matrix_to_quat(rot)
    pos = mid - s[idx, None] * approach_w
    return pos, quat, idx, rejects


class _LineComChunker:
    """Whole-line batches: each line contributes its lattice of points."""

    def __init__(self, mesh, spacing: float, bounds: Aabb):
        self.com = mesh.com
        self.spacing = spacing
        self.bounds = bounds

    def __call__(self, mesh, gripper, spec, rng, bounds, m):
        pos_parts, quat_parts = [], []
        produced = 0
        attempts = 0
        while produced < m:
            u = uniform_directions(rng, 1)[0]
            t0, t1 = self._clip(u)
            if t0 > t1:
                continue
            ks = np.arange(math.ceil(t0 / self.spacing), math.floor(t1 / self.spacing) + 1)
            if len(ks) == 0:
                continue
            pts = self.com[None, :] + (ks * self.spacing)[:, None] * u[None, :]
            pos_parts.append(pts)
            quat_parts.append(uniform_quats(rng, len(ks)))
            produced += len(ks)
        pos = np.concatenate(pos_parts)
        quat = np.concatenate(quat_parts)
        return pos, quat, np.arange(len(pos)), 0

    def _clip(self, u: np.ndarray) -> tuple[float, float]:
        t0, t1 = -np.inf, np.inf
        for k in range(3):
            if u[k] == 0.0:
                if not (self.bounds.lo[k] <= self.com[k] <= self.bounds.hi[k]):
                    return 1.0, 0.0
                continue
            a = (self.bounds.lo[k] - self.com[k]) / u[k]
            b = (self.bounds.hi[k] - self.com[k]) / u[k]
            t0 = max(t0, min(a, b))
            t1 = min(t1, max(a, b))
        return t0, t1


_CHUNKERS = {
    "uniform": _chunk_uniform,
    "approach": _chunk_approach,
    "antipodal": _chunk_antipodal,
}


def sample_candidate_batches(
    mesh: TriMesh,
    gripper: GripperSpec,
    spec: SamplerSpec,
    n: int,
    line_spacing: float = DEFAULT_LINE_SPACING,
    max_attempts: int | None = None,
) -> Iterator[CandidateBatch]:
    """Deterministic candidate stream in fixed-size chunks, ending at n valid."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return
    budget = default_attempt_budget(n) if max_attempts is None else max_attempts
    rng = np.random.default_rng(spec.seed)
    bounds = dilated_bounds(mesh.aabb, gripper)
    if spec.kind == "line_com":
        chunk_fn = _LineComChunker(mesh, line_spacing, bounds)
    else:
        chunk_fn = _CHUNKERS[spec.kind]

    attempts = 0
    rejects = 0
    valid_seen = 0
    while valid_seen < n and attempts < budget:
        pos, quat, offsets, _ = chunk_fn(mesh, gripper, spec, rng, bounds, CHUNK)
        chunk_attempts = CHUNK if spec.kind != "line_com" else len(pos)
        if len(pos):
            codes = check_validity_batch(mesh, quat_to_matrix(quat), pos, gripper)
        else:
            codes = np.empty(0, dtype=np.uint8)
        new_valid = int(np.sum(codes == Validity.VALID))
        cut = len(pos)
        if valid_seen + new_valid >= n:
            # truncate right after the attempt that produced the n-th valid
            which = np.nonzero(codes == Validity.VALID)[0]
            cut = int(which[n - valid_seen - 1]) + 1
            chunk_attempts = int(offsets[cut - 1]) + 1
            new_valid = n - valid_seen
        valid_seen += new_valid
        rejects += chunk_attempts - cut  # attempts that produced no candidate
        batch = CandidateBatch(
            positions=pos[:cut],
            quats=quat[:cut],
            validity=codes[:cut],
            attempt_index=attempts + offsets[:cut],
            attempts_total=attempts + chunk_attempts,
            construction_rejects=rejects,
            exhausted=False,
        )
        attempts += chunk_attempts
        yield batch
    if valid_seen < n:
        yield CandidateBatch(
            positions=np.empty((0, 3)),
            quats=np.empty((0, 4)),
            validity=np.empty(0, dtype=np.uint8),
            attempt_index=np.empty(0, dtype=int),
            attempts_total=attempts,
            construction_rejects=rejects,
            exhausted=True,
        )


def _stream(mesh, gripper, spec, n, **kw) -> Iterator[CandidateGrasp]:
    for batch in sample_candidate_batches(mesh, gripper, spec, n, **kw):
        for i in range(len(batch.positions)):
            yield CandidateGrasp(
                pose=Pose(batch.positions[i], batch.quats[i]),
                validity=Validity(int(batch.validity[i])),
                sampler_attempt_index=int(batch.attempt_index[i]),
            )


def sample_uniform(mesh, gripper, spec: SamplerSpec, n: int, **kw) -> Iterator[CandidateGrasp]:
    """Positions uniform over the dilated AABB, orientations uniform on SO(3)."""
    assert spec.kind == "uniform"
    return _stream(mesh, gripper, spec, n, **kw)


def sample_line_com(mesh, gripper, spec: SamplerSpec, n: int, **kw) -> Iterator[CandidateGrasp]:
    """Evenly spaced points on uniformly directed lines through the COM."""
    assert spec.kind == "line_com"
    return _stream(mesh, gripper, spec, n, **kw)


def sample_approach(mesh, gripper, spec: SamplerSpec, n: int, **kw) -> Iterator[CandidateGrasp]:
    """Surface-normal-guided approach poses with cone jitters alpha/beta."""
    assert spec.kind == "approach"
    return _stream(mesh, gripper, spec, n, **kw)


def sample_antipodal(mesh, gripper, spec: SamplerSpec, n: int, **kw) -> Iterator[CandidateGrasp]:
    """Contact-pair-guided poses: farthest intersection along a cone ray."""
    assert spec.kind == "antipodal"
    return _stream(mesh, gripper, spec, n, **kw)
