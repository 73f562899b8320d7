"""SE(3) nearest-neighbor index and the coverage/precision/robustness metrics.

The index embeds poses as (omega * position, quaternion) in R^7 and stores
both quaternion signs.  The Euclidean embedding distance never exceeds the
pose distance (chord <= arc on the rotation part), so k-NN probes plus a
ball query at the best exact distance give provably exact results under
the non-Euclidean metric.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import quat_geodesic
from .errors import (
    EmptyInputError,
    EmptyReferenceError,
    MissingRobustnessError,
    NoValidSamplesError,
)
from .gripper import Validity
from .oracle import ReferenceSet
from .se3 import MetricParams

_BALL_PAD = 1e-12


@dataclass
class GraspSet:
    """Ordered pose collection with optional labels and provenance."""

    positions: np.ndarray
    quats: np.ndarray
    success: np.ndarray | None = None
    robustness: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.positions)


def build_index(poses, params: MetricParams) -> "PoseIndex":
    """Index over a GraspSet, a list of Pose, or an (positions, quats) pair."""
    if isinstance(poses, (GraspSet, tuple)):
        p, q = _as_arrays(poses)
    else:
        p = np.array([g.p for g in poses])
        q = np.array([g.q for g in poses])
    return PoseIndex(p, q, params)


class PoseIndex:
    """Exact nearest/range queries under the weighted SE(3) distance."""

    def __init__(self, positions: np.ndarray, quats: np.ndarray, params: MetricParams):
        if len(positions) == 0:
            raise EmptyInputError("cannot index an empty pose set")
        self.params = params
        self.positions = np.ascontiguousarray(positions, dtype=float)
        self.quats = np.ascontiguousarray(quats, dtype=float)
        self.n = len(positions)
        emb = self._embed(self.positions, self.quats)
        flipped = emb.copy()
        flipped[:, 3:] *= -1.0
        self._tree = cKDTree(np.vstack([emb, flipped]))

    def _embed(self, positions, quats) -> np.ndarray:
        return np.hstack([self.params.omega * positions, quats])

    def _exact(self, positions, quats, idx) -> np.ndarray:
        """Exact distances from query rows to candidate index rows (m, k)."""
        dt = np.linalg.norm(self.positions[idx] - positions[:, None, :], axis=2)
        dq = quat_geodesic(self.quats[idx], quats[:, None, :])
        return self.params.omega * dt + dq

    def nearest_many(
        self, positions: np.ndarray, quats: np.ndarray, k_probe: int = 16
    ) -> tuple[np.ndarray, np.ndarray]:
        """(indices, distances) of the exact nearest stored pose per query."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        quats = np.atleast_2d(np.asarray(quats, dtype=float))
        m = len(positions)
        qe = self._embed(positions, quats)
        k = min(k_probe, 2 * self.n)
        ed, ei = self._tree.query(qe, k=k)
        if k == 1:
            ed = ed[:, None]
            ei = ei[:, None]
        cand = ei % self.n
        rho = self._exact(positions, quats, cand)
        best_col = np.argmin(rho, axis=1)
        rows = np.arange(m)
        best_idx = cand[rows, best_col]
        best_rho = rho[rows, best_col]
        # points beyond the k-th probe have embedding distance >= ed[:, -1]
        # and true distance >= embedding distance, so they cannot improve
        unresolved = np.nonzero(ed[:, -1] < best_rho)[0]
        for i in unresolved:
            ball = np.unique(np.asarray(self._tree.query_ball_point(qe[i], best_rho[i] + _BALL_PAD)) % self.n)
            r = self._exact(positions[i : i + 1], quats[i : i + 1], ball[None, :])[0]
            j = int(np.argmin(r))
            best_idx[i] = ball[j]
            best_rho[i] = r[j]
        return best_idx, best_rho

    def nearest(self, position, quat) -> tuple[int, float]:
        idx, d = self.nearest_many(position, quat)
        return int(idx[0]), float(d[0])

    def within_many(self, positions: np.ndarray, quats: np.ndarray, radius: float) -> list[np.ndarray]:
        """Indices (sorted, unique) of stored poses within ``radius`` per query."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        quats = np.atleast_2d(np.asarray(quats, dtype=float))
        qe = self._embed(positions, quats)
        balls = self._tree.query_ball_point(qe, radius + _BALL_PAD)
        out = []
        for i, ball in enumerate(balls):
            if len(ball) == 0:
                out.append(np.empty(0, dtype=np.int64))
                continue
            cand = np.unique(np.asarray(ball, dtype=np.int64) % self.n)
            r = self._exact(positions[i : i + 1], quats[i : i + 1], cand[None, :])[0]
            out.append(cand[r <= radius])
        return out

    def within(self, position, quat, radius: float) -> np.ndarray:
        return self.within_many(position, quat, radius)[0]


# ---------------------------------------------------------------------------
# coverage metrics
# ---------------------------------------------------------------------------

def _as_arrays(x) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, GraspSet):
        return x.positions, x.quats
    if isinstance(x, ReferenceSet):
        return x.positions, x.quats
    pos, quat = x
    return np.asarray(pos, dtype=float), np.asarray(quat, dtype=float)


def min_dists_to_samples(samples, reference, params: MetricParams, index: PoseIndex | None = None) -> np.ndarray:
    """min_x rho(g, x) for every reference grasp g against the sample set."""
    rp, rq = _as_arrays(reference)
    if index is None:
        sp, sq = _as_arrays(samples)
        if len(sp) == 0:
            raise EmptyInputError("sample set is empty")
        index = PoseIndex(sp, sq, params)
    _, d = index.nearest_many(rp, rq)
    return d


def cov1(samples, reference, eps: float, params: MetricParams, index: PoseIndex | None = None) -> float:
    """Fraction of reference grasps with a sample within eps; empty X -> 0."""
    rp, rq = _as_arrays(reference)
    if len(rp) == 0:
        raise EmptyReferenceError("reference set is empty")
    if index is None:
        sp, sq = _as_arrays(samples)
        if len(sp) == 0:
            return 0.0
        index = PoseIndex(sp, sq, params)
    d = min_dists_to_samples(samples, reference, params, index)
    return float(np.mean(d <= eps))


def cov2(samples, reference, params: MetricParams, index: PoseIndex | None = None) -> float:
    """exp(-max over reference of the shortest distance to the samples)."""
    rp, _ = _as_arrays(reference)
    if len(rp) == 0:
        raise EmptyReferenceError("reference set is empty")
    d = min_dists_to_samples(samples, reference, params, index)
    return float(np.exp(-np.max(d)))


def cov3(samples, reference, params: MetricParams, index: PoseIndex | None = None) -> float:
    """exp(-mean over reference of the shortest distance to the samples)."""
    rp, _ = _as_arrays(reference)
    if len(rp) == 0:
        raise EmptyReferenceError("reference set is empty")
    d = min_dists_to_samples(samples, reference, params, index)
    return float(np.exp(-np.mean(d)))


def precision(validity: np.ndarray, success: np.ndarray, denominator: str = "valid", attempts: int | None = None) -> float:
    """Success ratio among valid samples (or among all attempts with the flag)."""
    validity = np.asarray(validity)
    success = np.asarray(success, dtype=bool)
    valid = validity == Validity.VALID
    n_succ = int(np.sum(success & valid))
    if denominator == "attempts":
        if not attempts or attempts <= 0:
            raise NoValidSamplesError("attempt count required for denominator='attempts'")
        return n_succ / attempts
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise NoValidSamplesError("no valid samples")
    return n_succ / n_valid


def robust_filter(ref: ReferenceSet, gamma: float) -> GraspSet:
    """Successful grasps whose robustness is at least gamma."""
    if ref.robustness is None:
        raise MissingRobustnessError("reference has no robustness labels")
    keep = ref.success & (ref.robustness >= gamma)
    return GraspSet(
        positions=ref.positions[keep],
        quats=ref.quats[keep],
        success=ref.success[keep],
        robustness=ref.robustness[keep],
        provenance={"object_id": ref.object_id, "gamma": gamma},
    )


def robust_coverage(
    samples,
    ref: ReferenceSet,
    eps: float,
    gamma: float,
    which: int,
    params: MetricParams,
    index: PoseIndex | None = None,
) -> float:
    """cov_i against the robust subset of the reference (gamma=0: all successes)."""
    subset = robust_filter(ref, gamma)
    if len(subset) == 0:
        raise EmptyReferenceError(f"robust set empty at gamma={gamma}")
    if which == 1:
        return cov1(samples, subset, eps, params, index)
    if which == 2:
        return cov2(samples, subset, params, index)
    if which == 3:
        return cov3(samples, subset, params, index)
    raise ValueError("which must be 1, 2, or 3")


@dataclass
class CoverageReport:
    """Per-(sampler, object, seed) coverage curves at the run checkpoints.

    ``rows`` hold dicts with keys matching the report CSV schema:
    object_id, sampler, seed, n_valid, attempts, eps, gamma, cov1, cov2,
    cov3, precision, wall_ms (cov cells may be None when undefined).
    """

    object_id: str
    sampler: str
    seed: int
    rows: list[dict] = field(default_factory=list)

    def checkpoint_ns(self) -> list[int]:
        return sorted({r["n_valid"] for r in self.rows})
