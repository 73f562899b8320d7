"""Run orchestration: reference generation, sampler evaluation, reporting.

Work is partitioned into independent cells (object x sampler x seed) that
can run in a process pool; outputs are assembled in sorted key order so
identical configs produce identical files regardless of scheduling.  Cell
CSVs double as resume checkpoints.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ObjectSpec, RunConfig, derive_seed, parse_angle
from .errors import (
    EmptyReferenceError,
    EmptyRobustSetError,
    InvalidKError,
    ReferenceMismatchError,
)
from .geometry import quat_to_matrix
from .gripper import Validity, close_fingers_batch, dilated_bounds
from .mesh import TriMesh, load_mesh
from .metrics import CoverageReport, PoseIndex, robust_filter
from .oracle import ORACLE_VERSION, _cone_labels, generate_reference, label_robustness
from .samplers import SamplerSpec, sample_candidate_batches
from .se3 import GridSpec, MetricParams, farthest_point_subset
from .storage import (
    REPORT_COLUMNS,
    AGGREGATE_COLUMNS,
    atomic_write_text,
    canonical_json,
    load_reference,
    read_csv,
    save_reference,
    write_csv,
)

__version__ = "0.1.0"


def reference_path(out_dir: str, object_id: str) -> str:
    return os.path.join(out_dir, "reference", f"{object_id}.ref")


def cell_path(out_dir: str, object_id: str, sampler_label: str, seed: int) -> str:
    safe = sampler_label.replace("/", "-").replace("(", "_").replace(")", "").replace(",", "_")
    return os.path.join(out_dir, "cells", f"{object_id}__{safe}__seed{seed}.csv")


def grid_for(cfg: RunConfig, mesh: TriMesh) -> GridSpec:
    return GridSpec(
        translation_step=cfg.translation_step,
        rotation_step=cfg.rotation_step,
        bounds=dilated_bounds(mesh.aabb, cfg.gripper),
    )


def cell_sampler_spec(sampler: dict, seed: int, object_id: str) -> SamplerSpec:
    """Sampler spec for one cell; the stream seed mixes in object and label."""
    import dataclasses

    base = SamplerSpec(
        kind=sampler["kind"],
        alpha=parse_angle(sampler.get("alpha", 0.0)),
        beta=parse_angle(sampler.get("beta", 0.0)),
        s_min=float(sampler.get("s_min", 0.0)),
    )
    return dataclasses.replace(
        base, seed=tuple(derive_seed(seed, object_id, base.label))
    )


# ---------------------------------------------------------------------------
# reference stage
# ---------------------------------------------------------------------------

def run_reference(cfg: RunConfig, out_dir: str, jobs: int = 1, resume: bool = False) -> dict:
    """Generate, robustness-label, and persist one reference per object."""
    os.makedirs(os.path.join(out_dir, "reference"), exist_ok=True)
    params = MetricParams(cfg.omega)
    stage: dict = {"objects": {}, "timings_s": {}}
    for obj in sorted(cfg.objects, key=lambda o: o.object_id):
        key = cfg.reference_key(obj)
        path = reference_path(out_dir, obj.object_id)
        if resume and os.path.isfile(path):
            try:
                _, existing_key = load_reference(path)
                if existing_key == key:
                    stage["objects"][obj.object_id] = {"resumed": True}
                    continue
            except Exception:
                pass
        t0 = time.perf_counter()
        mesh = load_mesh(obj.path, scale=obj.scale)
        ref = generate_reference(
            mesh,
            cfg.gripper,
            grid_for(cfg, mesh),
            mu=cfg.mu,
            object_id=obj.object_id,
            max_enumerated=cfg.max_enumerated,
            jobs=jobs,
        )
        ref = label_robustness(
            ref,
            cfg.robust_eps,
            params,
            include_all_enumerated=(cfg.robust_neighborhood == "enumerated"),
        )
        save_reference(ref, path, reference_key=key)
        stage["objects"][obj.object_id] = dict(ref.counts, watertight=ref.watertight)
        stage["timings_s"][obj.object_id] = round(time.perf_counter() - t0, 3)
    return stage


# ---------------------------------------------------------------------------
# evaluate stage
# ---------------------------------------------------------------------------

def _evaluate_cell(payload: dict) -> tuple[str, CoverageReport, dict]:
    """One (object, sampler, seed) cell: sample, label, coverage curves."""
    cfg: RunConfig = payload["cfg"]
    obj: ObjectSpec = payload["obj"]
    sampler: dict = payload["sampler"]
    seed: int = payload["seed"]
    ref_file: str = payload["ref_file"]

    t_start = time.perf_counter()
    params = MetricParams(cfg.omega)
    mesh = load_mesh(obj.path, scale=obj.scale)
    ref, _ = load_reference(ref_file)
    succ_pos = ref.positions[ref.success]
    succ_quat = ref.quats[ref.success]
    succ_rob = ref.robustness[ref.success] if ref.robustness is not None else None

    spec = cell_sampler_spec(sampler, seed, obj.object_id)
    n_target = cfg.n_valid()
    checkpoints = list(cfg.checkpoints)

    # stream samples; label valid ones; compute coverage at each checkpoint
    d_succ = np.full(len(succ_pos), np.inf)
    rows: list[dict] = []
    label = spec.label
    pend_pos: list[np.ndarray] = []
    pend_quat: list[np.ndarray] = []
    n_valid_seen = 0
    n_success_seen = 0
    attempts = 0
    exhausted = False
    ck_iter = iter(checkpoints)
    next_ck = next(ck_iter)
    valid_attempt_idx_last = 0

    def flush_checkpoint(n_ck: int):
        nonlocal d_succ
        bp = np.concatenate(pend_pos) if pend_pos else np.empty((0, 3))
        bq = np.concatenate(pend_quat) if pend_quat else np.empty((0, 4))
        pend_pos.clear()
        pend_quat.clear()
        if len(bp):
            idx = PoseIndex(bp, bq, params)
            _, dd = idx.nearest_many(succ_pos, succ_quat)
            d_succ = np.minimum(d_succ, dd)
        wall_ms = round(1000.0 * (time.perf_counter() - t_start), 1)
        prec = (n_success_seen / n_valid_seen) if n_valid_seen else None
        if cfg.precision_denominator == "attempts" and attempts:
            prec = n_success_seen / valid_attempt_idx_last
        gammas: list[float | None] = [None] + list(cfg.gamma)
        for gv in gammas:
            if gv is None:
                mask = np.ones(len(d_succ), dtype=bool)
            elif succ_rob is not None:
                mask = succ_rob >= gv
            else:
                mask = np.zeros(0, dtype=bool)
            d = d_succ[mask] if len(mask) == len(d_succ) else np.empty(0)
            defined = d.size > 0 and n_valid_seen > 0
            for eps in cfg.eps:
                rows.append(
                    {
                        "object_id": obj.object_id,
                        "sampler": label,
                        "seed": seed,
                        "n_valid": n_ck,
                        "attempts": valid_attempt_idx_last,
                        "eps": eps,
                        "gamma": gv,
                        "cov1": float(np.mean(d <= eps)) if defined else None,
                        "cov2": float(np.exp(-np.max(d))) if defined else None,
                        "cov3": float(np.exp(-np.mean(d))) if defined else None,
                        "precision": prec,
                        "wall_ms": wall_ms,
                        "config_hash": cfg.config_hash(),
                    }
                )

    for batch in sample_candidate_batches(
        mesh,
        cfg.gripper,
        spec,
        n_target,
        line_spacing=cfg.translation_step,
        max_attempts=cfg.max_attempts,
    ):
        attempts = batch.attempts_total
        exhausted = exhausted or batch.exhausted
        vmask = batch.validity == Validity.VALID
        if not np.any(vmask):
            continue
        vp = batch.positions[vmask]
        vq = batch.quats[vmask]
        vai = batch.attempt_index[vmask]
        closed = close_fingers_batch(mesh, quat_to_matrix(vq), vp, cfg.gripper)
        succ, _, _ = _cone_labels(closed, cfg.mu)
        pos_in_batch = 0
        while pos_in_batch < len(vp):
            room = next_ck - n_valid_seen
            take = min(room, len(vp) - pos_in_batch)
            sl = slice(pos_in_batch, pos_in_batch + take)
            pend_pos.append(vp[sl])
            pend_quat.append(vq[sl])
            n_valid_seen += take
            n_success_seen += int(succ[sl].sum())
            valid_attempt_idx_last = int(vai[sl][-1]) + 1 if take else valid_attempt_idx_last
            pos_in_batch += take
            if n_valid_seen == next_ck:
                flush_checkpoint(next_ck)
                try:
                    next_ck = next(ck_iter)
                except StopIteration:
                    next_ck = None
                    break
        if next_ck is None:
            break
    if next_ck is not None and n_valid_seen:
        # budget exhausted mid-curve: emit a final partial checkpoint
        flush_checkpoint(n_valid_seen)
    wall = time.perf_counter() - t_start
    report = CoverageReport(object_id=obj.object_id, sampler=label, seed=seed, rows=rows)
    info = {
        "wall_s": round(wall, 3),
        "attempts": attempts,
        "n_valid": n_valid_seen,
        "exhausted": exhausted,
    }
    return payload["cell_id"], report, info


def run_evaluate(cfg: RunConfig, out_dir: str, jobs: int = 1, resume: bool = False) -> dict:
    """All cells, then the combined report and the cross-object aggregate."""
    os.makedirs(os.path.join(out_dir, "cells"), exist_ok=True)
    chash = cfg.config_hash()
    tasks = []
    for obj in sorted(cfg.objects, key=lambda o: o.object_id):
        ref_file = reference_path(out_dir, obj.object_id)
        if not os.path.isfile(ref_file):
            raise EmptyReferenceError(f"missing reference for {obj.object_id}: run 'reference' first")
        ref, key = load_reference(ref_file)
        if key != cfg.reference_key(obj):
            raise ReferenceMismatchError(
                f"reference for {obj.object_id} was built under a different config"
            )
        for sampler in cfg.samplers:
            for seed in cfg.seeds:
                label = SamplerSpec(
                    kind=sampler["kind"],
                    alpha=parse_angle(sampler.get("alpha", 0.0)),
                    beta=parse_angle(sampler.get("beta", 0.0)),
                    s_min=float(sampler.get("s_min", 0.0)),
                ).label
                cpath = cell_path(out_dir, obj.object_id, label, seed)
                tasks.append(
                    {
                        "cfg": cfg,
                        "obj": obj,
                        "sampler": sampler,
                        "seed": seed,
                        "ref_file": ref_file,
                        "cell_id": cpath,
                        "label": label,
                    }
                )

    stage = {"cells": {}, "timings_s": {}}
    todo = []
    for t in tasks:
        if resume and os.path.isfile(t["cell_id"]):
            stage["cells"][os.path.basename(t["cell_id"])] = "resumed"
        else:
            todo.append(t)

    def record(cid: str, report: CoverageReport, info: dict) -> None:
        # cells are the resume checkpoints: persist each as soon as it finishes
        write_csv(cid, report.rows, REPORT_COLUMNS)
        stage["cells"][os.path.basename(cid)] = info
        stage["timings_s"][os.path.basename(cid)] = info["wall_s"]

    if jobs <= 1:
        for t in todo:
            record(*_evaluate_cell(t))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for cid, report, info in pool.map(_evaluate_cell, todo):
                record(cid, report, info)

    # combined report in deterministic order
    all_rows: list[dict] = []
    for t in tasks:
        _, rows = read_csv(t["cell_id"])
        all_rows.extend(rows)
    report = os.path.join(out_dir, "report.csv")
    write_csv(report, all_rows, REPORT_COLUMNS)
    write_csv(
        os.path.join(out_dir, "aggregate.csv"),
        aggregate_rows(all_rows),
        AGGREGATE_COLUMNS,
    )
    return stage


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """Mean/std over (object, seed) per (sampler, n_valid, eps, gamma)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (r["sampler"], int(r["n_valid"]), str(r["eps"]), str(r.get("gamma") or ""))
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        row = {
            "sampler": key[0],
            "n_valid": key[1],
            "eps": key[2],
            "gamma": key[3],
            "n_cells": len(rs),
        }
        for col in ("cov1", "cov2", "cov3", "precision"):
            vals = [float(r[col]) for r in rs if r[col] not in (None, "")]
            row[f"{col}_mean"] = float(np.mean(vals)) if vals else None
            row[f"{col}_std"] = float(np.std(vals)) if vals else None
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# farthest-point stage and the manifest
# ---------------------------------------------------------------------------

def run_farthest(
    ref_file: str, k: int, gamma: float, omega: float | None = None, seed_index: int = 0
) -> list[dict]:
    """k diverse robust grasps from a reference file (greedy max-min)."""
    ref, _ = load_reference(ref_file)
    robust = robust_filter(ref, gamma)
    if len(robust) == 0:
        raise EmptyRobustSetError(f"robust set empty at gamma={gamma}")
    if not 1 <= k <= len(robust):
        raise InvalidKError(f"k={k} outside [1, {len(robust)}]")
    params = MetricParams(omega) if omega else MetricParams()
    order = farthest_point_subset((robust.positions, robust.quats), k, params, seed_index)
    return [
        {
            "rank": i,
            "position_mm": [round(x, 6) for x in robust.positions[j]],
            "quaternion_wxyz": [round(x, 9) for x in robust.quats[j]],
            "robustness": float(robust.robustness[j]),
        }
        for i, j in enumerate(order)
    ]


def write_manifest(cfg: RunConfig, out_dir: str, stages: dict) -> str:
    manifest = {
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "toolkit_version": __version__,
        "oracle_version": ORACLE_VERSION,
        "stages": stages,
        "notes": [
            "aggregate.csv means are taken at equal valid-sample checkpoints",
            "wall_ms columns are excluded from canonical report hashes",
        ],
    }
    path = os.path.join(out_dir, "manifest.json")
    atomic_write_text(path, canonical_json(manifest) + "\n")
    return path
