"""Coverage-curve and precision-bar figures from report CSVs.

Each figure function returns the plotted arrays so callers (and tests) can
verify them against an independent aggregation; the rendered files are a
side effect.  Output goes to both PNG and SVG next to the requested path.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .frame import EmptyData, SchemaMismatch, load_reports, select_slice

COVERAGE_METRICS = ("cov1", "cov2", "cov3")


@dataclass
class CurveData:
    sampler: str
    n: np.ndarray
    mean: np.ndarray
    std: np.ndarray


@dataclass
class FigureResult:
    out_paths: list[str]
    curves: list[CurveData] = field(default_factory=list)
    eps: float | None = None
    gamma: str = ""


def _out_paths(out: str) -> list[str]:
    stem, _ = os.path.splitext(os.fspath(out))
    return [stem + ".png", stem + ".svg"]


def _save(fig, out: str) -> list[str]:
    paths = _out_paths(out)
    for p in paths:
        fig.savefig(p, bbox_inches="tight")
    plt.close(fig)
    return paths


def aggregate_metric(df: pd.DataFrame, metric: str) -> list[CurveData]:
    """Mean/std of one metric over (object, seed) cells per sampler and n."""
    curves = []
    for sampler, g in df.groupby("sampler", sort=True):
        sub = g.dropna(subset=[metric])
        if sub.empty:
            continue
        agg = sub.groupby("n_valid")[metric].agg(["mean", "std", "count"]).reset_index()
        agg["std"] = agg["std"].fillna(0.0)
        # population std to match the toolkit's aggregate convention
        counts = agg["count"].to_numpy()
        std = agg["std"].to_numpy() * np.sqrt(np.maximum(counts - 1, 0) / np.maximum(counts, 1))
        curves.append(
            CurveData(
                sampler=str(sampler),
                n=agg["n_valid"].to_numpy(dtype=float),
                mean=agg["mean"].to_numpy(dtype=float),
                std=std,
            )
        )
    if not curves:
        raise EmptyData(f"no defined values for {metric}")
    return curves


def plot_coverage(
    csv_paths: list[str],
    metric: str,
    out: str,
    eps: float | None = None,
    gamma: str = "",
) -> FigureResult:
    """One line per sampler (mean over objects and seeds) with a +-1 std band."""
    if metric not in COVERAGE_METRICS:
        raise SchemaMismatch(f"metric must be one of {COVERAGE_METRICS}, got {metric!r}")
    df = load_reports(csv_paths)
    sub = select_slice(df, eps, gamma)
    eps_used = float(sub["eps"].iloc[0])
    curves = aggregate_metric(sub, metric)

    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    for c in curves:
        (line,) = ax.plot(c.n, c.mean, marker="o", markersize=3, label=c.sampler)
        ax.fill_between(c.n, c.mean - c.std, c.mean + c.std, alpha=0.2, color=line.get_color())
    ax.set_xscale("log")
    ax.set_xlabel("valid samples")
    label = {"cov1": f"coverage (eps={eps_used:g})", "cov2": "exp(-max min dist)", "cov3": "exp(-mean min dist)"}[metric]
    ax.set_ylabel(label)
    title = f"{metric} vs samples"
    if gamma:
        title += f" (robust reference, gamma={gamma})"
    ax.set_title(title)
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    paths = _save(fig, out)
    return FigureResult(out_paths=paths, curves=curves, eps=eps_used, gamma=gamma)


def plot_precision(csv_paths: list[str], out: str, gamma: str = "") -> FigureResult:
    """Bar chart of final-checkpoint precision mean +- std per sampler."""
    df = load_reports(csv_paths)
    sub = df[df["gamma"].astype(str) == str(gamma)]
    if sub.empty:
        raise EmptyData("no rows at the requested gamma")
    final_n = sub["n_valid"].max()
    sub = sub[sub["n_valid"] == final_n]
    # precision repeats across the eps sweep; keep one row per cell
    cells = sub.drop_duplicates(subset=["object_id", "sampler", "seed"])
    curves = []
    names, means, stds = [], [], []
    for sampler, g in cells.groupby("sampler", sort=True):
        vals = g["precision"].dropna().to_numpy(dtype=float)
        if len(vals) == 0:
            continue
        names.append(str(sampler))
        means.append(float(np.mean(vals)))
        stds.append(float(np.std(vals)))
        curves.append(
            CurveData(sampler=str(sampler), n=np.array([final_n], dtype=float),
                      mean=np.array([means[-1]]), std=np.array([stds[-1]]))
        )
    if not names:
        raise EmptyData("no precision values")

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    x = np.arange(len(names))
    ax.bar(x, means, yerr=stds, capsize=4)
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(f"precision at n={int(final_n)}")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, axis="y", alpha=0.3)
    paths = _save(fig, out)
    return FigureResult(out_paths=paths, curves=curves)
