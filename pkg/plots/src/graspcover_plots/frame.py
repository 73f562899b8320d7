"""Validated tabular view of the pipeline's report CSVs.

This package talks to the grasp toolkit only through its public CSV
contract; the column list below is that contract.  Unknown or missing
columns are rejected with the offending file named.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import pandas as pd

REPORT_COLUMNS = [
    "object_id", "sampler", "seed", "n_valid", "attempts", "eps", "gamma",
    "cov1", "cov2", "cov3", "precision", "wall_ms", "config_hash",
]

NUMERIC = ["n_valid", "attempts", "eps", "cov1", "cov2", "cov3", "precision", "wall_ms"]


class SchemaMismatch(ValueError):
    """A CSV does not match the report schema (or disagrees with its peers)."""


class EmptyData(ValueError):
    """No rows left after filtering."""


@dataclass
class ReportFrame:
    """One loaded report CSV."""

    path: str
    table: pd.DataFrame

    @staticmethod
    def load(path: str | os.PathLike) -> "ReportFrame":
        path = os.fspath(path)
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
        cols = list(df.columns)
        if cols != REPORT_COLUMNS:
            extra = [c for c in cols if c not in REPORT_COLUMNS]
            missing = [c for c in REPORT_COLUMNS if c not in cols]
            raise SchemaMismatch(
                f"{path}: columns do not match the report schema"
                + (f" (unknown: {extra})" if extra else "")
                + (f" (missing: {missing})" if missing else "")
            )
        for c in NUMERIC:
            df[c] = pd.to_numeric(df[c], errors="coerce")
        return ReportFrame(path=path, table=df)


def load_reports(paths: list[str]) -> pd.DataFrame:
    """Load several report CSVs; their eps and gamma sets must agree."""
    if not paths:
        raise EmptyData("no input CSVs")
    frames = [ReportFrame.load(p) for p in paths]
    ref_eps = set(frames[0].table["eps"].dropna().unique())
    ref_gamma = set(frames[0].table["gamma"].unique())
    for f in frames[1:]:
        if set(f.table["eps"].dropna().unique()) != ref_eps:
            raise SchemaMismatch(f"{f.path}: eps values disagree with {frames[0].path}")
        if set(f.table["gamma"].unique()) != ref_gamma:
            raise SchemaMismatch(f"{f.path}: gamma values disagree with {frames[0].path}")
    return pd.concat([f.table for f in frames], ignore_index=True)


def select_slice(df: pd.DataFrame, eps: float | None, gamma: str) -> pd.DataFrame:
    """Rows at one (eps, gamma); eps=None allowed only when a single eps exists."""
    sub = df[df["gamma"].astype(str) == str(gamma)]
    if sub.empty:
        raise EmptyData(f"no rows at gamma={gamma!r}")
    eps_values = sorted(sub["eps"].dropna().unique())
    if eps is None:
        if len(eps_values) != 1:
            raise SchemaMismatch(
                f"multiple eps values present {eps_values}; pass an explicit eps"
            )
        eps = eps_values[0]
    sub = sub[sub["eps"] == eps]
    if sub.empty:
        raise EmptyData(f"no rows at eps={eps} gamma={gamma!r}")
    return sub
