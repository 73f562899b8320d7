import pytest

from graspcover_plots.frame import (
    REPORT_COLUMNS,
    EmptyData,
    ReportFrame,
    SchemaMismatch,
    load_reports,
    select_slice,
)

from conftest import make_rows, write_report


def test_load_valid(report_csv):
    p = report_csv()
    frame = ReportFrame.load(p)
    assert list(frame.table.columns) == REPORT_COLUMNS
    assert len(frame.table) == 2


def test_unknown_column_rejected(tmp_path):
    rows = make_rows()
    for r in rows:
        r["surprise"] = 1
    p = write_report(tmp_path / "bad.csv", rows, columns=REPORT_COLUMNS + ["surprise"])
    with pytest.raises(SchemaMismatch, match="bad.csv"):
        ReportFrame.load(p)


def test_missing_column_rejected(tmp_path):
    cols = [c for c in REPORT_COLUMNS if c != "cov2"]
    p = write_report(tmp_path / "short.csv", make_rows(), columns=cols)
    with pytest.raises(SchemaMismatch, match="short.csv"):
        ReportFrame.load(p)


def test_reordered_columns_rejected(tmp_path):
    cols = list(reversed(REPORT_COLUMNS))
    p = write_report(tmp_path / "reordered.csv", make_rows(), columns=cols)
    with pytest.raises(SchemaMismatch):
        ReportFrame.load(p)


def test_eps_mismatch_names_offender(report_csv, tmp_path):
    a = report_csv("a.csv", eps_values=(0.109,))
    b = write_report(tmp_path / "b.csv", make_rows(eps_values=(0.2,)))
    with pytest.raises(SchemaMismatch, match="b.csv"):
        load_reports([a, b])


def test_gamma_mismatch_names_offender(report_csv, tmp_path):
    a = report_csv("a.csv", gammas=("",))
    b = write_report(tmp_path / "b.csv", make_rows(gammas=("", "0.75")))
    with pytest.raises(SchemaMismatch, match="b.csv"):
        load_reports([a, b])


def test_no_inputs():
    with pytest.raises(EmptyData):
        load_reports([])


def test_select_slice_requires_eps_when_ambiguous(report_csv):
    p = report_csv(eps_values=(0.109, 0.2))
    df = load_reports([p])
    with pytest.raises(SchemaMismatch, match="eps"):
        select_slice(df, None, "")
    sub = select_slice(df, 0.2, "")
    assert set(sub["eps"]) == {0.2}
    with pytest.raises(EmptyData):
        select_slice(df, 0.3, "")
