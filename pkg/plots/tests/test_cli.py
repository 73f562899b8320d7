import os

from graspcover_plots.cli import main

from conftest import make_rows, write_report


def test_cli_coverage(tmp_path, capsys):
    p = write_report(tmp_path / "r.csv", make_rows(samplers=("uniform", "line_com")))
    rc = main(["coverage", "--in", p, "--metric", "cov1", "--out", str(tmp_path / "fig")])
    assert rc == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 2
    assert all(os.path.exists(line) for line in out)


def test_cli_precision(tmp_path, capsys):
    p = write_report(tmp_path / "r.csv", make_rows())
    rc = main(["precision", "--in", p, "--out", str(tmp_path / "prec.png")])
    assert rc == 0
    assert os.path.exists(tmp_path / "prec.svg")


def test_cli_schema_error(tmp_path, capsys):
    bad_rows = make_rows()
    cols = ["object_id", "sampler"]
    p = write_report(tmp_path / "bad.csv", bad_rows, columns=cols)
    rc = main(["coverage", "--in", p, "--out", str(tmp_path / "f.png")])
    assert rc == 1
    assert "bad.csv" in capsys.readouterr().err


def test_cli_ambiguous_eps(tmp_path, capsys):
    p = write_report(tmp_path / "r.csv", make_rows(eps_values=(0.1, 0.2)))
    rc = main(["coverage", "--in", p, "--out", str(tmp_path / "f.png")])
    assert rc == 1
    rc2 = main(["coverage", "--in", p, "--eps", "0.2", "--out", str(tmp_path / "f.png")])
    assert rc2 == 0
