import csv

import pytest

from graspcover_plots.frame import REPORT_COLUMNS


def write_report(path, rows, columns=REPORT_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in columns})
    return str(path)


def make_rows(objects=("cube",), samplers=("uniform",), seeds=(0,), ns=(100, 1000),
              eps_values=(0.109,), gammas=("",), value=None):
    rows = []
    for obj in objects:
        for s in samplers:
            for seed in seeds:
                for n in ns:
                    for e in eps_values:
                        for g in gammas:
                            v = value(obj, s, seed, n, e, g) if value else {}
                            rows.append({
                                "object_id": obj, "sampler": s, "seed": seed,
                                "n_valid": n, "attempts": n * 10, "eps": e,
                                "gamma": g,
                                "cov1": v.get("cov1", 0.5), "cov2": v.get("cov2", 0.4),
                                "cov3": v.get("cov3", 0.6),
                                "precision": v.get("precision", 0.3),
                                "wall_ms": 12.5, "config_hash": "abcd1234",
                            })
    return rows


@pytest.fixture
def report_csv(tmp_path):
    def _make(name="r.csv", **kw):
        return write_report(tmp_path / name, make_rows(**kw))

    return _make
