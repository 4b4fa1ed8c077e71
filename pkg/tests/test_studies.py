"""Study driver plumbing: hashing, ordered mapping, CSV output."""

import numpy as np

from gmsfem.studies import (config_hash, detect_mode_counts, parallel_map,
                            run_convergence_study, write_csv, _fmt)
from gmsfem.fields import channels_and_inclusions
from gmsfem.mesh import build_coarse_mesh, build_fine_mesh


def test_config_hash_stable_and_order_free():
    a = config_hash({"x": 1, "y": [2, 3]})
    b = config_hash({"y": [2, 3], "x": 1})
    assert a == b and len(a) == 12
    assert config_hash({"x": 2}) != a


def test_parallel_map_preserves_order():
    items = list(range(40))
    fn = lambda x: x * x
    assert parallel_map(fn, items, workers=1) == parallel_map(fn, items, workers=8)
    assert parallel_map(fn, items, workers=4) == [x * x for x in items]


def test_fmt_and_write_csv(tmp_path):
    assert _fmt(1.5) == "1.5000000000e+00"
    assert _fmt(7) == "7"
    p = tmp_path / "t.csv"
    write_csv(p, ["a", "b"], [[1, _fmt(2.0)], [3, "x"]])
    import csv
    with open(p, newline="") as fh:
        got = list(csv.reader(fh))
    assert got == [["a", "b"], ["1", "2.0000000000e+00"], ["3", "x"]]


def test_detect_mode_counts_small():
    fine = build_fine_mesh(20, 20)
    coarse = build_coarse_mesh(fine, 4, 4)
    counts = detect_mode_counts(coarse, lambda e: channels_and_inclusions(fine, e),
                                1e4, 1e2)
    assert set(counts) == set(range(coarse.N_v))
    assert min(counts.values()) >= 1
    assert max(counts.values()) < 30


def test_convergence_rows_shape(tmp_path):
    out = tmp_path / "conv.csv"
    rows = run_convergence_study(fine_n=20, coarse_n=4, eta=1e3,
                                 base_count=2, extra_max=1, out=str(out))
    assert len(rows) == 2
    assert rows[0][1] == "+0" and rows[1][1] == "+1"
    assert int(rows[1][2]) > int(rows[0][2])  # dimension grows
    assert rows[0][7] == rows[1][7]  # shared config hash
    lines = out.read_text().strip().splitlines()
    assert lines[0].split(",")[0] == "variant"
    assert len(lines) == 3
