import csv
import math

import numpy as np
import pytest

import hoi
from hoi.cli import main

PGM = '{"blocks": [{"kind": "r", "n_sources": 2}, {"kind": "s", "n_sources": 2}]}'


@pytest.fixture()
def data_csv(tmp_path):
    spec_path = tmp_path / "pgm.json"
    spec_path.write_text(PGM)
    out = tmp_path / "data.csv"
    assert main(["synth", "--spec", str(spec_path), "--samples", "200",
                 "--seed", "3", "--out", str(out)]) == 0
    return out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def covset_from_csv(path):
    rows = read_rows(path)
    x = np.array(rows[1:], dtype=np.float64)
    cov = hoi.estimate_covariance(hoi.copula_transform(hoi.DataMatrix(x)))
    return hoi.CovSet([cov], names=[path.stem])


def test_count_prints_exact_integer(capsys):
    assert main(["count", "--n", "30", "--orders", "3:30"]) == 0
    assert capsys.readouterr().out.strip() == "1073741358"
    assert main(["count", "--n", "6", "--orders", "2:all"]) == 0
    assert capsys.readouterr().out.strip() == str(hoi.count_nplets(6, 2, 6))


def test_synth_layout_and_determinism(tmp_path):
    spec_path = tmp_path / "pgm.json"
    spec_path.write_text(PGM)
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    for out, seed in ((a, "5"), (b, "5"), (c, "6")):
        assert main(["synth", "--spec", str(spec_path), "--samples", "50",
                     "--seed", seed, "--out", str(out)]) == 0
    rows = read_rows(a)
    assert rows[0] == ["r0_x0", "r0_x1", "r0_y", "s1_x0", "s1_x1", "s1_y"]
    assert len(rows) == 51
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_scan_top_matches_library_route(tmp_path, data_csv):
    out = tmp_path / "top.csv"
    assert main(["scan", "--input", str(data_csv), "--orders", "3:4",
                 "--reduce", "top:5:max:o", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["dataset", "order", "variables", "mask", "tc", "dtc", "o", "s"]

    covs = covset_from_csv(data_csv)
    want = hoi.scan(covs, 3, 4, hoi.TopK("o", "max", 5))[0]
    header = read_rows(data_csv)[0]
    assert len(rows) == 6
    for row, entry in zip(rows[1:], want):
        assert row[0] == "data"
        assert int(row[1]) == entry.order
        assert tuple(row[2].split(",")) == tuple(header[i] for i in entry.indices)
        got_indices = tuple(np.flatnonzero(
            [(int(row[3], 16) >> i) & 1 for i in range(len(header))]
        ))
        assert got_indices == entry.indices
        for col, field in zip(row[4:], ("tc", "dtc", "o", "s")):
            assert float(col) == getattr(entry, field)  # repr round-trips


def test_scan_outputs_are_byte_identical_across_runs_and_workers(
        tmp_path, data_csv, monkeypatch):
    outs = []
    for i, workers in enumerate(("1", "1", "4")):
        monkeypatch.setenv("HOI_WORKERS", workers)
        out = tmp_path / f"top{i}.csv"
        assert main(["scan", "--input", str(data_csv), "--orders", "2:5",
                     "--reduce", "top:10:min:s", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_scan_histogram_shape(tmp_path, data_csv):
    out = tmp_path / "hist.csv"
    assert main(["scan", "--input", str(data_csv), "--orders", "3:3",
                 "--reduce", "hist:o:5:-0.3:0.3", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["dataset", "bin_lo", "bin_hi", "count"]
    assert len(rows) == 6
    assert sum(int(r[3]) for r in rows[1:]) == hoi.count_nplets(6, 3, 3)
    assert float(rows[1][1]) == -0.3
    assert float(rows[5][2]) == 0.3


def test_scan_reads_directories_sorted(tmp_path):
    spec_path = tmp_path / "pgm.json"
    spec_path.write_text(PGM)
    d = tmp_path / "sets"
    d.mkdir()
    for name, seed in (("zz.csv", "1"), ("aa.csv", "2")):
        assert main(["synth", "--spec", str(spec_path), "--samples", "60",
                     "--seed", seed, "--out", str(d / name)]) == 0
    out = tmp_path / "top.csv"
    assert main(["scan", "--input", str(d), "--orders", "3:3",
                 "--reduce", "top:1:max:tc", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [r[0] for r in rows[1:]] == ["aa", "zz"]


def test_greedy_matches_library(tmp_path, data_csv):
    out = tmp_path / "greedy.csv"
    assert main(["greedy", "--input", str(data_csv), "--measure", "o",
                 "--direction", "max", "--start-order", "3",
                 "--target-order", "5", "--kappa", "4", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["order", "variables", "mask", "value"]
    covs = covset_from_csv(data_csv)
    want = hoi.greedy(covs, hoi.ObjectiveSpec(measure="o", direction="max"),
                      3, 5, kappa=4)
    assert len(rows) - 1 == len(want.per_order)
    for row, entry in zip(rows[1:], want.per_order):
        assert int(row[0]) == entry.order
        assert float(row[3]) == entry.value


def test_anneal_output_rows_and_determinism(tmp_path, data_csv):
    out1, out2 = tmp_path / "a1.csv", tmp_path / "a2.csv"
    args = ["anneal", "--input", str(data_csv), "--measure", "o",
            "--direction", "min", "--kappa", "6", "--iters", "80",
            "--seed", "9"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = read_rows(out1)
    assert rows[0] == ["kind", "order", "variables", "mask", "value"]
    assert [r[0] for r in rows[1:]] == ["best"] + [f"chain_{i}" for i in range(6)]

    covs = covset_from_csv(data_csv)
    sched = hoi.AnnealSchedule(max_iters=80)
    want = hoi.anneal(covs, hoi.ObjectiveSpec(measure="o", direction="min"),
                      sched, kappa=6, seed=9)
    assert float(rows[1][4]) == want.best_energy * -1.0  # natural sign for min


def test_features_schema_and_agreement(tmp_path, data_csv):
    out = tmp_path / "features.csv"
    assert main(["features", "--input", str(data_csv), "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["dataset"] + list(hoi.FEATURE_NAMES)
    assert len(rows) == 2
    want = hoi.extract_features(covset_from_csv(data_csv))[0]
    for col, name in zip(rows[1][1:], hoi.FEATURE_NAMES):
        assert float(col) == getattr(want, name)


def test_stdout_output_when_no_out_given(capsys, data_csv):
    assert main(["scan", "--input", str(data_csv), "--orders", "3:3",
                 "--reduce", "top:1:max:o"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "dataset,order,variables,mask,tc,dtc,o,s"
    assert len(lines) == 2


def test_progress_lines_go_to_stderr(capsys, data_csv):
    assert main(["scan", "--input", str(data_csv), "--orders", "3:3",
                 "--reduce", "top:1:max:o", "--progress"]) == 0
    err = capsys.readouterr().err
    assert err.startswith("progress ")
    assert "nplets=" in err


def test_usage_and_validation_failures_exit_one(tmp_path, data_csv, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\nx,4\n")
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,b\n1,2\n3\n")
    empty_dir = tmp_path / "empty"
    empty_dir.mkdir()
    cases = [
        [],
        ["bogus"],
        ["scan", "--input", str(tmp_path / "missing.csv"), "--orders", "3:3",
         "--reduce", "top:1:max:o"],
        ["scan", "--input", str(data_csv), "--orders", "5:3",
         "--reduce", "top:1:max:o"],
        ["scan", "--input", str(data_csv), "--orders", "3:3",
         "--reduce", "top:0:max:o"],
        ["scan", "--input", str(data_csv), "--orders", "3:3",
         "--reduce", "top:1:max:bogus"],
        ["scan", "--input", str(data_csv), "--orders", "3:3",
         "--reduce", "hist:o:4:2:1"],
        ["scan", "--input", str(data_csv), "--orders", "x:3",
         "--reduce", "top:1:max:o"],
        ["scan", "--input", str(bad), "--orders", "3:3",
         "--reduce", "top:1:max:o"],
        ["scan", "--input", str(ragged), "--orders", "3:3",
         "--reduce", "top:1:max:o"],
        ["scan", "--input", str(empty_dir), "--orders", "3:3",
         "--reduce", "top:1:max:o"],
        ["greedy", "--input", str(data_csv), "--start-order", "3",
         "--target-order", "99"],
        ["greedy", "--input", str(data_csv), "--aggregate", "effect"],
        ["anneal", "--input", str(data_csv), "--min-order", "9",
         "--max-order", "3"],
        ["features", "--input", str(data_csv), "--limit", "4"],
        ["synth", "--spec", str(tmp_path / "nope.json"), "--samples", "50",
         "--out", str(tmp_path / "x.csv")],
        ["count", "--n", "5", "--orders", "3:9"],
    ]
    for argv in cases:
        assert main(argv) == 1, argv
        capsys.readouterr()  # drain


def test_compute_phase_failures_exit_two(tmp_path, data_csv, capsys):
    dest = tmp_path / "no_such_dir" / "out.csv"
    assert main(["scan", "--input", str(data_csv), "--orders", "3:3",
                 "--reduce", "top:1:max:o", "--out", str(dest)]) == 2
    err = capsys.readouterr().err
    assert "error" in err.lower()


def test_bias_correct_flag_changes_values(tmp_path, data_csv):
    plain = tmp_path / "plain.csv"
    corrected = tmp_path / "corr.csv"
    base = ["scan", "--input", str(data_csv), "--orders", "3:3",
            "--reduce", "top:2:max:tc"]
    assert main(base + ["--out", str(plain)]) == 0
    assert main(base + ["--bias-correct", "--out", str(corrected)]) == 0
    assert plain.read_bytes() != corrected.read_bytes()
    v_plain = float(read_rows(plain)[1][4])
    v_corr = float(read_rows(corrected)[1][4])
    assert v_plain != v_corr
    assert abs(v_plain - v_corr) < 0.1


def test_effect_objective_runs_on_directory(tmp_path):
    spec_path = tmp_path / "pgm.json"
    spec_path.write_text(PGM)
    d = tmp_path / "cond"
    d.mkdir()
    for i in range(4):
        assert main(["synth", "--spec", str(spec_path), "--samples", "80",
                     "--seed", str(i), "--out", str(d / f"s{i}.csv")]) == 0
    out = tmp_path / "eff.csv"
    assert main(["greedy", "--input", str(d), "--measure", "o",
                 "--aggregate", "effect", "--cond-a", "0,1", "--cond-b", "2,3",
                 "--start-order", "3", "--target-order", "4",
                 "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 3
    assert math.isfinite(float(rows[1][3]))
