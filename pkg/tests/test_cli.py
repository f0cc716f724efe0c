import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ucorr.cli import main, parse_dataset, parse_noise_grid, InputError

REPORT_FIELDS = {"rho", "sigma0", "z", "p_value", "n", "m", "method", "config", "input_digest",
                 "elapsed_ms", "version"}


@pytest.fixture
def circle_csv(tmp_path):
    rng = np.random.default_rng(0)
    theta = rng.uniform(0, 2 * np.pi, 300)
    path = tmp_path / "circle.csv"
    np.savetxt(path, np.c_[np.cos(theta), np.sin(theta)], delimiter=",", header="x,y", comments="")
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_compute_json_report(circle_csv, capsys):
    code, out, err = run(["compute", "--input", circle_csv], capsys)
    assert code == 0 and err == ""
    report = json.loads(out)
    assert REPORT_FIELDS <= set(report)
    assert report["rho"] >= 0.6
    assert report["p_value"] < 1e-6
    assert report["n"] == 300 and report["m"] == 2000
    cfg = report["config"]
    assert (cfg["tree_count"], cfg["max_leaf_count"], cfg["min_leaf_width"], cfg["split_trials"],
            cfg["random_split_fraction"], cfg["k_bias"], cfg["seed"]) == (100, 18, 9, 10, 0.5, 0.5, 0)
    # 17 significant digits round-trip exactly
    rho_text = out.split('"rho": ')[1].split(",")[0]
    assert float(rho_text) == report["rho"]
    assert len(rho_text.replace("0.", "", 1).lstrip("0")) == 17


def test_compute_is_thread_independent(circle_csv, capsys):
    _, out1, _ = run(["compute", "--input", circle_csv, "--trees", 30, "--threads", 1], capsys)
    _, out8, _ = run(["compute", "--input", circle_csv, "--trees", 30, "--threads", 8], capsys)
    rho1 = out1.split('"rho": ')[1].split(",")[0]
    rho8 = out8.split('"rho": ')[1].split(",")[0]
    assert rho1 == rho8
    assert json.loads(out1)["p_value"] == json.loads(out8)["p_value"]
    assert json.loads(out1)["input_digest"] == json.loads(out8)["input_digest"]


def test_compute_csv_format(circle_csv, capsys):
    code, out, _ = run(["compute", "--input", circle_csv, "--trees", 10, "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1
    assert float(rows[0]["rho"]) > 0.3


def test_compute_permutation_pvalue(circle_csv, capsys):
    code, out, _ = run(["compute", "--input", circle_csv, "--trees", 10, "--pvalue", "permutation",
                        "--permutations", 19], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["method"] == "permutation"
    assert report["p_value"] == pytest.approx(1 / 20)


def test_compute_shuffled_files_have_valid_size(tmp_path, capsys):
    rng = np.random.default_rng(11)
    theta = rng.uniform(0, 2 * np.pi, 300)
    x, y = np.cos(theta), np.sin(theta)
    hits = 0
    for k in range(100):
        path = tmp_path / f"shuffled{k}.csv"
        np.savetxt(path, np.c_[x, rng.permutation(y)], delimiter=",")
        code, out, _ = run(["compute", "--input", path, "--seed", k], capsys)
        assert code == 0
        hits += json.loads(out)["p_value"] < 0.05
    assert 2 <= hits <= 10


def test_delimiters_and_columns(tmp_path, capsys):
    rng = np.random.default_rng(1)
    data = rng.uniform(size=(40, 3))
    path = tmp_path / "d.tsv"
    np.savetxt(path, data, delimiter="\t")
    code, out, _ = run(["compute", "--input", path, "--delimiter", "tab", "--x-col", 2, "--y-col", 0,
                        "--trees", 5], capsys)
    assert code == 0
    assert json.loads(out)["n"] == 40


def test_parse_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,4\n5,oops\n")
    code, out, err = run(["compute", "--input", bad], capsys)
    assert code == 3 and out == ""
    assert "line 3" in err

    ambiguous = tmp_path / "amb.csv"
    ambiguous.write_text("x,1\n" + "".join(f"{i},{i}\n" for i in range(20)))
    code, _, err = run(["compute", "--input", ambiguous], capsys)
    assert code == 3 and "line 1" in err

    code, _, err = run(["compute", "--input", tmp_path / "missing.csv"], capsys)
    assert code == 3


def test_too_few_rows(tmp_path, capsys):
    small = tmp_path / "small.csv"
    small.write_text("".join(f"{i},{i * i}\n" for i in range(9)))
    code, out, err = run(["compute", "--input", small], capsys)
    assert code == 4 and out == ""
    assert "A2" in err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["compute"])
    assert exc.value.code == 2


def test_parse_dataset_header_detection():
    x, y = parse_dataset("a,b\n\n1,2\n3,4\n")
    np.testing.assert_array_equal(x, [1, 3])
    x, _ = parse_dataset("1,2\n3,4\n")
    assert x.size == 2
    x, _ = parse_dataset("h1;h2\n1;2\n", delimiter=";", has_header=True)
    assert x.size == 1
    with pytest.raises(InputError):
        parse_dataset("1,inf\n")
    with pytest.raises(InputError):
        parse_dataset("1\n")


def test_noise_grid():
    assert parse_noise_grid("0:100:25") == [0, 25, 50, 75, 100]
    assert parse_noise_grid("0,10") == [0, 10]


def test_power_command(tmp_path, capsys):
    out_path = tmp_path / "power.csv"
    code, _, _ = run(["power", "--relation", "circle", "--coeff", "ucorr,pearson", "--noise", "0:100:25",
                      "--reps", 50, "--n", 60, "--trees", 10, "--output", out_path], capsys)
    assert code == 0
    rows = list(csv.DictReader(out_path.open()))
    assert len(rows) == 10
    assert all(0.0 <= float(r["power"]) <= 1.0 for r in rows)
    assert {r["coefficient"] for r in rows} == {"ucorr", "pearson"}


def test_power_unknown_relation(capsys):
    code, _, err = run(["power", "--relation", "spiral"], capsys)
    assert code == 2
    assert "circle" in err and "checkerboard" in err


def test_nulldist_command(tmp_path, capsys):
    code, out, _ = run(["nulldist", "--n", 30, "--m", 200, "--reps", 200, "--trees", 10, "--bins", 8], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 9
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {"bin_lo", "bin_hi", "count", "density", "predicted_density", "std"} <= set(rows[0])

    code, _, err = run(["nulldist", "--reps", 1], capsys)
    assert code == 4 and "reps" in err


def test_bench_command(capsys):
    code, out, _ = run(["bench", "--sizes", "400,100,200", "--trees", 5], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == [100, 200, 400]
    assert all(int(r["elapsed_ms"]) >= 0 for r in rows)


def test_module_entry_point(circle_csv):
    proc = subprocess.run([sys.executable, "-m", "ucorr", "compute", "--input", str(circle_csv), "--trees", "5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert REPORT_FIELDS <= set(json.loads(proc.stdout))


def test_bench_doubling_trees_doubles_runtime(capsys):
    run(["bench", "--sizes", "200", "--trees", 4], capsys)
    _, out50, _ = run(["bench", "--sizes", "4000", "--trees", 50, "--repeats", 3], capsys)
    _, out100, _ = run(["bench", "--sizes", "4000", "--trees", 100, "--repeats", 3], capsys)
    t50 = int(next(csv.DictReader(io.StringIO(out50)))["elapsed_ms"])
    t100 = int(next(csv.DictReader(io.StringIO(out100)))["elapsed_ms"])
    assert 1.4 <= t100 / t50 <= 2.6
