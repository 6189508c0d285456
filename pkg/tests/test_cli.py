"""Command-line behavior: exit codes, report determinism, file outputs."""

import json

import numpy as np
import pytest

from ggcnlab.cli import main
from ggcnlab.dataio import load_dataset, load_splits
from ggcnlab.layers import load_checkpoint


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth") / "ds"
    code = main([
        "gen-synth", "--n", "60", "--target-h", "0.7", "--degree", "regular:4",
        "--dim", "2", "--seed", "3", "--splits", "2", "--out", str(d),
    ])
    assert code == 0
    return d


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


# ---------------------------------------------------------------- bins

def test_bins_prints_exact_intervals(capsys):
    assert main(["bins", "--dmin", "1", "--dmax", "168", "--n", "5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["[1,2]", "[3,7]", "[8,21]", "[22,60]", "[61,168]"]

    assert main(["bins", "--dmin", "1", "--dmax", "99", "--n", "5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["[1,2]", "[3,6]", "[7,15]", "[16,39]", "[40,99]"]


def test_bins_empty_interval_marker(capsys):
    assert main(["bins", "--dmin", "1", "--dmax", "2", "--n", "5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "(no integer degrees)" in out
    assert out[0] == "[1,1]" and out[-1] == "[2,2]"


def test_bins_report_file(tmp_path, capsys):
    out = tmp_path / "bins.json"
    assert main(["bins", "--dmin", "2", "--dmax", "40", "--n", "4",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    body = json.loads(out.read_text())
    assert body["schema_version"] == "1"
    assert body["command"] == "bins"
    assert len(body["bounds"]) == 4
    assert body["bounds"][0][0] == 2 and body["bounds"][-1][1] == 40


def test_bins_invalid_range_exit_1(capsys):
    assert main(["bins", "--dmin", "9", "--dmax", "3", "--n", "2"]) == 1
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------- gen-synth

def test_gen_synth_writes_loadable_dataset(data_dir, capsys):
    ds = load_dataset(data_dir)
    assert ds.graph.n == 60
    assert np.all(ds.graph.degrees == 4)
    assert ds.features.shape == (60, 2)
    splits = load_splits(data_dir / "splits.json")
    assert len(splits) == 2


def test_gen_synth_byte_identical_reruns(tmp_path, capsys):
    args = ["gen-synth", "--n", "40", "--target-h", "0.6", "--degree",
            "regular:4", "--seed", "7", "--splits", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    for name in ("edges.tsv", "features.csv", "labels.txt", "splits.json"):
        assert _read(tmp_path / "a" / name) == _read(tmp_path / "b" / name)


def test_gen_synth_bad_degree_model_exit_1(tmp_path, capsys):
    code = main(["gen-synth", "--n", "20", "--target-h", "0.5",
                 "--degree", "weird:3", "--out", str(tmp_path / "x")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------- train

def test_train_report_and_checkpoint(data_dir, tmp_path, capsys):
    report = tmp_path / "train.json"
    ckpt = tmp_path / "ckpt.json"
    code = main([
        "train", "--data", str(data_dir), "--model", "gcn", "--depths", "2",
        "--hidden", "8", "--max-epochs", "5", "--patience", "10",
        "--out", str(report), "--checkpoint", str(ckpt),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "test accuracy" in out
    body = json.loads(report.read_text())
    assert body["command"] == "train"
    assert 0.0 <= body["test_accuracy"] <= 1.0
    assert body["depth"] == 2
    layers = load_checkpoint(ckpt)
    assert len(layers) == 2  # gcn depth 2: one weight map per layer
    assert layers[0]["W"].shape == (2, 8)


def test_train_rejects_depth_list(data_dir, capsys):
    code = main(["train", "--data", str(data_dir), "--depths", "2,4",
                 "--max-epochs", "2"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_train_with_flags_and_splits_file(data_dir, tmp_path, capsys):
    code = main([
        "train", "--data", str(data_dir), "--model", "base",
        "--flags", "sign,deg,norm=layer", "--depths", "1", "--hidden", "4",
        "--max-epochs", "3", "--patience", "5",
        "--splits-file", str(data_dir / "splits.json"),
    ])
    assert code == 0
    capsys.readouterr()


def test_unknown_flag_exit_1(data_dir, capsys):
    code = main(["train", "--data", str(data_dir), "--flags", "magic",
                 "--depths", "1", "--max-epochs", "2"])
    assert code == 1
    assert "unknown flag" in capsys.readouterr().err


def test_missing_dataset_exit_1(tmp_path, capsys):
    code = main(["train", "--data", str(tmp_path / "nope"), "--depths", "1",
                 "--max-epochs", "2"])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_usage_errors_exit_1(capsys):
    assert main(["train"]) == 1  # missing --data
    assert main(["no-such-command"]) == 1
    capsys.readouterr()


@pytest.mark.filterwarnings("ignore:invalid value")
def test_internal_error_exit_2(data_dir, capsys):
    code = main(["verify-theory", "--data", str(data_dir), "--trials", "10",
                 "--dim", "-1"])
    assert code == 2
    assert capsys.readouterr().err.startswith("internal error:")


# ---------------------------------------------------------------- verify-theory

def test_verify_theory_report_with_signed_section(data_dir, tmp_path, capsys):
    report = tmp_path / "vt.json"
    code = main([
        "verify-theory", "--data", str(data_dir), "--trials", "4000",
        "--dim", "2", "--e", "0.25", "--out", str(report),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "max |z|" in out
    body = json.loads(report.read_text())
    assert body["command"] == "verify-theory"
    assert len(body["nodes"]) == 60
    assert body["max_abs_z"] < 6.0
    assert body["signed"]["e"] == 0.25
    assert len(body["signed"]["nodes"]) == 60
    cases = {n["case"] for n in body["nodes"]}
    assert cases <= {"LOW_HOMOPHILY", "CONTRACT", "EXPAND"}


def test_verify_theory_byte_identical_across_threads(data_dir, tmp_path,
                                                     monkeypatch, capsys):
    args = ["verify-theory", "--data", str(data_dir), "--trials", "2000"]
    monkeypatch.setenv("GGCNLAB_THREADS", "1")
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    monkeypatch.setenv("GGCNLAB_THREADS", "4")
    assert main(args + ["--out", str(tmp_path / "b.json")]) == 0
    capsys.readouterr()
    assert _read(tmp_path / "a.json") == _read(tmp_path / "b.json")


# ---------------------------------------------------------------- sweeps

def test_sweep_depth_report_and_csv(data_dir, tmp_path, capsys):
    report = tmp_path / "sweep.json"
    csv = tmp_path / "sweep.csv"
    code = main([
        "sweep-depth", "--data", str(data_dir), "--model", "gcn",
        "--depths", "1,2", "--splits", "2", "--hidden", "8",
        "--max-epochs", "4", "--patience", "5",
        "--out", str(report), "--csv", str(csv),
    ])
    assert code == 0
    assert "best depth:" in capsys.readouterr().out
    body = json.loads(report.read_text())
    assert body["best_depth"] in (1, 2)
    assert [r["depth"] for r in body["rows"]] == [1, 2]
    lines = csv.read_text().splitlines()
    assert lines[0] == "depth,mean,stdev"
    assert len(lines) == 3


def test_sweep_depth_byte_identical_across_threads(data_dir, tmp_path,
                                                   monkeypatch, capsys):
    args = ["sweep-depth", "--data", str(data_dir), "--model", "base",
            "--depths", "1,2", "--splits", "2", "--hidden", "4",
            "--max-epochs", "3", "--patience", "5"]
    monkeypatch.setenv("GGCNLAB_THREADS", "1")
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    monkeypatch.setenv("GGCNLAB_THREADS", "3")
    assert main(args + ["--out", str(tmp_path / "b.json")]) == 0
    capsys.readouterr()
    assert _read(tmp_path / "a.json") == _read(tmp_path / "b.json")


def test_ablation_grid_csv(data_dir, tmp_path, capsys):
    report = tmp_path / "ab.json"
    csv = tmp_path / "ab.csv"
    code = main([
        "ablation", "--data", str(data_dir), "--depths", "1", "--splits", "1",
        "--hidden", "4", "--max-epochs", "3", "--patience", "5",
        "--out", str(report), "--csv", str(csv),
    ])
    assert code == 0
    capsys.readouterr()
    body = json.loads(report.read_text())
    assert sorted(body["cells"]) == ["+deg", "+sign", "+sign,deg", "base"]
    lines = csv.read_text().splitlines()
    assert lines[0] == "variant,depth,mean,stdev"
    assert len(lines) == 5


def test_case_study_outputs(data_dir, tmp_path, capsys):
    report = tmp_path / "cs.json"
    csv = tmp_path / "cs.csv"
    code = main([
        "case-study", "--data", str(data_dir), "--model", "gcn",
        "--depths", "1,2", "--bins", "3", "--splits", "1", "--hidden", "8",
        "--max-epochs", "3", "--patience", "5",
        "--out", str(report), "--csv", str(csv),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "case study" in out
    body = json.loads(report.read_text())
    assert len(body["bins"]) == 3
    assert [r["depth"] for r in body["rows"]] == [1, 2]
    assert "initial_stage_last_depth" in body
    lines = csv.read_text().splitlines()
    assert lines[0] == "depth,bin_lo,bin_hi,accuracy,mean_eff_h,population"
    assert len(lines) == 1 + 2 * 3


# ---------------------------------------------------------------- convert-splits

def test_convert_splits_npz_and_json(tmp_path, capsys):
    masks = {
        "train_mask": np.array([True, False, False, True]),
        "val_mask": np.array([False, True, False, False]),
        "test_mask": np.array([False, False, True, False]),
    }
    expected = {"train": [0, 3], "val": [1], "test": [2]}

    np.savez(tmp_path / "m.npz", **masks)
    out = tmp_path / "from_npz.json"
    assert main(["convert-splits", "--in", str(tmp_path / "m.npz"),
                 "--out", str(out)]) == 0
    assert load_splits(out) == [expected]

    with open(tmp_path / "m.json", "w") as fh:
        json.dump({k: v.tolist() for k, v in masks.items()}, fh)
    out2 = tmp_path / "from_json.json"
    assert main(["convert-splits", "--in", str(tmp_path / "m.json"),
                 "--out", str(out2)]) == 0
    assert load_splits(out2) == [expected]
    assert "wrote" in capsys.readouterr().out


def test_convert_splits_missing_input_exit_1(tmp_path, capsys):
    code = main(["convert-splits", "--in", str(tmp_path / "gone.npz"),
                 "--out", str(tmp_path / "o.json")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")
