import numpy as np
import pytest

from bdlrr.cli import COMMANDS, build_parser, execute_command, main
from bdlrr.data import load_labels, load_matrix, save_matrix

SMALL = ["--classes", "3", "--subspace-dim", "3", "--ambient", "20", "--train", "5", "--test", "3"]


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", *SMALL, "--seed", "2", "--out", str(out)]) == 0
    return out


@pytest.fixture
def model_dir(tmp_path, dataset_dir):
    out = tmp_path / "run"
    assert main(["train", "--data", str(dataset_dir), "--max-iter", "30", "--out", str(out)]) == 0
    return out


def test_registry_and_flags():
    assert set(COMMANDS) == {"synth", "train", "predict", "oos", "rpca", "lrr", "eval", "sweep"}
    args = build_parser().parse_args(["train", "--data", "d", "--out", "o", "--mu-max", "1e6"])
    assert args.mu_max == "1e6"
    assert not hasattr(args, "lambda1")


def test_missing_required_flag_exits():
    with pytest.raises(SystemExit) as info:
        main(["train", "--out", "o"])
    assert info.value.code == 2


def test_synth_is_deterministic(tmp_path, dataset_dir):
    names = ("X_tr.txt", "X_tt.txt", "train_labels.txt", "test_labels.txt", "manifest.txt")
    first = {name: (dataset_dir / name).read_bytes() for name in names}
    assert main(["synth", *SMALL, "--seed", "2", "--out", str(dataset_dir)]) == 0
    for name in names:
        assert (dataset_dir / name).read_bytes() == first[name]
    manifest = (dataset_dir / "manifest.txt").read_text()
    assert "seed=2\n" in manifest
    assert "noise=0.05\n" in manifest

    other = tmp_path / "other"
    assert main(["synth", *SMALL, "--seed", "3", "--out", str(other)]) == 0
    assert (other / "X_tr.txt").read_bytes() != first["X_tr.txt"]


def test_seed_flag_belongs_to_synth_only(tmp_path):
    for name in ("eval", "sweep"):
        with pytest.raises(SystemExit) as info:
            main([name, "--seed", "3", "--out", str(tmp_path / name)])
        assert info.value.code == 2


def test_train_outputs(model_dir, capsys):
    for name in ("W.txt", "Z_tr.txt", "model.txt", "Z.txt", "E.txt", "history.csv", "predictions.txt"):
        assert (model_dir / name).exists()
    metrics = (model_dir / "metrics.txt").read_text()
    assert "converged=false\n" in metrics
    assert "iterations=30\n" in metrics
    assert "lambda1=5.0\n" in metrics
    assert len((model_dir / "history.csv").read_text().splitlines()) == 31
    assert "lambda3=15.0" in (model_dir / "model.txt").read_text()


def test_predict(model_dir, tmp_path, capsys):
    capsys.readouterr()
    assert main(["predict", "--model", str(model_dir), "--representation", str(model_dir / "Z_tr.txt")]) == 0
    labels = capsys.readouterr().out.split()
    assert len(labels) == 15
    assert set(labels) <= {"1", "2", "3"}

    out = tmp_path / "labels.txt"
    main(["predict", "--model", str(model_dir), "--representation", str(model_dir / "Z_tr.txt"), "--out", str(out)])
    assert load_labels(out).size == 15


def test_oos(model_dir, dataset_dir, tmp_path):
    out = tmp_path / "oos.txt"
    code = main(
        [
            "oos", "--model", str(model_dir), "--data", str(dataset_dir),
            "--instances", str(dataset_dir / "X_tt.txt"), "--max-iter", "50",
            "--workers", "2", "--out", str(out),
        ]
    )
    assert code == 0
    assert load_labels(out).size == 9


def test_rpca_and_lrr(tmp_path, rng):
    matrix = tmp_path / "m.txt"
    save_matrix(rng.standard_normal((8, 2)) @ rng.standard_normal((2, 10)), matrix)
    assert main(["rpca", "--matrix", str(matrix), "--max-iter", "50", "--out", str(tmp_path / "rpca")]) == 0
    assert load_matrix(tmp_path / "rpca" / "X0.txt").shape == (8, 10)
    assert "converged=" in (tmp_path / "rpca" / "summary.txt").read_text()

    assert main(["lrr", "--matrix", str(matrix), "--lam", "0.5", "--out", str(tmp_path / "lrr")]) == 0
    assert load_matrix(tmp_path / "lrr" / "Z.txt").shape == (10, 10)
    assert load_matrix(tmp_path / "lrr" / "E.txt").shape == (8, 10)


def test_rpca_leaves_clean_rank_one_untouched(tmp_path, rng):
    matrix = tmp_path / "m.txt"
    X = np.outer(rng.standard_normal(8), np.ones(10))
    save_matrix(X, matrix)
    assert main(["rpca", "--matrix", str(matrix), "--out", str(tmp_path / "rpca")]) == 0
    np.testing.assert_allclose(load_matrix(tmp_path / "rpca" / "X0.txt"), X, atol=1e-12)
    np.testing.assert_allclose(load_matrix(tmp_path / "rpca" / "E.txt"), 0.0, atol=1e-12)
    assert "converged=true\n" in (tmp_path / "rpca" / "summary.txt").read_text()


def test_eval_writes_report(tmp_path, capsys):
    out = tmp_path / "report.txt"
    assert main(["eval", *SMALL, "--repeats", "2", "--max-iter", "20", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("mean_accuracy=")
    assert "trials=2\n" in text
    assert "repeats=2\n" in text
    assert "mean_accuracy=" in capsys.readouterr().out


def test_sweep_writes_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(
        ["sweep", *SMALL, "--lambda1-grid", "0.1,1", "--lambda2-grid", "0.5", "--max-iter", "20", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "lambda1,lambda2,mean_accuracy,std_accuracy"
    assert len(lines) == 3


def test_invalid_input_exit_code(tmp_path, capsys):
    assert main(["synth", "--subspace-dim", "60", "--out", str(tmp_path / "x")]) == 2
    assert main(["train", "--data", "d", "--lambda3", "0", "--out", str(tmp_path / "y")]) == 2
    assert execute_command("synth", {"out": "x", "bogus": 1}) == 2
    assert "Invalid input" in capsys.readouterr().err


def test_failures_exit_with_message(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("2 2\n1 2\n")
    assert main(["rpca", "--matrix", str(bad), "--out", str(tmp_path / "r")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("Error: ")
    assert "bad.txt:2" in err
    assert main(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "t")]) == 1


@pytest.mark.slow
def test_eval_separable_subspaces(tmp_path):
    out = tmp_path / "report.txt"
    flags = [
        "--lambda1", "0.1", "--lambda2", "5", "--lambda3", "25", "--rho", "1.01", "--mu0", "1",
        "--max-iter", "3000", "--noise", "0", "--subspace-dim", "5", "--classes", "4",
        "--train", "25", "--test", "10", "--repeats", "1",
    ]
    assert main(["eval", *flags, "--out", str(out)]) == 0
    text = out.read_text()
    assert "mean_accuracy=1.0\n" in text
    assert "std_accuracy=0.0\n" in text
