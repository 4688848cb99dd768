"""Command-line interface, exercised in-process through main()."""

import json

import numpy as np
import pytest

from mvdec import dataio
from mvdec.cli import main


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / "ds"
    code = main([
        "generate", "--out", str(out), "--n", "90", "--k", "3",
        "--dims", "5,5", "--noise", "0.05,0.2", "--seed", "4",
    ])
    assert code == 0
    return out


def train_config(tmp_path, **extra):
    cfg = {
        "k": 3, "batch_size": 30, "pretrain_epochs": 5,
        "finetune_batches_per_round": 30, "aligned_stop": 0.9, "max_rounds": 2,
        "hidden_dims": [12, 6], "embed_dim": 3, "seed": 1, "learning_rate": 0.003,
        "kmeans_restarts": 3,
    }
    cfg.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestGenerate:
    def test_writes_dataset(self, dataset_dir, capsys):
        assert (dataset_dir / "manifest.json").exists()
        ds = dataio.load_dataset(dataset_dir)
        assert ds.n == 90 and ds.dims == (5, 5)

    def test_preset(self, tmp_path, capsys):
        assert main(["generate", "--out", str(tmp_path / "p"), "--preset", "noisy-view"]) == 0
        assert "noisy-view" in capsys.readouterr().out
        ds = dataio.load_dataset(tmp_path / "p")
        assert ds.n == 1000 and ds.v == 3

    def test_preset_conflicts_with_explicit_shape(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["generate", "--out", str(tmp_path / "x"), "--preset", "noisy-view", "--n", "10"])
        assert excinfo.value.code != 0

    def test_missing_shape_arguments(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["generate", "--out", str(tmp_path / "x"), "--n", "10"])

    def test_csv_format(self, tmp_path):
        assert main([
            "generate", "--out", str(tmp_path / "c"), "--n", "20", "--k", "2",
            "--dims", "3", "--noise", "0.1", "--format", "csv",
        ]) == 0
        assert (tmp_path / "c" / "view0.csv").exists()
        dataio.load_dataset(tmp_path / "c")


class TestTrain:
    def test_end_to_end(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "run"
        code = main([
            "train", "--dataset", str(dataset_dir), "--out", str(out),
            "--config", str(train_config(tmp_path)),
        ])
        assert code == 0
        report = dataio.read_report(out / "report.json")
        assert report["stop_reason"] in ("aligned_threshold", "max_rounds")
        assert not report["incomplete"]
        labels = dataio.read_labels(out / "labels.csv")
        assert labels.shape == (90,)
        assert (out / "labels_view0.csv").exists()
        assert (out / "labels_view1.csv").exists()
        assert (out / "models" / "view0.npz").exists()
        assert (out / "embeddings_global.csv").exists()
        assert "stop=" in capsys.readouterr().out

    def test_flag_overrides_config(self, dataset_dir, tmp_path):
        out = tmp_path / "run"
        code = main([
            "train", "--dataset", str(dataset_dir), "--out", str(out),
            "--config", str(train_config(tmp_path)), "--max-rounds", "1",
        ])
        assert code == 0
        assert dataio.read_report(out / "report.json")["config"]["max_rounds"] == 1

    def test_k_from_flag_without_config(self, dataset_dir, tmp_path):
        out = tmp_path / "run"
        code = main([
            "train", "--dataset", str(dataset_dir), "--out", str(out),
            "--k", "3", "--pretrain-epochs", "2", "--max-rounds", "1",
            "--hidden-dims", "8,4", "--embed-dim", "3", "--batch-size", "30",
            "--finetune-batches-per-round", "10",
        ])
        assert code == 0

    def test_unknown_config_key_rejected(self, dataset_dir, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"k": 3, "typo_field": 1}))
        code = main(["train", "--dataset", str(dataset_dir), "--out", str(tmp_path / "r"),
                     "--config", str(bad)])
        assert code != 0
        assert "typo_field" in capsys.readouterr().err

    def test_missing_k_rejected(self, dataset_dir, tmp_path, capsys):
        code = main(["train", "--dataset", str(dataset_dir), "--out", str(tmp_path / "r"),
                     "--pretrain-epochs", "1"])
        assert code != 0
        assert "k is required" in capsys.readouterr().err

    def test_invalid_mode_rejected_by_parser(self, dataset_dir, tmp_path):
        with pytest.raises(SystemExit):
            main(["train", "--dataset", str(dataset_dir), "--out", str(tmp_path / "r"),
                  "--k", "3", "--mode", "banana"])

    def test_baseline_mode_skips_consensus_labels(self, dataset_dir, tmp_path):
        out = tmp_path / "run"
        code = main([
            "train", "--dataset", str(dataset_dir), "--out", str(out),
            "--config", str(train_config(tmp_path, mode="idec_per_view")),
        ])
        assert code == 0
        assert not (out / "labels.csv").exists()
        assert (out / "labels_view0.csv").exists()

    def test_nonexistent_dataset(self, tmp_path, capsys):
        code = main(["train", "--dataset", str(tmp_path / "missing"),
                     "--out", str(tmp_path / "r"), "--k", "2"])
        assert code != 0


class TestEval:
    def test_perfect_labels(self, tmp_path, capsys):
        labels = np.array([0, 1, 2, 0, 1, 2])
        dataio.write_labels(tmp_path / "a.csv", labels)
        dataio.write_labels(tmp_path / "b.csv", (labels + 1) % 3)
        assert main(["eval", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 0
        scores = json.loads(capsys.readouterr().out)
        assert scores == {"acc": 1.0, "nmi": 1.0, "ari": 1.0}

    def test_known_fixture(self, tmp_path, capsys):
        dataio.write_labels(tmp_path / "p.csv", np.array([0, 0, 1, 1]))
        dataio.write_labels(tmp_path / "t.csv", np.array([0, 1, 1, 1]))
        assert main(["eval", str(tmp_path / "p.csv"), str(tmp_path / "t.csv")]) == 0
        assert json.loads(capsys.readouterr().out)["acc"] == 0.75

    def test_missing_file(self, tmp_path, capsys):
        dataio.write_labels(tmp_path / "p.csv", np.array([0, 1]))
        assert main(["eval", str(tmp_path / "p.csv"), str(tmp_path / "nope.csv")]) != 0

    def test_length_mismatch(self, tmp_path, capsys):
        dataio.write_labels(tmp_path / "p.csv", np.array([0, 1]))
        dataio.write_labels(tmp_path / "t.csv", np.array([0, 1, 1]))
        assert main(["eval", str(tmp_path / "p.csv"), str(tmp_path / "t.csv")]) != 0


class TestExportEmbeddings:
    def test_round_trip_matches_training_export(self, dataset_dir, tmp_path):
        run = tmp_path / "run"
        assert main([
            "train", "--dataset", str(dataset_dir), "--out", str(run),
            "--config", str(train_config(tmp_path)),
        ]) == 0
        out = tmp_path / "exported"
        assert main([
            "export-embeddings", "--models", str(run / "models"),
            "--dataset", str(dataset_dir), "--out", str(out),
        ]) == 0
        for name in ("embeddings_view0.csv", "embeddings_view1.csv", "embeddings_global.csv"):
            assert (out / name).read_bytes() == (run / name).read_bytes()

    def test_missing_models_dir(self, dataset_dir, tmp_path):
        assert main([
            "export-embeddings", "--models", str(tmp_path / "none"),
            "--dataset", str(dataset_dir), "--out", str(tmp_path / "o"),
        ]) != 0
