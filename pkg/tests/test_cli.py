import json

import numpy as np
import pytest

from leafgraph.cli import main
from leafgraph.data import FeatureStore, read_feature_store, write_feature_store
from leafgraph.rng import Rng


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def dataset_dir(tmp_path, capsys):
    d = tmp_path / "data"
    code, _, _ = run(
        capsys, "synth", "--classes", "3", "--per-class", "12", "--dim", "8",
        "--sigma", "0.4", "--seed", "7", "--out", str(d), "--images",
    )
    assert code == 0
    code, _, _ = run(
        capsys, "split", "--manifest", str(d / "manifest.csv"), "--seed", "7",
        "--out", str(d / "manifest.csv"),
    )
    assert code == 0
    return d


def write_train_config(tmp_path, data_dir, out_dir, extra_model=""):
    cfg = tmp_path / "train.toml"
    cfg.write_text(
        f"""
[model]
arch = "sequential"
hidden_dims = [12]
fan_outs = [5]
theta = 0.2
min_degree = 3
epochs = 3
seed = 11

{extra_model}
[paths]
manifest = "{data_dir / 'manifest.csv'}"
store = "{data_dir / 'features.lgfs'}"
out_dir = "{out_dir}"
""",
        encoding="utf-8",
    )
    return cfg


class TestSynthAndSplit:
    def test_outputs_exist(self, dataset_dir):
        assert (dataset_dir / "manifest.csv").exists()
        assert (dataset_dir / "features.lgfs").exists()
        assert (dataset_dir / "features.lgfs.ids.csv").exists()
        assert (dataset_dir / "effective-config.toml").exists()
        assert len(list((dataset_dir / "images").glob("*.pgm"))) == 36
        store = read_feature_store(dataset_dir / "features.lgfs")
        assert store.n == 36

    def test_split_counts(self, dataset_dir, capsys):
        code, out, _ = run(
            capsys, "split", "--manifest", str(dataset_dir / "manifest.csv"),
            "--seed", "1", "--out", str(dataset_dir / "m2.csv"),
        )
        assert code == 0
        counts = json.loads(out)
        assert counts["train"] + counts["val"] + counts["test"] == 36


class TestBuildGraph:
    def test_graph_cache(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "g.lggr"
        code, stdout, _ = run(
            capsys, "build-graph", "--store", str(dataset_dir / "features.lgfs"),
            "--theta", "0.2", "--min-degree", "2", "--out", str(out),
        )
        assert code == 0 and out.exists()
        info = json.loads(stdout)
        assert info["nodes"] == 36 and info["edges"] > 0


class TestTrainEval:
    def test_train_twice_identical_checkpoints(self, dataset_dir, tmp_path, capsys):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        cfg = write_train_config(tmp_path, dataset_dir, out1)
        code, _, _ = run(capsys, "train", "--config", str(cfg))
        assert code == 0
        cfg2 = write_train_config(tmp_path, dataset_dir, out2)
        code, _, _ = run(capsys, "train", "--config", str(cfg2))
        assert code == 0
        assert (out1 / "model.lgck").read_bytes() == (out2 / "model.lgck").read_bytes()
        assert (out1 / "graph.lggr").read_bytes() == (out2 / "graph.lggr").read_bytes()
        assert (out1 / "training-report.json").exists()
        assert (out1 / "effective-config.toml").exists()

    def test_eval_reports_weighted_identity(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "o"
        cfg = write_train_config(tmp_path, dataset_dir, out)
        assert run(capsys, "train", "--config", str(cfg))[0] == 0
        code, stdout, _ = run(
            capsys, "eval", "--checkpoint", str(out / "model.lgck"),
            "--graph", str(out / "graph.lggr"),
            "--store", str(dataset_dir / "features.lgfs"),
            "--manifest", str(dataset_dir / "manifest.csv"),
            "--split", "test",
        )
        assert code == 0
        report = json.loads(stdout)
        assert report["recall"] == report["accuracy"]

    def test_params_closed_form(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "o"
        cfg = write_train_config(tmp_path, dataset_dir, out)
        code, stdout, _ = run(capsys, "params", "--config", str(cfg))
        assert code == 0
        report = json.loads(stdout)
        # sage0: 12 * (2*8) + 12;  head: 3*12 + 3
        assert report["per_layer"]["sage0"] == 12 * 16 + 12
        assert report["per_layer"]["head"] == 3 * 12 + 3
        assert report["total"] == 204 + 39

    def test_ablate_single_arch(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "o"
        cfg = write_train_config(tmp_path, dataset_dir, out, extra_model="")
        code, stdout, _ = run(
            capsys, "ablate", "--config", str(cfg), "--arch", "cnn_only",
        )
        assert code == 0
        rows = json.loads(stdout)
        assert len(rows) == 1 and rows[0]["arch"] == "cnn_only"
        assert (out / "ablation.json").exists()


class TestExplainCli:
    def test_eigencam_writes_pgm(self, dataset_dir, tmp_path, capsys):
        rng = Rng(5)
        n, h, w, c = 4, 5, 5, 8
        ids = [f"sp{i}" for i in range(n)]
        payload = rng.normal(n * h * w * c).reshape(n, h, w, c).astype(np.float32)
        spath = tmp_path / "spatial.lgfs"
        write_feature_store(FeatureStore("spatial", (h, w, c), payload, ids), spath)
        out = tmp_path / "maps"
        code, stdout, _ = run(
            capsys, "explain", "--method", "eigencam", "--spatial-store",
            str(spath), "--ids", "sp0,sp2", "--out", str(out),
        )
        assert code == 0
        results = json.loads(stdout)
        assert len(results) == 2
        assert (out / "sp0.eigencam.pgm").exists()
        assert (out / "sp2.eigencam.pgm").exists()


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run(capsys, "frobnicate")[0] == 1

    def test_missing_required_flag(self, capsys):
        assert run(capsys, "synth")[0] == 1

    def test_corrupt_store_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.lgfs"
        bad.write_bytes(b"nope")
        code, _, err = run(
            capsys, "build-graph", "--store", str(bad), "--out",
            str(tmp_path / "g.lggr"),
        )
        assert code == 2 and "error" in err

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        code, _, _ = run(
            capsys, "build-graph", "--store", str(tmp_path / "absent.lgfs"),
            "--out", str(tmp_path / "g.lggr"),
        )
        assert code == 3

    def test_seed_env_override(self, dataset_dir, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("LEAFGRAPH_SEED", "123")
        d = tmp_path / "env_seeded"
        code, _, _ = run(
            capsys, "synth", "--classes", "2", "--per-class", "6", "--dim", "4",
            "--sigma", "0.5", "--out", str(d),
        )
        assert code == 0
        text = (d / "effective-config.toml").read_text()
        assert "seed = 123" in text
