import json

import numpy as np
import pytest
import torch

from ftin.cli import main
from ftin.evaluation import read_trajectory_csv
from ftin.imu_data import load_canonical
from ftin.model import build_model, load_checkpoint, save_checkpoint

SMALL_MODEL = {
    "preset": "desk",
    "L": 64,
    "backbone": {"channels": [4, 6, 8], "strides": [1, 2, 2], "blocks_per_stage": 1, "kernel_size": 3},
    "d": 4,
    "l_fre": 6,
    "slstm": {"hidden_size": 5, "num_layers": 1},
    "head_widths": [6, 4, 2],
}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    spec = write_json(root / "spec.json", {"duration": 8, "n": 12, "gait_amplitude": 0.01})
    assert main(["synth", "--spec", spec, "--out", str(root / "data"), "--seed", "3"]) == 0
    config = write_json(
        root / "run.json",
        {
            "version": 1,
            "model": SMALL_MODEL,
            "train": {"max_epochs": 2, "batch_size": 32, "lr_init": 1e-3},
            "data": {"train_stride": 32, "val_stride": 64, "eval_stride": 32},
        },
    )
    return root, root / "data", config


def test_synth_writes_directories_and_manifest(tmp_path):
    spec = write_json(tmp_path / "s.json", {"duration": 3, "n": 5})
    assert main(["synth", "--spec", spec, "--out", str(tmp_path / "o")]) == 0
    dirs = sorted(p.name for p in (tmp_path / "o").iterdir() if p.is_dir())
    assert dirs == [f"seq_{i:03d}" for i in range(5)]
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["command"] == "synth" and "corpus.json" in manifest["outputs"]
    assert all((tmp_path / "o" / p).exists() for p in manifest["outputs"])
    seq = load_canonical(tmp_path / "o" / "seq_002")
    assert len(seq) == 300 and seq.pos is not None


def test_synth_rerun_byte_identical(tmp_path):
    spec = write_json(tmp_path / "s.json", {"duration": 3, "n": 3})
    for k in ("a", "b"):
        assert main(["synth", "--spec", spec, "--seed", "9", "--out", str(tmp_path / k)]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files = [f for f in files if f.name != "manifest.json"]
    assert len(files) == 3 * 2 + 1
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_synth_invalid_spec(tmp_path, capsys):
    spec = write_json(tmp_path / "s.json", {"duration": -1, "n": 2})
    assert main(["synth", "--spec", spec, "--out", str(tmp_path / "o")]) == 2
    assert "duration" in capsys.readouterr().err


def test_unknown_spec_field(tmp_path, capsys):
    spec = write_json(tmp_path / "s.json", {"durration": 4})
    assert main(["synth", "--spec", spec, "--out", str(tmp_path / "o")]) == 2
    assert "durration" in capsys.readouterr().err


def test_bad_arguments_exit_2():
    assert main(["train", "--variant", "v"]) == 2
    assert main([]) == 2


def test_train_outputs(corpus, tmp_path):
    _, data, config = corpus
    out = tmp_path / "run"
    assert main(["train", "--data", str(data), "--config", config, "--variant", "iv", "--out", str(out)]) == 0
    hist = json.loads((out / "history.json").read_text())
    assert 1 <= len(hist["epoch"]) <= 100
    manifest = json.loads((out / "manifest.json").read_text())
    import hashlib

    assert manifest["checkpoint_sha256"] == hashlib.sha256((out / "best.ckpt").read_bytes()).hexdigest()
    assert manifest["config"]["model"]["tdl_enabled"] is True
    log = (out / "train.log").read_text()
    assert "epoch 0" in log and "epoch 1" in log
    split = json.loads((out / "split.json").read_text())
    assert len(split["train"]) + len(split["val"]) + len(split["test"]) == 12


def test_train_is_byte_identical(corpus, tmp_path):
    _, data, config = corpus
    for k in ("a", "b"):
        argv = ["train", "--data", str(data), "--config", config, "--seed", "5", "--threads", "1", "--out", str(tmp_path / k)]
        assert main(argv) == 0
    for name in ("best.ckpt", "last.ckpt", "train.log", "split.json", "config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_flag_overrides_config(corpus, tmp_path):
    _, data, config = corpus
    assert main(["train", "--data", str(data), "--config", config, "--epochs", "1", "--out", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "history.json").read_text())["epoch"] == [0]


def test_resume_continues_epochs(corpus, tmp_path):
    _, data, config = corpus
    out = str(tmp_path / "o")
    assert main(["train", "--data", str(data), "--config", config, "--epochs", "1", "--out", out]) == 0
    assert main(["train", "--data", str(data), "--config", config, "--epochs", "3", "--resume", "--out", out]) == 0
    assert json.loads((tmp_path / "o" / "history.json").read_text())["epoch"] == [0, 1, 2]


def test_resume_without_checkpoint(corpus, tmp_path):
    _, data, config = corpus
    assert main(["train", "--data", str(data), "--config", config, "--resume", "--out", str(tmp_path / "o")]) == 2


def test_train_missing_data(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2
    assert "nope" in capsys.readouterr().err


def test_config_version_checked(tmp_path, corpus):
    _, data, _ = corpus
    cfg = write_json(tmp_path / "c.json", {"version": 7})
    assert main(["train", "--data", str(data), "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_eval_outputs(corpus, tmp_path):
    _, data, config = corpus
    run = tmp_path / "run"
    assert main(["train", "--data", str(data), "--config", config, "--out", str(run)]) == 0
    ev = tmp_path / "ev"
    assert main(["eval", "--checkpoint", str(run / "best.ckpt"), "--data", str(data), "--config", config, "--out", str(ev)]) == 0
    metrics = json.loads((ev / "metrics.json").read_text())
    assert np.isfinite(metrics["ate"])
    n_test = len(json.loads((run / "split.json").read_text())["test"])
    assert len(metrics["per_sequence"]) == n_test
    assert len(list(ev.glob("trajectory_*.csv"))) == n_test


def test_eval_zero_weights_matches_baseline(corpus, tmp_path):
    _, data, config = corpus
    from ftin.cli import load_run_config

    cfg = load_run_config(config).model
    params = {k: torch.zeros_like(v) for k, v in build_model(cfg).state_dict().items()}
    save_checkpoint(tmp_path / "zero.ckpt", cfg, params)
    ev = tmp_path / "ev"
    argv = ["eval", "--checkpoint", str(tmp_path / "zero.ckpt"), "--data", str(data), "--split", "all", "--config", config]
    assert main(argv + ["--out", str(ev)]) == 0
    metrics = json.loads((ev / "metrics.json").read_text())
    # baseline: stay at the ground-truth start for every reconstructed time stamp
    for row in metrics["per_sequence"]:
        seq = load_canonical(data / row["id"])
        pred, _ = read_trajectory_csv(ev / f"trajectory_{row['id']}.csv")
        g = np.column_stack([np.interp(pred.t, seq.t, seq.pos[:, k]) for k in range(2)])
        baseline = np.sqrt(np.mean(np.sum((g - g[0]) ** 2, axis=1)))
        assert row["ate"] == pytest.approx(baseline, rel=1e-12, abs=1e-12)


def test_eval_missing_checkpoint(tmp_path, corpus):
    _, data, _ = corpus
    assert main(["eval", "--checkpoint", str(tmp_path / "x.ckpt"), "--data", str(data), "--out", str(tmp_path)]) == 2


def test_ablate_table_and_routing(corpus, tmp_path):
    _, data, config = corpus
    out = tmp_path / "abl"
    assert main(["ablate", "--data", str(data), "--config", config, "--epochs", "1", "--out", str(out)]) == 0
    rows = json.loads((out / "ablation.json").read_text())
    assert [r["variant"] for r in rows] == ["i", "ii", "iii", "iv"]
    assert len({r["config_hash"] for r in rows}) == 4
    assert all("ate" in r and "rte" in r for r in rows)
    table = (out / "ablation.md").read_text().splitlines()
    assert len(table) == 6
    direct = tmp_path / "direct"
    argv = ["--data", str(data), "--config", config, "--epochs", "1", "--variant", "i"]
    assert main(["train", *argv, "--out", str(direct)]) == 0
    assert (direct / "best.ckpt").read_bytes() == (out / "i" / "best.ckpt").read_bytes()
    assert main(["eval", "--checkpoint", str(direct / "best.ckpt"), "--data", str(data), "--config", config,
                 "--out", str(direct / "ev")]) == 0
    assert json.loads((direct / "ev" / "metrics.json").read_text())["ate"] == rows[0]["ate"]


def test_plot_outputs(corpus, tmp_path):
    _, data, config = corpus
    run = tmp_path / "run"
    main(["train", "--data", str(data), "--config", config, "--epochs", "1", "--out", str(run)])
    for k in ("e1", "e2"):
        main(["eval", "--checkpoint", str(run / "best.ckpt"), "--data", str(data), "--config", config,
              "--out", str(tmp_path / k)])
    csv = sorted((tmp_path / "e1").glob("trajectory_*.csv"))[0]
    out = tmp_path / "fig"
    argv = ["plot", str(csv), str(tmp_path / "e1" / "metrics.json"), str(tmp_path / "e2" / "metrics.json"), "--out", str(out)]
    assert main(argv) == 0
    for name in (f"overlay_{csv.stem}.png", "cdf.png", "pde.png"):
        assert (out / name).stat().st_size > 0


def test_plot_missing_file(tmp_path, capsys):
    missing = tmp_path / "nothing.csv"
    assert main(["plot", str(missing), "--out", str(tmp_path / "o")]) == 2
    assert str(missing) in capsys.readouterr().err
