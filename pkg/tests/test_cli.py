import subprocess
import sys

import numpy as np
import pytest

from dmslda import cli
from dmslda.core import LabeledDataset
from dmslda.experiments import generate_shards, multiclass_setting
from dmslda.io import load_model, read_dataset, save_model, write_dataset
from dmslda.classifier import fit_reduced_lda
from dmslda.summaries import compute_class_summaries


@pytest.fixture
def shard_dir(tmp_path):
    setting = multiclass_setting(d=20, b=25, M=3, test_per_class=40)
    shards, test = generate_shards(setting, 0)
    d = tmp_path / "shards"
    d.mkdir()
    for m, sh in enumerate(shards, start=1):
        write_dataset(d / f"machine{m:02d}.csv", sh)
    write_dataset(tmp_path / "test.csv", test)
    return tmp_path


def test_dataset_round_trip_is_exact(tmp_path, rng):
    data = LabeledDataset(rng.standard_normal((6, 3)), np.array([1, 2, 3, 1, 2, 3]), 3)
    write_dataset(tmp_path / "x.csv", data)
    back = read_dataset(tmp_path / "x.csv")
    assert back.features.tobytes() == data.features.tobytes()
    np.testing.assert_array_equal(back.labels, data.labels)


def test_model_file_round_trip(tmp_path, rng):
    data = LabeledDataset(rng.standard_normal((12, 4)), np.repeat([1, 2, 3], 4), 3)
    model = fit_reduced_lda(rng.standard_normal((4, 2)), compute_class_summaries(data))
    save_model(tmp_path / "m.bin", model)
    back = load_model(tmp_path / "m.bin")
    assert back.proj_cov.tobytes() == model.proj_cov.tobytes()
    assert back.log_priors.tobytes() == model.log_priors.tobytes()


def test_fit_then_predict(shard_dir, capsys):
    model = shard_dir / "model.bin"
    assert cli.main(["fit", "--input", str(shard_dir / "shards"), "--rounds", "2", "--out", str(model)]) == 0
    assert "chosen_round=" in capsys.readouterr().out
    labels = shard_dir / "labels.csv"
    assert cli.main(["predict", "--model", str(model), "--input", str(shard_dir / "test.csv"), "--out", str(labels)]) == 0
    out = capsys.readouterr().out
    mcr = float(out.split("mcr=")[1])
    assert mcr < 0.5
    rows = labels.read_text().splitlines()
    assert rows[0] == "label" and len(rows) == 121


def test_fit_over_tcp_spawns_workers(shard_dir):
    mem, tcp = shard_dir / "mem.bin", shard_dir / "tcp.bin"
    base = ["fit", "--input", str(shard_dir / "shards"), "--rounds", "1"]
    cli.main(base + ["--out", str(mem)])
    cli.main(base + ["--transport", "tcp", "--out", str(tcp)])
    assert mem.read_bytes() == tcp.read_bytes()


def test_machines_flag_limits_shards(shard_dir):
    with pytest.raises(SystemExit):
        cli.main(["fit", "--input", str(shard_dir / "shards"), "--machines", "9", "--out", "x"])


def test_module_entry_point_help():
    out = subprocess.run(
        [sys.executable, "-m", "dmslda", "--help"], capture_output=True, text=True, check=True
    ).stdout
    for cmd in ("fit", "predict", "experiment", "serve-worker"):
        assert cmd in out
