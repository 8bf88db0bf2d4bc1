"""CSV datasets and model files."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .classifier import ReducedLdaModel
from .core import LabeledDataset
from .csl import wire


def write_dataset(path, data: LabeledDataset) -> None:
    """Write ``d`` feature columns then a label column, floats printed losslessly."""
    header = ",".join([f"x{j + 1}" for j in range(data.d)] + ["label"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, label in zip(data.features, data.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def _has_header(path) -> bool:
    with open(path) as fh:
        first = fh.readline().split(",")[0].strip()
    try:
        float(first)
    except ValueError:
        return True
    return False


def read_matrix(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", skiprows=1 if _has_header(path) else 0, ndmin=2)
    return arr.astype(np.float64)


def read_dataset(path, num_classes: int | None = None) -> LabeledDataset:
    """Read a CSV whose last column holds 1-based labels.

    ``num_classes`` defaults to the largest label present.
    """
    arr = read_matrix(path)
    labels = arr[:, -1]
    if not np.all(labels == np.round(labels)):
        raise ValueError(f"{path}: last column must hold integer labels")
    labels = labels.astype(np.int64)
    k = int(labels.max()) if num_classes is None else num_classes
    return LabeledDataset(arr[:, :-1], labels, k)


def shard_paths(directory) -> list[Path]:
    """CSV files of a shard directory in name order; the first is the master's."""
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise FileNotFoundError(f"no .csv shards in {directory}")
    return paths


def model_to_message(model: ReducedLdaModel, round: int = 0) -> wire.FinalModel:
    return wire.FinalModel(
        round, model.projection, model.proj_means, model.proj_cov, model.log_priors
    )


def model_from_message(msg: wire.FinalModel) -> ReducedLdaModel:
    return ReducedLdaModel(msg.w, msg.proj_means, msg.proj_cov, msg.log_priors)


def save_model(path, model: ReducedLdaModel, round: int = 0) -> None:
    Path(path).write_bytes(wire.encode(model_to_message(model, round)))


def load_model(path) -> ReducedLdaModel:
    msg = wire.decode(Path(path).read_bytes())
    if not isinstance(msg, wire.FinalModel):
        raise ValueError(f"{path} holds a {type(msg).__name__}, not a model")
    return model_from_message(msg)
