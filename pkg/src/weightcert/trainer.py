"""Mini-batch SGD-with-momentum training over the robust objective.

Fully deterministic given the config seed: initialization uses the seed
directly and each epoch's shuffle uses (seed, epoch).  Velocity update is
v <- momentum * v - lr * grad; W <- W + v.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, subsample
from .linalg import max_column_l1, max_row_l1, spectral_norm
from .losses import LossConfig, total_loss_and_gradient
from .network import Network, NetworkSpec, accuracy, initialize


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    train_subset_size: int | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class RunRecord:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)
    layer_col_norms: list[list[float]] = field(default_factory=list)
    layer_row_norms: list[list[float]] = field(default_factory=list)
    layer_spectral_norms: list[list[float]] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)


RUNRECORD_SCHEMA_COMMENT = "# weightcert-csv v1 runrecord"


def write_runrecord_csv(path, record: RunRecord) -> None:
    num_layers = len(record.layer_col_norms[0]) if record.layer_col_norms else 0
    header = ["epoch", "train_loss", "train_acc", "test_acc"]
    for k in range(1, num_layers + 1):
        header += [f"col_1inf_norm_{k}", f"row_1inf_norm_{k}", f"spectral_norm_{k}"]
    header.append("wall_clock_sec")
    with open(path, "w", newline="") as fh:
        fh.write(RUNRECORD_SCHEMA_COMMENT + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for e in range(len(record.train_loss)):
            row = [e + 1, repr(record.train_loss[e]),
                   repr(record.train_accuracy[e]), repr(record.test_accuracy[e])]
            for k in range(num_layers):
                row += [repr(record.layer_col_norms[e][k]),
                        repr(record.layer_row_norms[e][k]),
                        repr(record.layer_spectral_norms[e][k])]
            row.append(repr(record.wall_clock[e]))
            writer.writerow(row)


def evaluate(net: Network, dataset: Dataset) -> float:
    return accuracy(net, dataset)


def train(spec: NetworkSpec, train_set: Dataset, config: TrainConfig,
          test_set: Dataset | None = None) -> tuple[Network, RunRecord]:
    if len(train_set) == 0:
        raise ValueError("empty training set")
    if train_set.dim != spec.input_dim:
        raise ValueError(
            f"dataset dim {train_set.dim} does not match network input {spec.input_dim}"
        )
    if config.train_subset_size is not None:
        train_set = subsample(train_set, config.train_subset_size, config.seed)

    net = initialize(spec, config.seed)
    velocity = [np.zeros_like(w) for w in net.weights]
    record = RunRecord()
    n = len(train_set)
    start = time.monotonic()

    for epoch in range(config.epochs):
        rng = np.random.default_rng((config.seed, epoch))
        perm = rng.permutation(n)
        epoch_losses = []
        for lo in range(0, n, config.batch_size):
            idx = perm[lo:lo + config.batch_size]
            loss, grads = total_loss_and_gradient(
                net, train_set.inputs[idx], train_set.labels[idx], config.loss
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch + 1}"
                )
            epoch_losses.append(loss)
            for k in range(len(net.weights)):
                velocity[k] = config.momentum * velocity[k] - config.learning_rate * grads[k]
                net.weights[k] = net.weights[k] + velocity[k]

        record.train_loss.append(float(np.mean(epoch_losses)))
        record.train_accuracy.append(accuracy(net, train_set))
        record.test_accuracy.append(
            accuracy(net, test_set) if test_set is not None else float("nan")
        )
        record.layer_col_norms.append([max_column_l1(w) for w in net.weights])
        record.layer_row_norms.append([max_row_l1(w) for w in net.weights])
        record.layer_spectral_norms.append([spectral_norm(w) for w in net.weights])
        record.wall_clock.append(time.monotonic() - start)

    return net, record
