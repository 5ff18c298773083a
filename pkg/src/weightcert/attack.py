"""Weight-space PGD: signed-gradient ascent on the weights with clipping.

Each iteration takes a signed-gradient step of size alpha on every weight
matrix and clips elementwise back into the l_inf ball of radius eps around
the original weights.  The gradient is that of the mean cross-entropy over
the provided dataset (full set per step by default; a batch option cycles
through seeded minibatches).  The attack starts at W exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .losses import LossConfig, total_loss_and_gradient
from .network import Network, accuracy

SWEEP_SCHEMA_COMMENT = "# weightcert-csv v1 attack-sweep"


@dataclass(frozen=True)
class AttackConfig:
    eps_test: float
    steps: int = 200
    step_size: float | None = None  # default 2.5 * eps / steps
    loss: str = "cross_entropy"
    seed: int = 0
    batch_size: int | None = None  # None = full-set gradient per step

    def __post_init__(self):
        if self.eps_test < 0:
            raise ValueError("eps_test must be nonnegative")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.loss != "cross_entropy":
            raise ValueError("only cross_entropy attack loss is supported")

    @property
    def alpha(self) -> float:
        if self.step_size is not None:
            return self.step_size
        return 2.5 * self.eps_test / self.steps


def weight_pgd(net: Network, dataset: Dataset, config: AttackConfig) -> Network:
    """Perturbed copy of net; every entry within eps_test of the original."""
    if config.eps_test == 0.0:
        return net.copy()
    eps = config.eps_test
    alpha = config.alpha
    cls_cfg = LossConfig(lam=0.0, mu=0.0, classification_loss="cross_entropy",
                         regularizer="none")
    originals = [w.copy() for w in net.weights]
    attacked = net.copy()

    if config.batch_size is None:
        batches = None
    else:
        rng = np.random.default_rng(config.seed)
        perm = rng.permutation(len(dataset))
        batches = [perm[lo:lo + config.batch_size]
                   for lo in range(0, len(dataset), config.batch_size)]

    for step in range(config.steps):
        if batches is None:
            xs, ys = dataset.inputs, dataset.labels
        else:
            idx = batches[step % len(batches)]
            xs, ys = dataset.inputs[idx], dataset.labels[idx]
        loss, grads = total_loss_and_gradient(attacked, xs, ys, cls_cfg)
        if not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads):
            raise RuntimeError(f"non-finite attack gradient at step {step}")
        for k in range(len(attacked.weights)):
            stepped = attacked.weights[k] + alpha * np.sign(grads[k])
            attacked.weights[k] = np.clip(stepped, originals[k] - eps, originals[k] + eps)
            assert np.all(np.abs(attacked.weights[k] - originals[k]) <= eps + 1e-15)
    return attacked


def robust_accuracy_sweep(net: Network, dataset: Dataset, eps_grid,
                          steps: int = 200, seed: int = 0,
                          batch_size: int | None = None) -> list[tuple[float, float]]:
    """Accuracy under the weight PGD attack at each eps of an ascending grid."""
    eps_grid = [float(e) for e in eps_grid]
    if eps_grid != sorted(eps_grid):
        raise ValueError("eps_grid must be sorted ascending")
    curve = []
    for eps in eps_grid:
        if eps == 0.0:
            acc = accuracy(net, dataset)
        else:
            cfg = AttackConfig(eps_test=eps, steps=steps, seed=seed,
                               batch_size=batch_size)
            acc = accuracy(weight_pgd(net, dataset, cfg), dataset)
        curve.append((eps, acc))
    return curve


def auc(curve) -> float:
    """Trapezoidal area under accuracy vs eps, normalized by the eps span."""
    eps = np.array([p[0] for p in curve], dtype=np.float64)
    acc = np.array([p[1] for p in curve], dtype=np.float64)
    if len(eps) == 0:
        raise ValueError("empty curve")
    span = eps[-1] - eps[0]
    if span == 0.0:
        return float(acc[0])
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(acc, eps) / span)


def write_sweep_csv(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SWEEP_SCHEMA_COMMENT + "\n")
        writer = csv.writer(fh)
        writer.writerow(["eps", "accuracy", "auc_to_date"])
        for i in range(len(curve)):
            writer.writerow([repr(curve[i][0]), repr(curve[i][1]),
                             repr(auc(curve[:i + 1]))])
