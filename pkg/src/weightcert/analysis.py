"""Generalization statistics, bound-vacuity diagnostics, and quantization.

The Rademacher terms are closed forms evaluated at the trained network's own
norms (the tightest admissible hypothesis class containing it).  The margin
term's leading constant is exposed as a parameter defaulting to 60.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .attack import AttackConfig, weight_pgd
from .data import Dataset
from .linalg import max_column_l1, max_row_l1, spectral_norm
from .network import Network, accuracy, forward_batch

ANALYSIS_SCHEMA_COMMENT = "# weightcert-csv v1 analysis"


def network_norm_caps(net: Network) -> tuple[list[float], list[float]]:
    """(s_h, b_h): per-layer spectral norms and transposed (2, 1) norms."""
    s = [spectral_norm(w) for w in net.weights]
    b = [float(np.sum(np.sqrt(np.sum(w * w, axis=1)))) for w in net.weights]
    return s, b


def rademacher_margin_term(X: np.ndarray, s, b, n: int, d_max: int,
                           constant: float = 60.0) -> float:
    """Empirical Rademacher complexity bound of the margin class.

    4 / n^{3/2} + constant log(n) log(2 d_max) / n * ||X||_F
      * (prod_h s_h) * (sum_j (b_j / s_j)^{2/3})^{3/2}

    X holds one training sample per column.
    """
    s = np.asarray(s, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if n < 1:
        raise ValueError("n must be >= 1")
    if np.any(s <= 0) or np.any(b <= 0):
        raise ValueError("norm caps must be positive")
    x_fro = float(np.sqrt(np.sum(np.asarray(X, dtype=np.float64) ** 2)))
    cap = float(np.prod(s)) * float(np.sum((b / s) ** (2.0 / 3.0)) ** 1.5)
    return 4.0 / n ** 1.5 + constant * np.log(n) * np.log(2 * d_max) / n * x_fro * cap


def rademacher_psi_term(net: Network, X: np.ndarray, N: int, eps: float,
                        n: int) -> float:
    """Empirical Rademacher complexity of the worst-case-error class.

    (2 eps / n) * prod_{m=1}^{N-1} ||W^m||_{1,inf}
      * prod_{k=0}^{L-N-1} ||(W^{L-k})^T||_{1,inf} * ||X||_{1,2}
    """
    L = net.num_layers
    if not 1 <= N <= L - 1:
        raise ValueError(f"N must be in [1, L-1], got {N}")
    if n < 1:
        raise ValueError("n must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    pre = 1.0
    for m in range(1, N):
        pre *= max_column_l1(net.weight(m))
    post = 1.0
    for k in range(0, L - N):
        post *= max_row_l1(net.weight(L - k))
    col_l1 = np.sum(np.abs(X), axis=0)
    x_12 = float(np.sqrt(np.sum(col_l1 ** 2)))
    return 2.0 * eps / n * pre * post * x_12


def empirical_generalization_gap(net: Network, train_set: Dataset,
                                 test_set: Dataset,
                                 attack: AttackConfig | None = None,
                                 attack_craft_set: Dataset | None = None) -> float:
    """Train accuracy minus test accuracy, both under the same attacked weights.

    The attack, when given, is crafted once (on attack_craft_set, defaulting
    to the training set) and the perturbed weights are used for both
    evaluations.
    """
    if attack is None or attack.eps_test == 0.0:
        eval_net = net
    else:
        craft = attack_craft_set if attack_craft_set is not None else train_set
        eval_net = weight_pgd(net, craft, attack)
    return accuracy(eval_net, train_set) - accuracy(eval_net, test_set)


@dataclass
class BoundStatistics:
    prod_spectral: float
    spectral_of_product: float
    log_ratio: float


def bound_statistics(net: Network) -> BoundStatistics:
    """Product of per-layer spectral norms vs spectral norm of the product."""
    prod = 1.0
    for w in net.weights:
        prod *= spectral_norm(w)
    full = net.weights[0]
    for w in net.weights[1:]:
        full = w @ full
    sigma = spectral_norm(full)
    log_ratio = float(np.log(prod / sigma)) if sigma > 0 and prod > 0 else float("inf")
    return BoundStatistics(prod_spectral=prod, spectral_of_product=sigma,
                           log_ratio=log_ratio)


def theorem_bound_rhs(net: Network, train_set: Dataset, N: int, eps: float,
                      gamma: float, delta: float = 0.05,
                      constant: float = 60.0) -> float:
    """Full right-hand side of the generalization bound at confidence delta.

    Empirical robust risk (margin <= gamma + Psi indicator) plus the scaled
    Rademacher terms and the confidence term.
    """
    from .bounds import psi as psi_fn
    from .network import margin as margin_fn

    n = len(train_set)
    logits = forward_batch(net, train_set.inputs)
    risks = []
    for idx in range(n):
        m = margin_fn(logits[idx], int(train_set.labels[idx]))
        p = psi_fn(net, train_set.inputs[idx], N, eps)
        risks.append(1.0 if m - p <= gamma else 0.0)
    r_n = float(np.mean(risks))
    X = train_set.inputs.T
    s, b = network_norm_caps(net)
    d_max = max(net.spec.layer_dims)
    r_m = rademacher_margin_term(X, s, b, n, d_max, constant=constant)
    r_psi = rademacher_psi_term(net, X, N, eps, n)
    conf = 3.0 * np.sqrt(np.log(2.0 / delta) / (2.0 * n))
    return r_n + (r_m + r_psi) / gamma + conf


def quantize(net: Network, bits: int) -> Network:
    """Per-layer symmetric uniform quantization to 2^bits levels.

    Levels are evenly spaced over [-max|W^k|, +max|W^k|]; each entry snaps to
    the nearest level, ties toward zero.
    """
    if not 1 <= bits <= 32:
        raise ValueError("bits must be in [1, 32]")
    out = net.copy()
    num_levels = 2 ** bits
    for k, w in enumerate(out.weights):
        m = float(np.max(np.abs(w)))
        if m == 0.0:
            continue
        step = 2.0 * m / (num_levels - 1)
        t = (w + m) / step
        lo = np.floor(t)
        take_hi = (t - lo) > 0.5
        level_idx = lo + take_hi
        # ties (fraction exactly 0.5): pick the level closer to zero
        tie = (t - lo) == 0.5
        if np.any(tie):
            v_lo = -m + lo * step
            v_hi = v_lo + step
            level_idx = np.where(tie & (np.abs(v_hi) > np.abs(v_lo)), lo, level_idx)
            level_idx = np.where(tie & (np.abs(v_hi) <= np.abs(v_lo)), lo + 1, level_idx)
        out.weights[k] = -m + level_idx * step
    return out


def write_analysis_csv(path, rows: list[dict]) -> None:
    """Rows of per-(model, setting) statistics; keys become the header."""
    if not rows:
        raise ValueError("no analysis rows")
    header = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        fh.write(ANALYSIS_SCHEMA_COMMENT + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(row[h]) if isinstance(row[h], float) else row[h]
                             for h in header])
