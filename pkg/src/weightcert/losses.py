"""Classification losses, their robust surrogates, and the total objective.

The training objective is

    mean_batch[ l_cls + lambda * max_{y' != y} eta^{y' y}(x | I) ]
      + mu * regularizer(weights)

with the regularizer added once per batch (it depends only on the weights).
The analytic subgradient treats every max (competitor choice, norm argmax
row/column) with the lowest-index tie-break and flows no gradient through
the sgn(x) offsets of the starred first layer, which are locally constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import PerturbationSpec, eta_max_over_competitors, psi
from .linalg import max_column_l1, max_row_l1
from .network import Network, forward, margin

_CLS_LOSSES = ("cross_entropy", "ramp")
_REGULARIZERS = ("sum_norms", "log_norms", "none")


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.0
    mu: float = 0.0
    gamma: float = 1.0
    perturbation: PerturbationSpec = field(default_factory=lambda: PerturbationSpec({}))
    classification_loss: str = "cross_entropy"
    regularizer: str = "sum_norms"

    def __post_init__(self):
        if self.lam < 0 or self.mu < 0:
            raise ValueError("lambda and mu must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.classification_loss not in _CLS_LOSSES:
            raise ValueError(f"unknown classification loss {self.classification_loss!r}")
        if self.regularizer not in _REGULARIZERS:
            raise ValueError(f"unknown regularizer {self.regularizer!r}")


def ramp_phi(t: float, gamma: float) -> float:
    """phi_gamma: 1 below 0, 0 above gamma, linear in between."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if t <= 0:
        return 1.0
    if t >= gamma:
        return 0.0
    return 1.0 - t / gamma


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def cross_entropy(logits, y: int) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    return float(-_log_softmax(logits)[y])


def robust_ramp_loss(net: Network, x, y: int, N: int, eps: float,
                     gamma: float) -> float:
    """Single-layer robust surrogate: phi_gamma(M(f(x), y) - Psi(f(x)))."""
    logits = forward(net, x).logits
    return ramp_phi(margin(logits, y) - psi(net, x, N, eps), gamma)


def robust_ramp_loss_multi(net: Network, x, y: int, spec: PerturbationSpec,
                           gamma: float) -> float:
    """Multi-layer robust surrogate: phi_gamma(M - max_{y' != y} eta^{y' y})."""
    logits = forward(net, x).logits
    worst = eta_max_over_competitors(net, x, y, spec) if spec.index_set else 0.0
    return ramp_phi(margin(logits, y) - worst, gamma)


def robust_cross_entropy(net: Network, x, y: int, spec: PerturbationSpec) -> float:
    """CE(f(x), y) + max_{y' != y} eta^{y' y}(x | I)."""
    logits = forward(net, x).logits
    worst = eta_max_over_competitors(net, x, y, spec) if spec.index_set else 0.0
    return cross_entropy(logits, y) + worst


def generalization_regularizer(net: Network, variant: str = "sum_norms") -> float:
    """Sum over layers of transposed and plain (1, inf) norms, or their logs."""
    if variant == "none":
        return 0.0
    total = 0.0
    for w in net.weights:
        nr, nc = max_row_l1(w), max_column_l1(w)
        if variant == "sum_norms":
            total += nr + nc
        elif variant == "log_norms":
            if nr == 0.0 or nc == 0.0:
                raise ValueError("log regularizer undefined for a zero layer")
            total += np.log(nr) + np.log(nc)
        else:
            raise ValueError(f"unknown regularizer {variant!r}")
    return float(total)


# -- batched objective and analytic subgradient ------------------------------

def _starred_forward_batch(net: Network, xs: np.ndarray, spec: PerturbationSpec):
    """Batched starred forward pass.

    With z >= 0 after the first layer, the elementwise +eps offset acts as
    W z + eps * ||z||_1 per output unit; the sgn(x) offset on layer 1 acts the
    same way with ||x||_1.  Returns (z_levels, pre_levels): z_levels[m] is
    z^{m*} for m = 0..L-1 (z^{0*} = x) and pre_levels[m] the pre-activation
    feeding z^{m*} (pre_levels[0] is None).
    """
    L = net.num_layers
    z_levels = [xs]
    pre_levels = [None]
    z = xs
    for k in range(1, L):
        pre = z @ net.weight(k).T
        eps = spec.eps_for(k)
        if eps > 0.0:
            offset = np.sum(np.abs(z), axis=1) if k == 1 else np.sum(z, axis=1)
            pre = pre + eps * offset[:, None]
        z = np.maximum(pre, 0.0)
        pre_levels.append(pre)
        z_levels.append(z)
    return z_levels, pre_levels


def _l1_sign(v: np.ndarray) -> np.ndarray:
    return np.sign(v)


def total_loss_and_gradient(net: Network, xs: np.ndarray, ys: np.ndarray,
                            config: LossConfig):
    """(loss, grads): the batch objective and d loss / d W^k for every layer."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.ndim != 2 or len(xs) != len(ys) or len(xs) == 0:
        raise ValueError("batch must be non-empty with matching inputs/labels")
    B = len(ys)
    L = net.num_layers
    K = net.spec.num_classes
    grads = [np.zeros_like(w) for w in net.weights]

    # plain forward
    zs = [xs]
    pres = [None]
    z = xs
    for k in range(1, L):
        pre = z @ net.weight(k).T
        z = np.maximum(pre, 0.0)
        pres.append(pre)
        zs.append(z)
    logits = z @ net.weight(L).T

    # classification term
    rows = np.arange(B)
    if config.classification_loss == "cross_entropy":
        logp = _log_softmax(logits)
        loss_cls = float(-np.mean(logp[rows, ys]))
        dlogits = np.exp(logp)
        dlogits[rows, ys] -= 1.0
        dlogits /= B
    else:  # ramp
        masked = logits.copy()
        masked[rows, ys] = -np.inf
        comp = np.argmax(masked, axis=1)
        t = logits[rows, ys] - masked[rows, comp]
        loss_cls = float(np.mean([ramp_phi(ti, config.gamma) for ti in t]))
        slope = np.where((t > 0) & (t < config.gamma), -1.0 / config.gamma, 0.0) / B
        dlogits = np.zeros_like(logits)
        dlogits[rows, ys] += slope
        dlogits[rows, comp] -= slope

    delta = dlogits
    grads[L - 1] += delta.T @ zs[L - 1]
    for k in range(L - 1, 0, -1):
        delta = (delta @ net.weight(k + 1)) * (pres[k] > 0)
        grads[k - 1] += delta.T @ zs[k - 1]

    # robustness term: lambda * mean_s max_{y' != y} eta^{y' y}
    loss_eta = 0.0
    spec = config.perturbation
    active = sorted(k for k in spec.index_set if spec.eps_for(k) > 0)
    if config.lam > 0 and active:
        z_st, pre_st = _starred_forward_batch(net, xs, spec)
        n1z = np.stack([np.sum(np.abs(z_st[0]), axis=1)]
                       + [np.sum(z_st[m], axis=1) for m in range(1, L)], axis=1)
        row_norms = {m: max_row_l1(net.weight(m)) for m in range(2, L)}
        rowprod = {}
        for k in range(1, L):
            prod = 1.0
            for m in range(k + 1, L):
                prod *= row_norms[m]
            rowprod[k] = prod
        w_last = net.weight(L)
        a = np.sum(np.abs(w_last[:, None, :] - w_last[None, :, :]), axis=2)

        mid = [k for k in active if k < L]
        coef = np.zeros(B)  # multiplies a[y', y] per sample
        for k in mid:
            coef += spec.eps_for(k) * rowprod[k] * n1z[:, k - 1]
        fin = np.zeros(B)
        if L in active:
            fin = 2.0 * spec.eps_for(L) * n1z[:, L - 1]

        a_comp = a[:, ys].copy()  # (K, B): a[y', y_s]
        a_comp[ys, np.arange(B)] = -np.inf
        ystar = np.argmax(a_comp, axis=0)
        a_sel = a[ystar, ys]
        eta_vals = a_sel * coef + fin
        loss_eta = float(np.mean(eta_vals))
        scale = config.lam / B

        # d / d W^L through ||W^L_{y*,:} - W^L_{y,:}||_1
        sgn_pair = np.sign(w_last[ystar] - w_last[ys])  # (B, d_{L-1})
        np.add.at(grads[L - 1], ystar, (scale * coef)[:, None] * sgn_pair)
        np.add.at(grads[L - 1], ys, -(scale * coef)[:, None] * sgn_pair)

        # d / d row-norm products (argmax row of each intermediate layer)
        for m in range(2, L):
            if row_norms[m] == 0.0:
                continue
            c_m = 0.0
            for k in mid:
                if k + 1 <= m <= L - 1:
                    c_m += spec.eps_for(k) * rowprod[k] / row_norms[m] * float(
                        np.sum(a_sel * n1z[:, k - 1])
                    )
            if c_m != 0.0:
                w_m = net.weight(m)
                r = int(np.argmax(np.sum(np.abs(w_m), axis=1)))
                grads[m - 1][r] += scale * c_m * _l1_sign(w_m[r])

        # d / d ||z^{m*}||_1 back through the starred chain
        seeds = np.zeros((B, L))  # per-sample scalar seed at each z* level
        for k in mid:
            seeds[:, k - 1] += spec.eps_for(k) * rowprod[k] * a_sel
        if L in active:
            seeds[:, L - 1] += 2.0 * spec.eps_for(L)
        carry = np.zeros_like(z_st[L - 1])
        for m in range(L - 1, 0, -1):
            carry = carry + seeds[:, m][:, None]
            d_pre = np.where(pre_st[m] > 0, carry, 0.0)
            grads[m - 1] += scale * (d_pre.T @ z_st[m - 1])
            eps_m = spec.eps_for(m)
            carry = d_pre @ net.weight(m)
            if eps_m > 0.0 and m > 1:
                carry = carry + eps_m * np.sum(d_pre, axis=1)[:, None]

    # regularizer (per batch, not per sample)
    loss_reg = 0.0
    if config.mu > 0 and config.regularizer != "none":
        loss_reg = generalization_regularizer(net, config.regularizer)
        for m in range(1, L + 1):
            w = net.weight(m)
            row_sums = np.sum(np.abs(w), axis=1)
            col_sums = np.sum(np.abs(w), axis=0)
            r = int(np.argmax(row_sums))
            c = int(np.argmax(col_sums))
            if config.regularizer == "sum_norms":
                cr, cc = 1.0, 1.0
            else:  # log_norms; zero norms already rejected above
                cr, cc = 1.0 / row_sums[r], 1.0 / col_sums[c]
            grads[m - 1][r] += config.mu * cr * _l1_sign(w[r])
            grads[m - 1][:, c] += config.mu * cc * _l1_sign(w[:, c])

    loss = loss_cls + config.lam * loss_eta + config.mu * loss_reg
    return loss, grads


def total_loss(net: Network, xs: np.ndarray, ys: np.ndarray,
               config: LossConfig) -> float:
    loss, _ = total_loss_and_gradient(net, xs, ys, config)
    return loss


def total_loss_gradient(net: Network, xs: np.ndarray, ys: np.ndarray,
                        config: LossConfig) -> list[np.ndarray]:
    _, grads = total_loss_and_gradient(net, xs, ys, config)
    return grads
