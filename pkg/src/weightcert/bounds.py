"""Worst-case pairwise-margin bounds under element-wise weight perturbation.

Core objects: the per-layer error term Delta, the starred weight assignment
W^{k*} maximizing downstream l1 activation norms, and the total worst-case
margin error eta for an arbitrary set I of perturbed layers.  Propagation
through layers after the perturbed one uses the transposed (1, inf) norm
(max row l1 = the inf->inf operator norm); the column norm appears only in
the data-light bound psi.  A sampling/corner brute-force oracle and a
conv-to-Toeplitz lowering round out the module.

Layer indices are 1-based (layer 1 consumes the input, layer L emits logits).
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .linalg import DimensionError, max_column_l1, max_row_l1
from .network import Network, forward, pairwise_margin

CSV_SCHEMA_COMMENT = "# weightcert-csv v1 certificates"

CORNER_PARAM_CAP = 20  # 2^20 forward evaluations at most


def _sgn_nonneg(v: np.ndarray) -> np.ndarray:
    """Sign with sgn(0) = +1, matching the starred-weight construction."""
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


@dataclass(frozen=True)
class PerturbationSpec:
    """Index set of perturbed layers with per-layer radii (1-based keys)."""

    radii: Mapping[int, float]

    def __post_init__(self):
        radii = {int(k): float(v) for k, v in self.radii.items()}
        if any(k < 1 for k in radii):
            raise ValueError("layer indices are 1-based")
        if any(v < 0 for v in radii.values()):
            raise ValueError("radii must be nonnegative")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def single_layer(cls, layer: int, eps: float) -> "PerturbationSpec":
        return cls({layer: eps})

    @classmethod
    def all_layers(cls, num_layers: int, eps: float) -> "PerturbationSpec":
        return cls({k: eps for k in range(1, num_layers + 1)})

    @property
    def index_set(self) -> frozenset[int]:
        return frozenset(self.radii)

    def eps_for(self, layer: int) -> float:
        return self.radii.get(layer, 0.0)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.radii.values())


@dataclass
class MarginCertificate:
    sample_id: int
    label: int
    natural_margin: float
    eta_max: float
    certified: bool


def _validate_spec(net: Network, spec: PerturbationSpec) -> None:
    if spec.index_set and max(spec.index_set) > net.num_layers:
        raise ValueError(
            f"perturbation index {max(spec.index_set)} exceeds L={net.num_layers}"
        )


def starred_weights(net: Network, spec: PerturbationSpec, x) -> list[np.ndarray]:
    """W^{k*}: +eps_k elementwise for perturbed k > 1; sgn(x_j) eps_1 on layer 1."""
    _validate_spec(net, spec)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.spec.input_dim,):
        raise DimensionError("input dimension mismatch")
    out = []
    for k in range(1, net.num_layers + 1):
        w = net.weight(k)
        eps = spec.eps_for(k)
        if eps == 0.0 or k not in spec.index_set:
            out.append(w.copy())
        elif k == 1:
            out.append(w + eps * _sgn_nonneg(x)[None, :])
        else:
            out.append(w + eps)
    return out


def starred_trace(net: Network, spec: PerturbationSpec, x) -> list[np.ndarray]:
    """[z^{0*}=x, z^{1*}, ..., z^{(L-1)*}] through the starred weights."""
    ws = starred_weights(net, spec, x)
    zs = [np.asarray(x, dtype=np.float64)]
    z = zs[0]
    for w in ws[:-1]:
        z = np.maximum(w @ z, 0.0)
        zs.append(z)
    return zs


def z_star(net: Network, spec: PerturbationSpec, x, k: int) -> np.ndarray:
    """z^{k*} for 0 <= k <= L-1 (z^{0*} = x)."""
    if not 0 <= k <= net.num_layers - 1:
        raise ValueError(f"k must be in [0, L-1], got {k}")
    return starred_trace(net, spec, x)[k]


def _row_norm_product(net: Network, first: int, last: int) -> float:
    """Prod_{m=first}^{last} ||(W^m)^T||_{1,inf}; empty product is 1."""
    prod = 1.0
    for m in range(first, last + 1):
        prod *= max_row_l1(net.weight(m))
    return prod


def delta_term(net: Network, eps_k: float, z, i: int, j: int, k: int) -> float:
    """Delta(eps_k; z; f) for the class pair (i, j) and perturbed layer k < L."""
    if not 1 <= k <= net.num_layers - 1:
        raise ValueError(
            f"delta_term needs k in [1, L-1]; use final_layer_term for k=L (got k={k})"
        )
    if i == j:
        raise ValueError("class pair must be distinct")
    z = np.asarray(z, dtype=np.float64)
    w_last = net.weight(net.num_layers)
    pair = float(np.sum(np.abs(w_last[i] - w_last[j])))
    prop = _row_norm_product(net, k + 1, net.num_layers - 1)
    return eps_k * pair * float(np.sum(np.abs(z))) * prop


def final_layer_term(eps_L: float, z) -> float:
    """2 eps_L ||z^{L-1}||_1, the final-layer contribution."""
    z = np.asarray(z, dtype=np.float64)
    return 2.0 * eps_L * float(np.sum(np.abs(z)))


def eta(net: Network, x, i: int, j: int, spec: PerturbationSpec) -> float:
    """Worst-case increase of f^{ij} over the perturbation ball for index set I."""
    _validate_spec(net, spec)
    if i == j:
        raise ValueError("class pair must be distinct")
    if not spec.index_set:
        return 0.0
    zs = starred_trace(net, spec, x)
    total = 0.0
    L = net.num_layers
    for k in sorted(spec.index_set):
        if k == L:
            total += final_layer_term(spec.eps_for(L), zs[L - 1])
        else:
            total += delta_term(net, spec.eps_for(k), zs[k - 1], i, j, k)
    return total


def eta_max_over_competitors(net: Network, x, y: int, spec: PerturbationSpec) -> float:
    """max_{y' != y} eta^{y' y}(x | I)."""
    k = net.spec.num_classes
    return max(eta(net, x, yp, y, spec) for yp in range(k) if yp != y)


def psi(net: Network, x, N: int, eps: float) -> float:
    """Data-light worst-case error of the single-layer robust ramp loss.

    2 max_k eps ||W^L_{k,:}||_1  Prod_{m=1}^{N-1} ||W^m||_{1,inf}
      Prod_{k=1}^{L-N-1} ||(W^{L-k})^T||_{1,inf}  ||x||_1
    """
    L = net.num_layers
    if not 1 <= N <= L - 1:
        raise ValueError(f"N must be in [1, L-1], got {N}")
    x = np.asarray(x, dtype=np.float64)
    w_last = net.weight(L)
    max_row = float(np.max(np.sum(np.abs(w_last), axis=1)))
    pre = 1.0
    for m in range(1, N):
        pre *= max_column_l1(net.weight(m))
    post = _row_norm_product(net, N + 1, L - 1)
    return 2.0 * eps * max_row * pre * post * float(np.sum(np.abs(x)))


# -- brute-force oracle ------------------------------------------------------

def _perturbed_logits_batch(net: Network, x, deltas: dict[int, np.ndarray]) -> np.ndarray:
    """Logits for a stack of perturbed networks; deltas[k] is (n, d_k, d_{k-1})."""
    x = np.asarray(x, dtype=np.float64)
    n = next(iter(deltas.values())).shape[0]
    z = np.broadcast_to(x, (n, x.shape[0]))
    for k in range(1, net.num_layers + 1):
        w = net.weight(k)
        if k in deltas:
            pre = np.einsum("noi,ni->no", w[None] + deltas[k], z)
        else:
            pre = z @ w.T
        z = pre if k == net.num_layers else np.maximum(pre, 0.0)
    return z


def perturbed_margin_gaps(net: Network, x, spec: PerturbationSpec,
                          mode: str = "random", num_samples: int = 10000,
                          seed: int = 0) -> np.ndarray:
    """Max over sampled in-ball weight sets of f^{ij}_What - f^{ij}_W, all pairs.

    Returns a (K, K) matrix of maxima.  mode='corners' enumerates every
    perturbed entry at +-eps and refuses when the perturbed parameter count
    exceeds CORNER_PARAM_CAP; mode='random' draws uniform entries in the ball.
    """
    _validate_spec(net, spec)
    K = net.spec.num_classes
    base = forward(net, x).logits
    layers = sorted(k for k in spec.index_set if spec.eps_for(k) > 0)
    if not layers:
        return np.zeros((K, K))
    shapes = {k: net.weight(k).shape for k in layers}
    if mode == "corners":
        count = sum(int(np.prod(shapes[k])) for k in layers)
        if count > CORNER_PARAM_CAP:
            raise ValueError(
                f"corner enumeration refused: {count} perturbed parameters "
                f"> cap {CORNER_PARAM_CAP}"
            )
        n = 2 ** count
        bits = ((np.arange(n)[:, None] >> np.arange(count)) & 1) * 2.0 - 1.0
        deltas = {}
        pos = 0
        for k in layers:
            sz = int(np.prod(shapes[k]))
            deltas[k] = (spec.eps_for(k) * bits[:, pos:pos + sz]).reshape((n,) + shapes[k])
            pos += sz
    elif mode == "random":
        rng = np.random.default_rng(seed)
        deltas = {
            k: rng.uniform(-spec.eps_for(k), spec.eps_for(k),
                           size=(num_samples,) + shapes[k])
            for k in layers
        }
    else:
        raise ValueError(f"unknown mode {mode!r}")
    logits = _perturbed_logits_batch(net, x, deltas)
    # gap[i, j] = max_n (logits[n, i] - logits[n, j]) - (base[i] - base[j])
    diffs = logits[:, :, None] - logits[:, None, :]
    return np.max(diffs, axis=0) - (base[:, None] - base[None, :])


def brute_force_margin_oracle(net: Network, x, i: int, j: int,
                              spec: PerturbationSpec, mode: str = "random",
                              num_samples: int = 10000, seed: int = 0) -> float:
    """Max over sampled/enumerated in-ball weight sets of f^{ij}_What - f^{ij}_W."""
    if i == j:
        raise ValueError("class pair must be distinct")
    gaps = perturbed_margin_gaps(net, x, spec, mode=mode,
                                 num_samples=num_samples, seed=seed)
    return float(gaps[i, j])


# -- certification over a dataset -------------------------------------------

def certify_sample(net: Network, x, y: int, spec: PerturbationSpec,
                   sample_id: int = 0) -> MarginCertificate:
    from .network import margin as margin_fn

    logits = forward(net, x).logits
    m = margin_fn(logits, y)
    e = eta_max_over_competitors(net, x, y, spec)
    return MarginCertificate(
        sample_id=sample_id, label=int(y), natural_margin=m, eta_max=e,
        certified=bool(m > e),
    )


def certify_dataset(net: Network, dataset, spec: PerturbationSpec,
                    max_workers: int | None = None) -> list[MarginCertificate]:
    """Per-sample certification; parallel per sample (WEIGHTCERT_THREADS caps)."""
    if max_workers is None:
        max_workers = int(os.environ.get("WEIGHTCERT_THREADS", "1"))
    jobs = [(i, dataset.inputs[i], int(dataset.labels[i])) for i in range(len(dataset))]
    if max_workers <= 1:
        return [certify_sample(net, x, y, spec, sample_id=i) for i, x, y in jobs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(
            lambda job: certify_sample(net, job[1], job[2], spec, sample_id=job[0]),
            jobs,
        ))


def write_certificates_csv(path, certs: list[MarginCertificate]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_SCHEMA_COMMENT + "\n")
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "label", "natural_margin", "eta_max", "certified"])
        for c in certs:
            writer.writerow([c.sample_id, c.label, repr(c.natural_margin),
                             repr(c.eta_max), int(c.certified)])


# -- convolution lowering ----------------------------------------------------

def conv_to_toeplitz(kernel: np.ndarray, input_shape: tuple[int, int, int],
                     stride: int = 1, padding: int = 0) -> np.ndarray:
    """Dense matrix T with T @ flatten(x) = flatten(conv2d(x, kernel)).

    kernel: (out_ch, in_ch, kh, kw); input_shape: (in_ch, H, W); convolution
    is cross-correlation with the given stride and symmetric zero padding.
    Row-major flattening on both sides.  Perturbing T's entries by eps reuses
    all dense-layer bounds, at the cost of treating shared kernel weights as
    independent.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 4:
        raise DimensionError("kernel must be (out_ch, in_ch, kh, kw)")
    out_ch, in_ch, kh, kw = kernel.shape
    c, h, w = input_shape
    if c != in_ch:
        raise DimensionError(
            f"kernel expects {in_ch} input channels, input has {c}"
        )
    if stride < 1 or padding < 0:
        raise ValueError("stride must be >= 1 and padding >= 0")
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise DimensionError("kernel does not fit the padded input")
    T = np.zeros((out_ch * h_out * w_out, in_ch * h * w))
    for oc in range(out_ch):
        for oy in range(h_out):
            for ox in range(w_out):
                row = (oc * h_out + oy) * w_out + ox
                for ic in range(in_ch):
                    for ky in range(kh):
                        iy = oy * stride + ky - padding
                        if not 0 <= iy < h:
                            continue
                        for kx in range(kw):
                            ix = ox * stride + kx - padding
                            if not 0 <= ix < w:
                                continue
                            col = (ic * h + iy) * w + ix
                            T[row, col] += kernel[oc, ic, ky, kx]
    return T
