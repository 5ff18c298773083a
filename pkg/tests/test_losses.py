import numpy as np
import pytest

from conftest import random_dims, random_net
from oracles import finite_difference_grads
from weightcert.bounds import (PerturbationSpec, eta_max_over_competitors,
                               perturbed_margin_gaps, psi)
from weightcert.losses import (LossConfig, cross_entropy,
                               generalization_regularizer, ramp_phi,
                               robust_cross_entropy, robust_ramp_loss,
                               robust_ramp_loss_multi, total_loss,
                               total_loss_and_gradient, total_loss_gradient)
from weightcert.linalg import max_column_l1, max_row_l1
from weightcert.network import Network, NetworkSpec, forward, margin


class TestRampPhi:
    def test_piecewise_values(self):
        assert ramp_phi(-1.0, 1.0) == 1.0
        assert ramp_phi(0.5, 1.0) == 0.5
        assert ramp_phi(2.0, 1.0) == 0.0
        assert ramp_phi(0.0, 1.0) == 1.0
        assert ramp_phi(1.0, 1.0) == 0.0

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            ramp_phi(0.0, 0.0)


class TestCrossEntropy:
    def test_hand_value(self):
        # logits [0, 2], y=1: CE = ln(1 + e^{-2})
        assert cross_entropy([0.0, 2.0], 1) == pytest.approx(np.log(1 + np.exp(-2)))

    def test_uniform_logits(self):
        assert cross_entropy([1.0, 1.0, 1.0], 0) == pytest.approx(np.log(3))


class TestRobustSurrogates:
    def test_ramp_zero_eps_is_plain_ramp(self, rng):
        net = random_net(rng, (4, 3, 3))
        x = rng.uniform(size=4)
        m = margin(forward(net, x).logits, 1)
        assert robust_ramp_loss(net, x, 1, 1, 0.0, 1.0) == ramp_phi(m, 1.0)

    def test_ramp_huge_eps_saturates(self, rng):
        net = random_net(rng, (4, 3, 3))
        assert robust_ramp_loss(net, rng.uniform(size=4) + 0.1, 1, 1, 1e6, 1.0) == 1.0

    def test_multi_zero_radii_is_plain_ramp(self, rng):
        net = random_net(rng, (4, 3, 3))
        x = rng.uniform(size=4)
        m = margin(forward(net, x).logits, 2)
        spec = PerturbationSpec.all_layers(2, 0.0)
        assert robust_ramp_loss_multi(net, x, 2, spec, 1.0) == ramp_phi(m, 1.0)

    def test_multi_single_layer_tighter_than_psi_version(self, rng):
        # eta with I={N} uses the actual activations, psi the norm products
        for _ in range(20):
            dims = random_dims(rng)
            net = random_net(rng, dims)
            x = rng.uniform(0, 1, size=dims[0])
            N = int(rng.integers(1, net.num_layers))
            eps = 0.02
            y = 0
            worst = eta_max_over_competitors(net, x, y, PerturbationSpec({N: eps}))
            assert worst <= psi(net, x, N, eps) + 1e-12

    def test_sandwich_on_enumerable_instances(self, rng):
        # corner-enumerated robust 0-1 loss <= ramp surrogate <= indicator
        for _ in range(30):
            net = random_net(rng, (2, 2, 2))
            x = rng.uniform(0.1, 1.0, size=2)
            y = int(rng.integers(0, 2))
            eps = float(rng.uniform(0.01, 0.3))
            gamma = float(rng.uniform(0.5, 2.0))
            spec = PerturbationSpec.all_layers(2, eps)
            gaps = perturbed_margin_gaps(net, x, spec, mode="corners")
            logits = forward(net, x).logits
            m = margin(logits, y)
            yp = 1 - y
            worst_margin = m - gaps[yp, y]
            zero_one = 1.0 if worst_margin <= 0 else 0.0
            surrogate = robust_ramp_loss(net, x, y, 1, eps, gamma)
            indicator = 1.0 if m - psi(net, x, 1, eps) <= gamma else 0.0
            assert zero_one <= surrogate + 1e-12
            assert surrogate <= indicator + 1e-12

    def test_robust_ce_definition(self, rng):
        net = random_net(rng, (4, 3, 3))
        x = rng.uniform(size=4)
        spec = PerturbationSpec.all_layers(2, 0.03)
        logits = forward(net, x).logits
        lhs = robust_cross_entropy(net, x, 1, spec) - cross_entropy(logits, 1)
        assert lhs == pytest.approx(eta_max_over_competitors(net, x, 1, spec))

    def test_robust_ce_upper_bounds_sampled_ce(self, rng):
        net = random_net(rng, (3, 3, 2))
        x = rng.uniform(size=3)
        eps = 0.05
        spec = PerturbationSpec.all_layers(2, eps)
        bound = robust_cross_entropy(net, x, 0, spec)
        for _ in range(200):
            p = net.copy()
            for k in range(2):
                p.weights[k] = p.weights[k] + rng.uniform(-eps, eps, size=p.weights[k].shape)
            logits = forward(p, x).logits
            assert cross_entropy(logits, 0) <= bound + 1e-9


class TestRegularizer:
    def test_identity_weights_sum(self):
        net = Network(NetworkSpec((2, 2, 2)), [np.eye(2), np.eye(2)])
        assert generalization_regularizer(net, "sum_norms") == 4.0  # 2L with L=2

    def test_identity_weights_log(self):
        net = Network(NetworkSpec((2, 2, 2)), [np.eye(2), np.eye(2)])
        assert generalization_regularizer(net, "log_norms") == 0.0

    def test_homogeneity_of_sum_variant(self, rng):
        net = random_net(rng, (3, 3, 2))
        base = generalization_regularizer(net, "sum_norms")
        scaled = net.copy()
        scaled.weights = [3.0 * w for w in scaled.weights]
        assert generalization_regularizer(scaled, "sum_norms") == pytest.approx(3 * base)

    def test_matches_norm_sums(self, rng):
        net = random_net(rng, (4, 3, 2))
        expected = sum(max_row_l1(w) + max_column_l1(w) for w in net.weights)
        assert generalization_regularizer(net, "sum_norms") == pytest.approx(expected)

    def test_log_of_zero_layer_rejected(self):
        net = Network(NetworkSpec((2, 2, 2)), [np.zeros((2, 2)), np.eye(2)])
        with pytest.raises(ValueError):
            generalization_regularizer(net, "log_norms")

    def test_none_variant(self, rng):
        assert generalization_regularizer(random_net(rng, (3, 2, 2)), "none") == 0.0


class TestLossConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            LossConfig(lam=-1.0)
        with pytest.raises(ValueError):
            LossConfig(gamma=0.0)
        with pytest.raises(ValueError):
            LossConfig(classification_loss="hinge")
        with pytest.raises(ValueError):
            LossConfig(regularizer="l2")


def batch_config(eps=0.02, lam=0.3, mu=0.2, cls="cross_entropy", reg="sum_norms",
                 layers=None):
    spec = PerturbationSpec(layers if layers is not None
                            else {1: eps, 2: eps * 0.7, 3: eps * 1.3})
    return LossConfig(lam=lam, mu=mu, gamma=1.0, perturbation=spec,
                      classification_loss=cls, regularizer=reg)


class TestTotalLoss:
    def test_lambda_mu_zero_is_mean_ce(self, rng):
        net = random_net(rng, (4, 3, 3))
        xs = rng.uniform(size=(6, 4))
        ys = rng.integers(0, 3, size=6)
        cfg = LossConfig(lam=0.0, mu=0.0, regularizer="none")
        got = total_loss(net, xs, ys, cfg)
        expected = np.mean([cross_entropy(forward(net, x).logits, int(y))
                            for x, y in zip(xs, ys)])
        assert got == pytest.approx(expected, rel=1e-12)

    def test_termwise_recomputation(self, rng):
        # the batched objective equals per-sample recomputation of each term
        net = random_net(rng, (5, 4, 4, 3))
        xs = rng.uniform(-1, 1, size=(5, 5))
        ys = rng.integers(0, 3, size=5)
        cfg = batch_config()
        got = total_loss(net, xs, ys, cfg)
        ce = np.mean([cross_entropy(forward(net, x).logits, int(y))
                      for x, y in zip(xs, ys)])
        etas = np.mean([eta_max_over_competitors(net, x, int(y), cfg.perturbation)
                        for x, y in zip(xs, ys)])
        reg = generalization_regularizer(net, "sum_norms")
        assert got == pytest.approx(ce + cfg.lam * etas + cfg.mu * reg, rel=1e-12)

    def test_monotone_in_lambda_and_mu(self, rng):
        net = random_net(rng, (4, 3, 3))
        xs = rng.uniform(size=(4, 4))
        ys = rng.integers(0, 3, size=4)
        base = total_loss(net, xs, ys, batch_config(lam=0.1, mu=0.1))
        assert total_loss(net, xs, ys, batch_config(lam=0.5, mu=0.1)) >= base
        assert total_loss(net, xs, ys, batch_config(lam=0.1, mu=0.5)) >= base

    def test_ramp_classification_loss(self, rng):
        net = random_net(rng, (4, 3, 3))
        xs = rng.uniform(size=(4, 4))
        ys = rng.integers(0, 3, size=4)
        cfg = LossConfig(lam=0.0, mu=0.0, gamma=0.8, classification_loss="ramp",
                         regularizer="none")
        got = total_loss(net, xs, ys, cfg)
        expected = np.mean([ramp_phi(margin(forward(net, x).logits, int(y)), 0.8)
                            for x, y in zip(xs, ys)])
        assert got == pytest.approx(expected, rel=1e-12)

    def test_empty_batch_rejected(self, rng):
        net = random_net(rng, (3, 2, 2))
        with pytest.raises(ValueError):
            total_loss(net, np.zeros((0, 3)), np.zeros(0, dtype=int), LossConfig())


def max_rel_fd_error(net, xs, ys, cfg, h=1e-6):
    _, grads = total_loss_and_gradient(net, xs, ys, cfg)
    fd = finite_difference_grads(lambda n: total_loss(n, xs, ys, cfg), net, h=h)
    num = max(np.max(np.abs(g - f)) for g, f in zip(grads, fd))
    den = max(1.0, max(np.max(np.abs(f)) for f in fd))
    return num / den


class TestGradient:
    def test_plain_ce_matches_fd(self, rng):
        for _ in range(5):
            dims = random_dims(rng, max_width=5)
            net = random_net(rng, dims)
            xs = rng.uniform(-1, 1, size=(4, dims[0]))
            ys = rng.integers(0, dims[-1], size=4)
            cfg = LossConfig(lam=0.0, mu=0.0, regularizer="none")
            assert max_rel_fd_error(net, xs, ys, cfg) < 1e-5

    def test_full_objective_matches_fd(self, rng):
        checked = 0
        attempts = 0
        while checked < 25 and attempts < 100:
            attempts += 1
            dims = random_dims(rng, max_width=5)
            net = random_net(rng, dims)
            L = net.num_layers
            xs = rng.uniform(-1, 1, size=(3, dims[0]))
            ys = rng.integers(0, dims[-1], size=3)
            radii = {k: float(rng.uniform(0.005, 0.05)) for k in range(1, L + 1)}
            reg = "log_norms" if attempts % 3 == 0 else "sum_norms"
            cls = "ramp" if attempts % 4 == 0 else "cross_entropy"
            cfg = LossConfig(lam=float(rng.uniform(0.05, 0.5)),
                             mu=float(rng.uniform(0.05, 0.5)),
                             gamma=1.0, perturbation=PerturbationSpec(radii),
                             classification_loss=cls, regularizer=reg)
            if _near_tie(net, xs, ys, cfg):
                continue
            assert max_rel_fd_error(net, xs, ys, cfg) < 1e-4
            checked += 1
        assert checked >= 25

    def test_gradient_wrapper(self, rng):
        net = random_net(rng, (3, 3, 2))
        xs = rng.uniform(size=(2, 3))
        ys = rng.integers(0, 2, size=2)
        cfg = batch_config(layers={1: 0.01, 2: 0.01})
        loss, grads = total_loss_and_gradient(net, xs, ys, cfg)
        only = total_loss_gradient(net, xs, ys, cfg)
        for a, b in zip(grads, only):
            assert np.array_equal(a, b)


def _near_tie(net, xs, ys, cfg, tol=1e-6):
    """Skip configurations where an argmax choice is within tol of a tie."""
    from weightcert.bounds import eta

    for w in net.weights:
        rows = np.sort(np.sum(np.abs(w), axis=1))
        cols = np.sort(np.sum(np.abs(w), axis=0))
        if len(rows) > 1 and rows[-1] - rows[-2] < tol:
            return True
        if len(cols) > 1 and cols[-1] - cols[-2] < tol:
            return True
    K = net.spec.num_classes
    for x, y in zip(xs, ys):
        vals = sorted(eta(net, x, yp, int(y), cfg.perturbation)
                      for yp in range(K) if yp != int(y))
        if len(vals) > 1 and vals[-1] - vals[-2] < tol:
            return True
        logits = forward(net, x).logits
        m = margin(logits, int(y))
        if cfg.classification_loss == "ramp" and (
                abs(m) < tol or abs(m - cfg.gamma) < tol):
            return True
        comp = np.sort(np.delete(logits, int(y)))
        if len(comp) > 1 and comp[-1] - comp[-2] < tol:
            return True
    for trace_x in xs:
        z = trace_x
        for k in range(1, net.num_layers):
            pre = net.weight(k) @ z
            if np.any(np.abs(pre) < tol):
                return True
            z = np.maximum(pre, 0.0)
    if np.any(np.abs(net.weight(1)) < tol) or np.any(np.abs(xs) < tol):
        return True
    return False
