import numpy as np
import pytest

from weightcert.attack import (AttackConfig, auc, robust_accuracy_sweep,
                               weight_pgd, write_sweep_csv)
from weightcert.data import synthetic_blobs
from weightcert.losses import LossConfig
from weightcert.network import NetworkSpec, accuracy
from weightcert.trainer import TrainConfig, train


def trained_model():
    ds = synthetic_blobs(3, 6, 40, 0.05, seed=1)
    cfg = TrainConfig(loss=LossConfig(lam=0.0, mu=0.0, regularizer="none"),
                      epochs=15, batch_size=16, learning_rate=0.05, seed=0)
    net, _ = train(NetworkSpec((6, 10, 3)), ds, cfg)
    return net, ds


class TestAttackConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            AttackConfig(eps_test=-0.1)
        with pytest.raises(ValueError):
            AttackConfig(eps_test=0.1, steps=0)
        with pytest.raises(ValueError):
            AttackConfig(eps_test=0.1, step_size=0.0)
        with pytest.raises(ValueError):
            AttackConfig(eps_test=0.1, loss="ramp")

    def test_default_alpha(self):
        cfg = AttackConfig(eps_test=0.02, steps=200)
        assert cfg.alpha == pytest.approx(2.5 * 0.02 / 200)
        assert AttackConfig(eps_test=0.02, step_size=0.5).alpha == 0.5


class TestWeightPgd:
    def test_eps_zero_is_identity(self):
        net, ds = trained_model()
        out = weight_pgd(net, ds, AttackConfig(eps_test=0.0, steps=5))
        for a, b in zip(out.weights, net.weights):
            assert np.array_equal(a, b)

    def test_clip_containment(self):
        net, ds = trained_model()
        eps = 0.05
        out = weight_pgd(net, ds, AttackConfig(eps_test=eps, steps=20))
        for a, b in zip(out.weights, net.weights):
            assert np.max(np.abs(a - b)) <= eps + 1e-15

    def test_attack_degrades_accuracy(self):
        net, ds = trained_model()
        clean = accuracy(net, ds)
        attacked = weight_pgd(net, ds, AttackConfig(eps_test=0.2, steps=50))
        assert accuracy(attacked, ds) < clean

    def test_deterministic(self):
        net, ds = trained_model()
        cfg = AttackConfig(eps_test=0.05, steps=10, seed=3, batch_size=16)
        a = weight_pgd(net, ds, cfg)
        b = weight_pgd(net, ds, cfg)
        for w1, w2 in zip(a.weights, b.weights):
            assert np.array_equal(w1, w2)

    def test_batch_option_stays_in_ball(self):
        net, ds = trained_model()
        out = weight_pgd(net, ds, AttackConfig(eps_test=0.03, steps=12, batch_size=8))
        for a, b in zip(out.weights, net.weights):
            assert np.max(np.abs(a - b)) <= 0.03 + 1e-15


class TestSweepAndAuc:
    def test_sweep_zero_point_is_clean(self):
        net, ds = trained_model()
        curve = robust_accuracy_sweep(net, ds, [0.0, 0.05], steps=10)
        assert curve[0] == (0.0, accuracy(net, ds))

    def test_unsorted_grid_rejected(self):
        net, ds = trained_model()
        with pytest.raises(ValueError):
            robust_accuracy_sweep(net, ds, [0.1, 0.0])

    def test_larger_eps_not_better_trend(self):
        net, ds = trained_model()
        curve = robust_accuracy_sweep(net, ds, [0.0, 0.1, 0.4], steps=30)
        accs = [a for _, a in curve]
        assert accs[-1] <= accs[0] + 1e-12

    def test_auc_constant_curves(self):
        assert auc([(0.0, 1.0), (0.1, 1.0)]) == 1.0
        assert auc([(0.0, 0.5), (0.1, 0.5), (0.2, 0.5)]) == 0.5

    def test_auc_hand_trapezoid(self):
        # accuracy 1.0 at 0, 0.5 at 0.01, 0.0 at 0.03: area pieces
        curve = [(0.0, 1.0), (0.01, 0.5), (0.03, 0.0)]
        expected = (0.75 * 0.01 + 0.25 * 0.02) / 0.03
        assert auc(curve) == pytest.approx(expected)

    def test_auc_single_point(self):
        assert auc([(0.0, 0.8)]) == 0.8

    def test_sweep_csv(self, tmp_path):
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, [(0.0, 1.0), (0.1, 0.4)])
        lines = path.read_text().splitlines()
        assert lines[0] == "# weightcert-csv v1 attack-sweep"
        assert lines[1] == "eps,accuracy,auc_to_date"
        assert float(lines[3].split(",")[2]) == pytest.approx(0.7)
