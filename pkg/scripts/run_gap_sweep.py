#!/usr/bin/env python3
"""Sweep the norm-regularizer weight mu and record robust generalization gaps.

For each (eps_train, eps_test) setting, trains digit models across a grid of
mu values, measures train-minus-test accuracy under a shared 200-step weight
PGD attack, and writes one CSV row per run plus the least-squares slope of
gap versus mu per setting.
"""

import argparse
import warnings
from pathlib import Path

import numpy as np

from weightcert.analysis import (empirical_generalization_gap,
                                 write_analysis_csv)
from weightcert.attack import AttackConfig
from weightcert.bounds import PerturbationSpec
from weightcert.data import subsample, synthetic_digits
from weightcert.losses import LossConfig
from weightcert.network import NetworkSpec
from weightcert.trainer import TrainConfig, train

warnings.filterwarnings("ignore", message=".*did not converge.*")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("gap_sweep"))
    ap.add_argument("--lam", type=float, default=1e-4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    train_pool = synthetic_digits(6000, seed=0)
    test_set = synthetic_digits(2000, seed=1)
    spec = NetworkSpec((784, 128, 64, 32, 10))
    train_eval = subsample(train_pool, 1000, seed=args.seed)
    test_eval = subsample(test_set, 500, seed=7)
    mus = [0.0, 0.002, 0.004, 0.006, 0.008]

    rows = []
    for eps_train in (0.01, 0.05):
        for eps_test in (0.001, 0.002):
            gaps = []
            for mu in mus:
                loss = LossConfig(lam=args.lam, mu=mu,
                                  perturbation=PerturbationSpec.all_layers(
                                      4, eps_train))
                cfg = TrainConfig(loss=loss, epochs=20, batch_size=32,
                                  learning_rate=0.01, seed=args.seed,
                                  train_subset_size=1000)
                net, _ = train(spec, train_pool, cfg)
                gap = empirical_generalization_gap(
                    net, train_eval, test_eval,
                    attack=AttackConfig(eps_test=eps_test, steps=200))
                gaps.append(gap)
                rows.append({"eps_train": eps_train, "eps_test": eps_test,
                             "mu": mu, "gap": gap})
            slope = float(np.polyfit(mus, gaps, 1)[0])
            print(f"eps_train={eps_train} eps_test={eps_test}: "
                  f"gaps {[round(g, 4) for g in gaps]} slope {slope:+.3f}")
    write_analysis_csv(args.out / "gap_sweep.csv", rows)


if __name__ == "__main__":
    main()
