"""Command-line surface: train, certify, attack, analyze, quantize, sweep.

Configs and models are JSON; tabular results are CSV with a versioned header
comment line.  Exit codes: 0 success, 1 usage/config error, 2 numeric
failure (divergence, non-finite values), 3 I/O error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys

import numpy as np

from .analysis import (bound_statistics, network_norm_caps, quantize,
                       rademacher_margin_term, rademacher_psi_term,
                       write_analysis_csv)
from .attack import auc, robust_accuracy_sweep, weight_pgd, write_sweep_csv
from .attack import AttackConfig
from .bounds import PerturbationSpec, certify_dataset, write_certificates_csv
from .data import IdxFormatError, load_idx
from .losses import LossConfig
from .network import NetworkSpec, accuracy, load_network, save_network
from .trainer import (TrainConfig, TrainingDivergedError, train,
                      write_runrecord_csv)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

_TRAIN_CONFIG_KEYS = {
    "layer_dims", "epochs", "batch_size", "learning_rate", "momentum",
    "lambda", "mu", "gamma", "eps_train", "index_set", "regularizer",
    "classification_loss", "seed", "data_images", "data_labels",
    "test_images", "test_labels", "subset_size", "out_dir",
}


class ConfigError(ValueError):
    pass


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _require_files(*paths):
    for p in paths:
        if p is not None and not os.path.exists(p):
            raise FileNotFoundError(f"missing data file: {p}")


def _perturbation_from(cfg: dict, num_layers: int) -> PerturbationSpec:
    eps = float(cfg.get("eps_train", 0.0))
    index_set = cfg.get("index_set")
    if index_set is None:
        index_set = list(range(1, num_layers + 1))
    return PerturbationSpec({int(k): eps for k in index_set})


def _build_train_config(cfg: dict, seed_override=None) -> tuple[NetworkSpec, TrainConfig, dict]:
    unknown = set(cfg) - _TRAIN_CONFIG_KEYS
    if unknown:
        raise ConfigError(f"invalid config key(s): {', '.join(sorted(unknown))}")
    if "layer_dims" not in cfg:
        raise ConfigError("config must set layer_dims")
    spec = NetworkSpec(tuple(cfg["layer_dims"]))
    loss = LossConfig(
        lam=float(cfg.get("lambda", 0.0)),
        mu=float(cfg.get("mu", 0.0)),
        gamma=float(cfg.get("gamma", 1.0)),
        perturbation=_perturbation_from(cfg, spec.num_layers),
        classification_loss=cfg.get("classification_loss", "cross_entropy"),
        regularizer=cfg.get("regularizer", "sum_norms"),
    )
    seed = int(seed_override if seed_override is not None else cfg.get("seed", 0))
    tc = TrainConfig(
        loss=loss,
        epochs=int(cfg.get("epochs", 20)),
        batch_size=int(cfg.get("batch_size", 32)),
        learning_rate=float(cfg.get("learning_rate", 0.01)),
        momentum=float(cfg.get("momentum", 0.9)),
        seed=seed,
        train_subset_size=cfg.get("subset_size"),
    )
    return spec, tc, cfg


def cmd_train(args) -> int:
    spec, tc, cfg = _build_train_config(_load_json(args.config), args.seed)
    out_dir = args.out or cfg.get("out_dir")
    if out_dir is None:
        raise ConfigError("no output directory (set out_dir or --out)")
    _require_files(cfg.get("data_images"), cfg.get("data_labels"),
                   cfg.get("test_images"), cfg.get("test_labels"))
    train_set = load_idx(cfg["data_images"], cfg["data_labels"])
    test_set = None
    if cfg.get("test_images"):
        test_set = load_idx(cfg["test_images"], cfg["test_labels"])
    net, record = train(spec, train_set, tc, test_set=test_set)
    os.makedirs(out_dir, exist_ok=True)
    save_network(net, os.path.join(out_dir, "model.json"))
    write_runrecord_csv(os.path.join(out_dir, "runrecord.csv"), record)
    print(f"trained model written to {out_dir}")
    return EXIT_OK


def cmd_certify(args) -> int:
    _require_files(args.model, args.data_images, args.data_labels)
    net = load_network(args.model)
    ds = load_idx(args.data_images, args.data_labels)
    spec = PerturbationSpec.all_layers(net.num_layers, args.eps)
    certs = certify_dataset(net, ds, spec)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "certificates.csv")
    write_certificates_csv(out_path, certs)
    frac = float(np.mean([c.certified for c in certs])) if certs else 0.0
    print(f"certified {frac:.4f} of {len(certs)} samples at eps={args.eps}; "
          f"wrote {out_path}")
    return EXIT_OK


def cmd_attack(args) -> int:
    _require_files(args.model, args.data_images, args.data_labels)
    net = load_network(args.model)
    ds = load_idx(args.data_images, args.data_labels)
    if args.eps_grid:
        grid = sorted(float(e) for e in args.eps_grid.split(","))
    else:
        grid = [0.0, args.eps] if args.eps > 0 else [0.0]
    curve = robust_accuracy_sweep(net, ds, grid, steps=args.steps, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_sweep_csv(os.path.join(args.out, "sweep.csv"), curve)
    max_eps = grid[-1]
    if max_eps > 0:
        attacked = weight_pgd(net, ds, AttackConfig(eps_test=max_eps,
                                                    steps=args.steps,
                                                    seed=args.seed))
        save_network(attacked, os.path.join(args.out, "attacked_model.json"))
    print(f"sweep AUC = {auc(curve):.4f} over eps in [{grid[0]}, {grid[-1]}]")
    return EXIT_OK


def cmd_analyze(args) -> int:
    _require_files(args.model, args.data_images, args.data_labels)
    net = load_network(args.model)
    ds = load_idx(args.data_images, args.data_labels)
    stats = bound_statistics(net)
    X = ds.inputs.T
    n = len(ds)
    s, b = network_norm_caps(net)
    d_max = max(net.spec.layer_dims)
    row = {
        "model": args.model,
        "n": n,
        "clean_accuracy": accuracy(net, ds),
        "prod_spectral": stats.prod_spectral,
        "spectral_of_product": stats.spectral_of_product,
        "log_ratio": stats.log_ratio,
        "rademacher_margin_term": rademacher_margin_term(X, s, b, n, d_max),
        "rademacher_psi_term": rademacher_psi_term(net, X, 1, args.eps, n),
    }
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "analysis.csv")
    write_analysis_csv(out_path, [row])
    print(f"analysis written to {out_path}")
    return EXIT_OK


def cmd_quantize(args) -> int:
    _require_files(args.model, args.data_images, args.data_labels)
    net = load_network(args.model)
    ds = load_idx(args.data_images, args.data_labels)
    q = quantize(net, args.bits)
    acc_before = accuracy(net, ds)
    acc_after = accuracy(q, ds)
    os.makedirs(args.out, exist_ok=True)
    save_network(q, os.path.join(args.out, "quantized_model.json"))
    write_analysis_csv(os.path.join(args.out, "quantize.csv"), [{
        "model": args.model, "bits": args.bits,
        "accuracy_before": acc_before, "accuracy_after": acc_after,
        "accuracy_drop": acc_before - acc_after,
    }])
    print(f"{args.bits}-bit accuracy {acc_after:.4f} (was {acc_before:.4f})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_json(args.config)
    base = cfg.get("train", {})
    grid = cfg.get("grid", {})
    attack_cfg = cfg.get("attack", {})
    out_dir = args.out or cfg.get("out_dir")
    if out_dir is None:
        raise ConfigError("no output directory (set out_dir or --out)")
    _require_files(base.get("data_images"), base.get("data_labels"),
                   base.get("test_images"), base.get("test_labels"))
    train_set = load_idx(base["data_images"], base["data_labels"])
    test_set = load_idx(base["test_images"], base["test_labels"]) \
        if base.get("test_images") else None
    lam_grid = grid.get("lambda", [base.get("lambda", 0.0)])
    mu_grid = grid.get("mu", [base.get("mu", 0.0)])
    eps_grid = grid.get("eps_train", [base.get("eps_train", 0.0)])
    attack_eps = sorted(float(e) for e in attack_cfg.get("eps_grid", [0.0]))
    attack_steps = int(attack_cfg.get("steps", 200))
    rows = []
    for lam, mu, eps_train in itertools.product(lam_grid, mu_grid, eps_grid):
        combo = dict(base)
        combo.update({"lambda": lam, "mu": mu, "eps_train": eps_train})
        spec, tc, _ = _build_train_config(combo, args.seed)
        net, record = train(spec, train_set, tc, test_set=test_set)
        eval_set = test_set if test_set is not None else train_set
        curve = robust_accuracy_sweep(net, eval_set, attack_eps,
                                      steps=attack_steps, seed=tc.seed)
        rows.append({
            "lambda": lam, "mu": mu, "eps_train": eps_train,
            "train_acc": record.train_accuracy[-1],
            "test_acc": record.test_accuracy[-1],
            "gap": record.train_accuracy[-1] - record.test_accuracy[-1],
            "auc": auc(curve),
        })
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, "sweep_summary.csv")
    write_analysis_csv(out_path, rows)
    print(f"sweep summary written to {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weightcert")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("certify", help="margin certification over a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data-images", required=True)
    p.add_argument("--data-labels", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("attack", help="weight PGD attack / robustness sweep")
    p.add_argument("--model", required=True)
    p.add_argument("--data-images", required=True)
    p.add_argument("--data-labels", required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--eps-grid", default=None,
                   help="comma-separated eps values for a sweep")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("analyze", help="generalization statistics for a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data-images", required=True)
    p.add_argument("--data-labels", required=True)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("quantize", help="post-training weight quantization")
    p.add_argument("--model", required=True)
    p.add_argument("--data-images", required=True)
    p.add_argument("--data-labels", required=True)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("sweep", help="(lambda, mu, eps) training grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IdxFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
