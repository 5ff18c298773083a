"""Worst-case margin certification for ReLU networks under weight perturbation.

Certifies pairwise-class-margin degradation of bias-free dense ReLU networks
when every weight entry may move by up to a per-layer l_inf radius, trains
networks against that worst case, attacks them with weight-space PGD, and
reports generalization statistics for the resulting norm-bounded models.
"""

from .analysis import (BoundStatistics, bound_statistics,
                       empirical_generalization_gap, network_norm_caps,
                       quantize, rademacher_margin_term, rademacher_psi_term,
                       theorem_bound_rhs, write_analysis_csv)
from .attack import (AttackConfig, auc, robust_accuracy_sweep, weight_pgd,
                     write_sweep_csv)
from .bounds import (MarginCertificate, PerturbationSpec, certify_dataset,
                     certify_sample, conv_to_toeplitz, delta_term, eta,
                     eta_max_over_competitors, final_layer_term, psi,
                     starred_weights, write_certificates_csv, z_star)
from .data import (Dataset, IdxFormatError, load_idx, subsample,
                   synthetic_blobs, synthetic_digits, write_idx_images,
                   write_idx_labels)
from .linalg import (DimensionError, frobenius_norm, matrix_pq_norm,
                     max_column_l1, max_row_l1, spectral_norm)
from .losses import (LossConfig, cross_entropy, generalization_regularizer,
                     ramp_phi, robust_cross_entropy, robust_ramp_loss,
                     robust_ramp_loss_multi, total_loss,
                     total_loss_and_gradient, total_loss_gradient)
from .network import (ForwardTrace, Network, NetworkSpec, accuracy, forward,
                      forward_batch, initialize, load_network, margin,
                      pairwise_margin, predict, save_network)
from .trainer import (RunRecord, TrainConfig, TrainingDivergedError, train,
                      write_runrecord_csv)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "BoundStatistics", "Dataset", "DimensionError",
    "ForwardTrace", "IdxFormatError", "LossConfig", "MarginCertificate",
    "Network", "NetworkSpec", "PerturbationSpec", "RunRecord", "TrainConfig",
    "TrainingDivergedError", "accuracy", "auc", "bound_statistics",
    "certify_dataset", "certify_sample", "conv_to_toeplitz", "cross_entropy",
    "delta_term", "empirical_generalization_gap", "eta",
    "eta_max_over_competitors", "final_layer_term", "forward", "forward_batch",
    "frobenius_norm", "generalization_regularizer", "initialize", "load_idx",
    "load_network", "margin", "matrix_pq_norm", "max_column_l1", "max_row_l1",
    "network_norm_caps", "pairwise_margin", "predict", "psi", "quantize",
    "rademacher_margin_term", "rademacher_psi_term", "ramp_phi",
    "robust_accuracy_sweep", "robust_cross_entropy", "robust_ramp_loss",
    "robust_ramp_loss_multi", "save_network", "spectral_norm",
    "starred_weights", "subsample", "synthetic_blobs", "synthetic_digits",
    "theorem_bound_rhs", "total_loss", "total_loss_and_gradient",
    "total_loss_gradient", "train", "weight_pgd", "write_analysis_csv",
    "write_certificates_csv", "write_idx_images", "write_idx_labels",
    "write_runrecord_csv", "write_sweep_csv", "z_star",
]
