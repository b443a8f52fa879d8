"""Python bindings for the sif pipeline (CTI reports to iptables rules)."""

from ._sif import (
    KnowledgeGraph,
    SifError,
    build_rules,
    cohen_kappa,
    hamming_loss,
    krippendorff_alpha,
    parse_clips,
    rating_report,
    rouge_l_f1,
    run_clips,
    run_pipeline,
    spearman_rho,
    top_k_accuracy,
    verify_iptables,
    weighted_accuracy,
    weighted_f1,
)

__all__ = [
    "KnowledgeGraph",
    "SifError",
    "build_rules",
    "cohen_kappa",
    "hamming_loss",
    "krippendorff_alpha",
    "parse_clips",
    "rating_report",
    "rouge_l_f1",
    "run_clips",
    "run_pipeline",
    "spearman_rho",
    "top_k_accuracy",
    "verify_iptables",
    "weighted_accuracy",
    "weighted_f1",
]
