"""Crash-aware two-phase autotuner for serving-engine configurations.

The heavy lifting lives in the compiled extension; this package re-exports it.
"""

from ._core import (
    analyze_logs,
    calibration_check,
    holm_bonferroni,
    kv_token_budget,
    mann_whitney,
    neighbor,
    repair,
    run_benchmark,
    run_study,
    sample_std,
    sample_uniform,
    seed_summary,
    signature_key,
    structural_prob_schedule,
)

__all__ = [
    "analyze_logs",
    "calibration_check",
    "holm_bonferroni",
    "kv_token_budget",
    "mann_whitney",
    "neighbor",
    "repair",
    "run_benchmark",
    "run_study",
    "sample_std",
    "sample_uniform",
    "seed_summary",
    "signature_key",
    "structural_prob_schedule",
]
