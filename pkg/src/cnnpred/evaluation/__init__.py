from .experiment import (
    MEASURES,
    ExperimentReport,
    SeedResult,
    attach_p_values,
    build_sample_sets,
    emit_report,
    evaluate,
    parse_report_csv,
    render_report,
    run_experiment,
)
from .metrics import ConfusionCounts, accuracy, macro_f, macro_f_counts, regularized_beta, welch_t_test

__all__ = [
    "MEASURES", "ExperimentReport", "SeedResult", "attach_p_values", "build_sample_sets",
    "emit_report", "evaluate", "parse_report_csv", "render_report", "run_experiment",
    "ConfusionCounts", "accuracy", "macro_f", "macro_f_counts", "regularized_beta",
    "welch_t_test",
]
