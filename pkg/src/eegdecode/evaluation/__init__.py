from .folds import FoldPlan, fold_rng, make_folds, subject_hash
from .metrics import Metrics, compute_metrics, confusion_matrix, normalize_confusion
from .stats import TTestResult, paired_ttest, significance_stars, student_t_sf2
from .harness import (
    EvalReport, ComparisonReport, ComparisonRow, TransferReport, FoldFailure,
    run_cv, compare_methods, transfer_experiment, summarize_accuracies,
)
from .reports import (
    CATEGORY_NAMES, class_names, to_json, eval_csv, comparison_csv,
    comparison_text, transfer_csv, svg_confusion, svg_exemplar_bars,
    write_eval_outputs, write_comparison_outputs,
)
