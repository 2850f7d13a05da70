"""Cross-validation harness and the method-comparison machinery.

Per-fold metric values are averaged across folds; confusion matrices
are summed over folds and then row-normalized; accuracy spreads are the
population standard deviation over folds or subjects, matching how the
reference tables aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datamodel import EegDataset, N_EXEMPLARS
from ..models import ModelSpec, build, predict, train_model, transfer_adapt, TrainingDivergedError
from .folds import FoldPlan, fold_rng, make_folds
from .metrics import compute_metrics, normalize_confusion
from .stats import TTestResult, paired_ttest


class FoldFailure(RuntimeError):
    """A fold diverged; the run aborts by default and names the fold."""

    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold} failed: {cause}")
        self.fold = fold
        self.cause = cause


@dataclass
class EvalReport:
    subject_id: str
    n_classes: int
    model: dict
    k: int
    fold_seed: int
    strata: str
    per_fold_accuracy: list
    accuracy_mean: float
    accuracy_std: float
    precision: list              # fold-averaged, per class
    recall: list
    f1: list
    confusion: list              # summed over folds, row-normalized
    confusion_counts: list
    per_exemplar_accuracy: list  # one entry per exemplar id; None if absent
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id, "n_classes": self.n_classes,
            "model": self.model, "k": self.k, "fold_seed": self.fold_seed,
            "strata": self.strata,
            "per_fold_accuracy": self.per_fold_accuracy,
            "accuracy_mean": self.accuracy_mean, "accuracy_std": self.accuracy_std,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "confusion": self.confusion, "confusion_counts": self.confusion_counts,
            "per_exemplar_accuracy": self.per_exemplar_accuracy,
            "warnings": self.warnings,
        }


def _aggregate(ds: EegDataset, spec: ModelSpec, plan: FoldPlan, fold_metrics,
               predictions: np.ndarray, tested: np.ndarray) -> EvalReport:
    accs = [m.accuracy for m in fold_metrics]
    counts = np.sum([m.confusion for m in fold_metrics], axis=0)
    labels = ds.labels_for(spec.n_classes)

    exemplar_acc = []
    correct = predictions == labels
    for e in range(N_EXEMPLARS):
        sel = tested & (ds.exemplar_labels == e)
        exemplar_acc.append(float(correct[sel].mean()) if sel.any() else None)

    return EvalReport(
        subject_id=ds.subject_id, n_classes=spec.n_classes, model=spec.to_dict(),
        k=plan.k, fold_seed=plan.seed, strata=plan.strata,
        per_fold_accuracy=[float(a) for a in accs],
        accuracy_mean=float(np.mean(accs)),
        accuracy_std=float(np.std(accs)),
        precision=np.mean([m.precision for m in fold_metrics], axis=0).tolist(),
        recall=np.mean([m.recall for m in fold_metrics], axis=0).tolist(),
        f1=np.mean([m.f1 for m in fold_metrics], axis=0).tolist(),
        confusion=normalize_confusion(counts).tolist(),
        confusion_counts=counts.tolist(),
        per_exemplar_accuracy=exemplar_acc,
        warnings=list(plan.warnings),
    )


def run_cv(ds: EegDataset, spec: ModelSpec, plan: FoldPlan,
           dtype=np.float32) -> EvalReport:
    """Train on k-1 folds, test on the held-out fold, for every rotation."""
    ds.validate(model_ready=True)
    labels = ds.labels_for(spec.n_classes)
    predictions = np.full(ds.n_trials, -1, dtype=np.int64)
    tested = np.zeros(ds.n_trials, dtype=bool)
    fold_metrics = []
    for f in range(plan.k):
        train_idx, test_idx = plan.train_test(f)
        rng = fold_rng(spec.seed, ds.subject_id, f)
        try:
            mp = build(spec, rng, dtype=dtype)
            train_model(mp, ds.trials[train_idx], labels[train_idx], rng)
            y_pred = predict(mp, ds.trials[test_idx])
        except TrainingDivergedError as exc:
            raise FoldFailure(f, exc) from exc
        predictions[test_idx] = y_pred
        tested[test_idx] = True
        fold_metrics.append(compute_metrics(labels[test_idx], y_pred, spec.n_classes))
    return _aggregate(ds, spec, plan, fold_metrics, predictions, tested)


@dataclass
class ComparisonRow:
    method: str
    spec: dict
    per_subject_accuracy: list
    mean: float
    std: float
    ttest: TTestResult | None

    def to_dict(self) -> dict:
        return {"method": self.method, "spec": self.spec,
                "per_subject_accuracy": self.per_subject_accuracy,
                "mean": self.mean, "std": self.std,
                "ttest": self.ttest.to_dict() if self.ttest else None}


@dataclass
class ComparisonReport:
    n_classes: int
    k: int
    fold_seed: int
    subjects: list
    reference_method: str
    rows: list

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "k": self.k, "fold_seed": self.fold_seed,
                "subjects": self.subjects, "reference_method": self.reference_method,
                "rows": [r.to_dict() for r in self.rows]}


def summarize_accuracies(per_subject: list) -> tuple:
    """Mean and population std, the convention used by the result tables."""
    arr = np.asarray(per_subject, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def compare_methods(datasets: list, specs: list, fold_seed: int = 0, k: int = 10,
                    dtype=np.float32) -> ComparisonReport:
    """Evaluate every spec on every subject with shared per-subject fold plans.

    The attention variant (or the first spec) is the reference for the
    paired tests; with a single subject no test is possible and the
    t-test fields stay empty.
    """
    if not datasets or not specs:
        raise ValueError("need at least one dataset and one spec")
    subjects = [ds.subject_id for ds in datasets]
    if len(set(subjects)) != len(subjects):
        raise ValueError("subject ids must be unique")
    n_classes = specs[0].n_classes
    if any(s.n_classes != n_classes for s in specs):
        raise ValueError("all compared specs must share n_classes")

    names = []
    for s in specs:
        name = s.variant
        while name in names:
            name += "+"
        names.append(name)
    ref_idx = next((i for i, s in enumerate(specs) if s.variant == "attention_cnn"), 0)

    accs = np.zeros((len(specs), len(datasets)))
    for j, ds in enumerate(datasets):
        plan = make_folds(ds, k, fold_seed)
        for i, spec in enumerate(specs):
            accs[i, j] = run_cv(ds, spec, plan, dtype=dtype).accuracy_mean

    rows = []
    for i, spec in enumerate(specs):
        mean, std = summarize_accuracies(accs[i])
        ttest = None
        if i != ref_idx and len(datasets) >= 2:
            ttest = paired_ttest(accs[ref_idx], accs[i])
        rows.append(ComparisonRow(names[i], spec.to_dict(), accs[i].tolist(), mean, std, ttest))
    return ComparisonReport(n_classes, k, fold_seed, subjects, names[ref_idx], rows)


@dataclass
class TransferReport:
    subject_id: str
    k: int
    fold_seed: int
    base_model: dict
    per_fold_transfer_accuracy: list
    per_fold_scratch_accuracy: list
    transfer_mean: float
    transfer_std: float
    scratch_mean: float
    scratch_std: float

    @property
    def transfer_minus_scratch(self) -> float:
        return self.transfer_mean - self.scratch_mean

    def to_dict(self) -> dict:
        return {"subject_id": self.subject_id, "k": self.k, "fold_seed": self.fold_seed,
                "base_model": self.base_model,
                "per_fold_transfer_accuracy": self.per_fold_transfer_accuracy,
                "per_fold_scratch_accuracy": self.per_fold_scratch_accuracy,
                "transfer_mean": self.transfer_mean, "transfer_std": self.transfer_std,
                "scratch_mean": self.scratch_mean, "scratch_std": self.scratch_std,
                "transfer_minus_scratch": self.transfer_minus_scratch}


def transfer_experiment(ds: EegDataset, base_spec: ModelSpec, plan: FoldPlan,
                        fine_tune_epochs: int | None = None) -> TransferReport:
    """Category-trained blocks, exemplar-head fine-tuning, vs from scratch.

    Per fold: train the 6-class base on the training split, freeze the
    blocks, reinitialize and fine-tune a 72-class head on the same split,
    then evaluate on the held-out fold next to a from-scratch 72-class run.
    """
    if base_spec.variant != "attention_cnn":
        raise ValueError("transfer experiment expects an attention_cnn base spec")
    if base_spec.n_classes != 6:
        raise ValueError("base spec must be 6-class")
    cat_labels = ds.labels_for(6)
    ex_labels = ds.labels_for(N_EXEMPLARS)
    scratch_spec = ModelSpec(**{**base_spec.to_dict(), "mask": base_spec.mask,
                                "n_classes": N_EXEMPLARS})

    transfer_acc, scratch_acc = [], []
    for f in range(plan.k):
        train_idx, test_idx = plan.train_test(f)
        rng = fold_rng(base_spec.seed, ds.subject_id, f)
        base = build(base_spec, rng)
        train_model(base, ds.trials[train_idx], cat_labels[train_idx], rng)

        adapted = transfer_adapt(base, N_EXEMPLARS, rng)
        train_model(adapted, ds.trials[train_idx], ex_labels[train_idx], rng,
                    epochs=fine_tune_epochs)
        y_pred = predict(adapted, ds.trials[test_idx])
        transfer_acc.append(float((y_pred == ex_labels[test_idx]).mean()))

        rng2 = fold_rng(base_spec.seed, ds.subject_id, f, stream=1)
        scratch = build(scratch_spec, rng2)
        train_model(scratch, ds.trials[train_idx], ex_labels[train_idx], rng2)
        y_pred = predict(scratch, ds.trials[test_idx])
        scratch_acc.append(float((y_pred == ex_labels[test_idx]).mean()))

    t_mean, t_std = summarize_accuracies(transfer_acc)
    s_mean, s_std = summarize_accuracies(scratch_acc)
    return TransferReport(ds.subject_id, plan.k, plan.seed, base_spec.to_dict(),
                          transfer_acc, scratch_acc, t_mean, t_std, s_mean, s_std)
