#!/usr/bin/env python3
"""Full evaluation on converted real recordings (Table-style reports).

Expects a directory of per-subject ``.eegd`` containers produced by the
``eegd-convert`` tool from the published per-subject files.  Runs the
dual-branch model and every comparison method on shared 10-fold plans
for 6-class and 72-class labels, then writes per-subject evaluation
reports, the comparison tables with significance stars, and the
transfer-learning experiment.

A full run (10 subjects x 6 methods x 10 folds x 25 epochs, twice for
the two label granularities) is an overnight job on a desktop CPU; use
--subjects / --methods / --classes to run slices.
"""

import argparse
from pathlib import Path

from eegdecode.datamodel import dataset_read, default_occipital_mask
from eegdecode.evaluation import (
    compare_methods, comparison_text, make_folds, run_cv, to_json,
    transfer_csv, transfer_experiment, write_comparison_outputs,
    write_eval_outputs,
)
from eegdecode.models import ModelSpec

ALL_METHODS = ("attention_cnn", "plain_cnn", "shallow_convnet", "lstm_cnn", "lstm", "lda")


def build_specs(methods, n_classes, mask, epochs, seed):
    return [ModelSpec(m, n_classes, mask=mask if m == "attention_cnn" else None,
                      epochs=epochs, seed=seed) for m in methods]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("data_dir", type=Path, help="directory of converted .eegd files")
    ap.add_argument("--out", type=Path, default=Path("real_data_out"))
    ap.add_argument("--methods", default=",".join(ALL_METHODS))
    ap.add_argument("--classes", type=int, default=0,
                    help="6 or 72; default runs both")
    ap.add_argument("--subjects", type=int, default=0, help="limit subject count")
    ap.add_argument("--epochs", type=int, default=25)
    ap.add_argument("--fold-seed", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--transfer", action="store_true",
                    help="also run the category-to-exemplar transfer experiment")
    args = ap.parse_args()

    paths = sorted(args.data_dir.glob("*.eegd"))
    if args.subjects:
        paths = paths[:args.subjects]
    if not paths:
        raise SystemExit(f"no .eegd files under {args.data_dir}")
    datasets = [dataset_read(p) for p in paths]
    print(f"loaded {len(datasets)} subjects: {[d.subject_id for d in datasets]}")

    mask = default_occipital_mask()
    methods = args.methods.split(",")
    class_runs = (args.classes,) if args.classes else (6, 72)

    for n_classes in class_runs:
        specs = build_specs(methods, n_classes, mask, args.epochs, args.seed)
        report = compare_methods(datasets, specs, fold_seed=args.fold_seed)
        print(comparison_text(report))
        write_comparison_outputs(report, args.out, f"compare_{n_classes}class")

        # per-subject detail for the dual-branch model (recall/F1, figures)
        for ds in datasets:
            plan = make_folds(ds, 10, args.fold_seed)
            detail = run_cv(ds, specs[0], plan)
            write_eval_outputs(detail, args.out / ds.subject_id,
                               f"{specs[0].variant}_{n_classes}class")

    if args.transfer:
        base = ModelSpec("attention_cnn", 6, mask=mask, epochs=args.epochs, seed=args.seed)
        for ds in datasets:
            plan = make_folds(ds, 10, args.fold_seed)
            report = transfer_experiment(ds, base, plan)
            subj_dir = args.out / ds.subject_id
            subj_dir.mkdir(parents=True, exist_ok=True)
            (subj_dir / "transfer.json").write_text(to_json(report))
            (subj_dir / "transfer.csv").write_text(transfer_csv(report))
            print(f"{ds.subject_id}: transfer {100 * report.transfer_mean:.2f}% "
                  f"vs scratch {100 * report.scratch_mean:.2f}%")


if __name__ == "__main__":
    main()
