import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from scipy import integrate, special

import eegdecode.evaluation.harness as harness
from eegdecode.datamodel import EegDataset, default_synth_config, synth_generate
from eegdecode.evaluation import (
    compare_methods, compute_metrics, confusion_matrix, make_folds,
    normalize_confusion, paired_ttest, run_cv, significance_stars,
    summarize_accuracies, to_json, transfer_experiment,
)
from eegdecode.models import ModelSpec

# Published per-subject accuracies for the proposed model (reference table)
TABLE2_6CLASS = [47.55, 43.70, 51.27, 45.27, 58.40, 58.50, 55.43, 40.08, 45.22, 58.32]
TABLE2_72CLASS = [26.45, 18.03, 28.55, 14.34, 39.19, 42.81, 29.16, 13.79, 16.27, 38.95]


def dataset_with_labels(labels, subject="s"):
    labels = np.asarray(labels)
    rng = np.random.default_rng(0)
    return EegDataset(rng.standard_normal((len(labels), 2, 3)).astype(np.float32),
                      labels, ["a", "b"], 62.5, subject)


class TestFolds:
    def test_full_subject_partition_sizes(self):
        ds = dataset_with_labels(np.repeat(np.arange(72), 72))
        plan = make_folds(ds, 10, seed=1)
        sizes = sorted(len(f) for f in plan.test_folds)
        assert sum(sizes) == 5184
        assert set(sizes) <= {518, 519}
        assert plan.strata == "exemplar"

    def test_same_seed_identical_plan(self):
        ds = dataset_with_labels(np.repeat(np.arange(72), 12))
        a = make_folds(ds, 10, seed=3)
        b = make_folds(ds, 10, seed=3)
        for fa, fb in zip(a.test_folds, b.test_folds):
            np.testing.assert_array_equal(fa, fb)

    @settings(max_examples=25, deadline=None)
    @given(n_per=st.integers(1, 15), k=st.integers(2, 10), seed=st.integers(0, 1000))
    def test_partition_property(self, n_per, k, seed):
        ds = dataset_with_labels(np.repeat(np.arange(72), n_per))
        if k > ds.n_trials:
            return
        plan = make_folds(ds, k, seed)
        allidx = np.concatenate(plan.test_folds)
        assert len(allidx) == ds.n_trials
        assert len(np.unique(allidx)) == ds.n_trials

    def test_fallback_to_category_with_warning(self):
        ds = dataset_with_labels(np.repeat(np.arange(72), 3))
        plan = make_folds(ds, 10, 0)
        assert plan.strata == "category"
        assert plan.warnings

    def test_each_fold_contains_every_exemplar_when_possible(self):
        ds = dataset_with_labels(np.repeat(np.arange(72), 12))
        plan = make_folds(ds, 10, 0)
        for fold in plan.test_folds:
            assert len(np.unique(ds.exemplar_labels[fold])) == 72

    def test_k_larger_than_trials_rejected(self):
        ds = dataset_with_labels([0, 1, 2])
        with pytest.raises(ValueError):
            make_folds(ds, 10, 0)


class TestMetrics:
    def test_perfect_predictions(self):
        y = np.array([0, 1, 2, 3, 4, 5] * 3)
        m = compute_metrics(y, y, 6)
        assert m.accuracy == 1.0
        np.testing.assert_array_equal(m.precision, 1.0)
        np.testing.assert_array_equal(m.recall, 1.0)
        np.testing.assert_array_equal(m.f1, 1.0)

    def test_two_class_hand_case(self):
        # y_true=[1,0,1,1], y_pred=[1,1,1,0]: class-1 P=R=F1=2/3
        m = compute_metrics([1, 0, 1, 1], [1, 1, 1, 0], 2)
        assert m.precision[1] == pytest.approx(2 / 3)
        assert m.recall[1] == pytest.approx(2 / 3)
        assert m.f1[1] == pytest.approx(2 / 3)

    def test_single_class_predictor(self):
        y_true = np.tile(np.arange(6), 6)
        y_pred = np.zeros(36, dtype=int)
        m = compute_metrics(y_true, y_pred, 6)
        assert m.recall[0] == 1.0
        np.testing.assert_array_equal(m.recall[1:], 0.0)
        assert m.accuracy == pytest.approx(1 / 6)
        assert m.zero_division[1:].all()

    def test_accuracy_equals_trace_ratio(self):
        rng = np.random.default_rng(5)
        y_true = rng.integers(0, 6, 500)
        y_pred = rng.integers(0, 6, 500)
        m = compute_metrics(y_true, y_pred, 6)
        cm = m.confusion
        assert m.accuracy == pytest.approx(np.trace(cm) / cm.sum(), abs=1e-12)
        assert m.accuracy == pytest.approx((y_true == y_pred).mean(), abs=1e-12)

    def test_macro_recall_equals_accuracy_on_balanced_errors(self):
        # balanced truth, per-class error counts identical by construction
        y_true = np.repeat(np.arange(6), 10)
        y_pred = y_true.copy()
        for c in range(6):
            idx = np.nonzero(y_true == c)[0][:2]
            y_pred[idx] = (c + 1) % 6
        m = compute_metrics(y_true, y_pred, 6)
        assert m.recall.mean() == pytest.approx(m.accuracy, abs=1e-9)

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            confusion_matrix([0, 6], [0, 0], 6)

    def test_row_normalization(self):
        cm = np.array([[8, 2], [3, 7]])
        norm = normalize_confusion(cm)
        np.testing.assert_allclose(norm.sum(axis=1), 1.0, atol=1e-9)


class TestPairedTTest:
    def test_identical_vectors(self):
        res = paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert res.t == 0.0 and res.p == 1.0

    def test_hand_case_one_to_five(self):
        res = paired_ttest(np.array([1.0, 2, 3, 4, 5]), np.zeros(5))
        assert res.t == pytest.approx(4.2426, abs=1e-3)
        assert res.df == 4
        assert res.p == pytest.approx(0.0132, abs=1e-3)

    def test_p_matches_numerical_integration(self):
        # independent oracle: integrate the t density directly
        for a, b in (([1.0, 2, 3, 4, 5], [0.0] * 5),
                     ([0.5, 0.52, 0.47, 0.56, 0.51, 0.55], [0.45, 0.5, 0.5, 0.5, 0.46, 0.52])):
            res = paired_ttest(np.array(a), np.array(b))
            df = res.df

            def pdf(x):
                const = special.gamma((df + 1) / 2) / (np.sqrt(df * np.pi) * special.gamma(df / 2))
                return const * (1 + x * x / df) ** (-(df + 1) / 2)

            tail, _ = integrate.quad(pdf, abs(res.t), np.inf)
            assert res.p == pytest.approx(2 * tail, abs=1e-4)

    def test_antisymmetric_in_swap(self):
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        r1, r2 = paired_ttest(a, b), paired_ttest(b, a)
        assert r1.t == pytest.approx(-r2.t)
        assert r1.p == pytest.approx(r2.p)

    def test_degenerate_nonzero_constant_difference(self):
        res = paired_ttest([1.0, 1.0, 1.0], [0.0, 0.0, 0.0])
        assert res.degenerate and res.p == 0.0

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            paired_ttest([1.0], [2.0])

    def test_star_convention(self):
        assert significance_stars(0.049) == "*"
        assert significance_stars(0.009) == "**"
        assert significance_stars(0.05) == ""
        assert significance_stars(0.2) == ""

    def test_n10_just_under_005_gets_one_star(self):
        # construct d with unit sd and mean c so that t = c * sqrt(10) exactly
        z = np.random.default_rng(7).standard_normal(10)
        z = (z - z.mean()) / z.std(ddof=1)
        res = paired_ttest(z + 2.33 / np.sqrt(10), np.zeros(10))
        assert res.t == pytest.approx(2.33, abs=1e-9)
        assert 0.01 < res.p < 0.05
        assert res.stars == "*"

    def test_n10_well_under_001_gets_two_stars(self):
        z = np.random.default_rng(8).standard_normal(10)
        z = (z - z.mean()) / z.std(ddof=1)
        res = paired_ttest(z + 4.0 / np.sqrt(10), np.zeros(10))
        assert res.p < 0.01
        assert res.stars == "**"


class TestAggregation:
    def test_published_per_subject_means_and_stds(self):
        # the aggregation convention must reproduce the printed summary rows
        mean, std = summarize_accuracies(TABLE2_6CLASS)
        assert mean == pytest.approx(50.37, abs=0.01)
        assert std == pytest.approx(6.56, abs=0.01)
        mean, std = summarize_accuracies(TABLE2_72CLASS)
        assert mean == pytest.approx(26.75, abs=0.01)
        assert std == pytest.approx(10.38, abs=0.01)


class TestRunCvWithStub:
    @pytest.fixture()
    def tiny(self):
        return synth_generate(default_synth_config(trials_per_exemplar=2, seed=31))

    def test_perfect_classifier_stub(self, tiny, monkeypatch):
        truth = {}

        def fake_train(mp, trials, labels, rng=None, **kw):
            return []

        def fake_predict(mp, trials, batch_size=256):
            return truth[trials.tobytes()[:64]]

        labels = tiny.labels_for(6)
        plan = make_folds(tiny, 4, 0)
        for f in range(4):
            _, te = plan.train_test(f)
            truth[tiny.trials[te].tobytes()[:64]] = labels[te]
        monkeypatch.setattr(harness, "train_model", fake_train)
        monkeypatch.setattr(harness, "predict", fake_predict)

        report = run_cv(tiny, ModelSpec("plain_cnn", 6, seed=0), plan)
        assert report.accuracy_mean == 1.0
        assert all(f == 1.0 for f in report.f1)
        np.testing.assert_allclose(np.asarray(report.confusion).sum(axis=1), 1.0, atol=1e-9)
        assert all(a == 1.0 for a in report.per_exemplar_accuracy)

    def test_confusion_row_sums_and_accuracy_identity(self, tiny):
        plan = make_folds(tiny, 2, 0)
        spec = ModelSpec("lda", 6, seed=0)
        report = run_cv(tiny, spec, plan)
        rows = np.asarray(report.confusion).sum(axis=1)
        np.testing.assert_allclose(rows, 1.0, atol=1e-9)
        counts = np.asarray(report.confusion_counts)
        overall = np.trace(counts) / counts.sum()
        weighted = np.average(report.per_fold_accuracy,
                              weights=[len(plan.test_folds[f]) for f in range(plan.k)])
        assert overall == pytest.approx(weighted, abs=1e-12)

    def test_report_bytes_reproducible(self, tiny):
        plan = make_folds(tiny, 2, 0)
        spec = ModelSpec("lda", 6, seed=0)
        a = to_json(run_cv(tiny, spec, plan))
        b = to_json(run_cv(tiny, spec, plan))
        assert a == b

    def test_divergent_fold_aborts_with_fold_id(self, tiny, monkeypatch):
        from eegdecode.models import TrainingDivergedError

        def exploding_train(mp, trials, labels, rng=None, **kw):
            raise TrainingDivergedError("non-finite loss nan")

        monkeypatch.setattr(harness, "train_model", exploding_train)
        plan = make_folds(tiny, 2, 0)
        with pytest.raises(harness.FoldFailure, match="fold 0"):
            run_cv(tiny, ModelSpec("plain_cnn", 6, seed=0), plan)


class TestCompare:
    def test_single_method_no_tests(self):
        ds = synth_generate(default_synth_config(trials_per_exemplar=2, seed=41))
        report = compare_methods([ds], [ModelSpec("lda", 6, seed=0)], fold_seed=0, k=2)
        assert report.rows[0].ttest is None
        assert report.reference_method == "lda"

    def test_identical_method_twice_gives_p_one(self):
        datasets = [synth_generate(default_synth_config(trials_per_exemplar=2, seed=s,
                                                        subject_id=f"s{s}"))
                    for s in (51, 52)]
        specs = [ModelSpec("lda", 6, seed=0), ModelSpec("lda", 6, seed=0)]
        report = compare_methods(datasets, specs, fold_seed=1, k=2)
        row = report.rows[1]
        assert row.ttest.t == 0.0
        assert row.ttest.p == 1.0
        assert row.ttest.stars == ""
        assert report.rows[0].method != report.rows[1].method

    def test_mismatched_class_counts_rejected(self):
        ds = synth_generate(default_synth_config(trials_per_exemplar=2, seed=61))
        with pytest.raises(ValueError):
            compare_methods([ds], [ModelSpec("lda", 6), ModelSpec("lda", 72)], 0, 2)


class TestTransferExperimentReport:
    def test_report_contains_both_columns(self, occipital_mask):
        ds = synth_generate(default_synth_config(trials_per_exemplar=2, seed=71))
        base = ModelSpec("attention_cnn", 6, mask=occipital_mask, seed=0,
                         epochs=1, batch_size=72)
        plan = make_folds(ds, 2, 0)
        report = transfer_experiment(ds, base, plan, fine_tune_epochs=1)
        assert len(report.per_fold_transfer_accuracy) == 2
        assert len(report.per_fold_scratch_accuracy) == 2
        d = report.to_dict()
        assert "transfer_mean" in d and "scratch_mean" in d and "transfer_minus_scratch" in d
