import numpy as np
import pytest
import scipy.stats

from ptbcc import (
    MethodRun,
    accuracy,
    benchmark,
    compare_methods,
    fit,
    generate_synthetic,
    load_external_predictions,
    majority_vote,
    wilcoxon_one_sided,
)
from ptbcc.engine import Hyperparams
from ptbcc.errors import EvaluationError, FormatError, InputError, RowError
from ptbcc.evaluation import average_ranks, format_comparison, signed_rank_cdf_count

from conftest import random_records, recovery_config
from oracles import enumerate_signed_rank_count
from ptbcc import build_dataset


class TestAccuracy:
    def test_three_of_four(self):
        preds = np.array([0, 1, 2, 0, 1])
        truths = {0: 0, 1: 1, 2: 2, 3: 1}
        assert accuracy(preds, truths) == pytest.approx(0.75)

    def test_identity(self):
        preds = np.array([2, 1, 0])
        assert accuracy(preds, {0: 2, 1: 1, 2: 0}) == 1.0

    def test_fact_shape_denominator(self):
        # 42,624 tasks but only 576 truth entries: the denominator is 576
        preds = np.zeros(42_624, dtype=int)
        truth_tasks = np.linspace(0, 42_623, 576, dtype=int)
        truths = {int(i): int(i % 2) for i in truth_tasks}
        correct = sum(1 for v in truths.values() if v == 0)
        assert accuracy(preds, truths) == pytest.approx(correct / 576)

    def test_tasks_without_truth_excluded(self):
        preds = np.array([0, 0, 0, 0])
        assert accuracy(preds, {1: 0}) == 1.0

    def test_partial_predictions_restrict_the_denominator(self):
        preds = {0: 1, 2: 1}
        truths = {0: 1, 1: 0, 2: 0}
        assert accuracy(preds, truths) == pytest.approx(0.5)

    def test_no_truths_is_an_error(self):
        with pytest.raises(EvaluationError):
            accuracy(np.array([0]), {})

    def test_no_overlap_is_an_error(self):
        with pytest.raises(EvaluationError):
            accuracy({0: 1}, {5: 1})

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(3)
        preds = rng.integers(0, 4, size=50)
        truths = {i: int(rng.integers(4)) for i in range(0, 50, 3)}
        perm = rng.permutation(4)
        mapped_truths = {i: int(perm[k]) for i, k in truths.items()}
        assert accuracy(perm[preds], mapped_truths) == accuracy(preds, truths)


class TestWilcoxon:
    def test_exact_p_value_n11_s7(self):
        # negative differences at ranks 3 and 4: S = 7
        pairs = [(0.5 + (-d if d in (3, 4) else d) / 100.0, 0.5) for d in range(1, 12)]
        report = wilcoxon_one_sided(pairs)
        assert report.n == 11
        assert report.s_statistic == 7.0
        assert report.p_value == pytest.approx(19 / 2048, abs=0)
        assert report.p_value == pytest.approx(0.0093, abs=5e-4)

    def test_maximum_s_gives_p_one(self):
        pairs = [(0.5 - d / 100.0, 0.5) for d in range(1, 12)]
        report = wilcoxon_one_sided(pairs)
        assert report.s_statistic == 66.0
        assert report.p_value == 1.0

    def test_n3_s0(self):
        pairs = [(0.6, 0.5), (0.7, 0.5), (0.8, 0.5)]
        report = wilcoxon_one_sided(pairs)
        assert report.n == 3
        assert report.p_value == pytest.approx(1 / 8, abs=0)

    def test_all_tied_degenerates(self):
        report = wilcoxon_one_sided([(0.4, 0.4), (0.9, 0.9)])
        assert report.n == 0
        assert report.s_statistic == 0.0
        assert report.p_value == 1.0

    def test_zero_differences_dropped(self):
        pairs = [(0.5, 0.5), (0.6, 0.5), (0.4, 0.5), (0.8, 0.5)]
        report = wilcoxon_one_sided(pairs)
        assert report.n == 3

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            wilcoxon_one_sided([])

    @pytest.mark.parametrize("n", [5, 11])
    def test_cdf_symmetry_identity(self, n):
        ranks = list(range(1, n + 1))
        total = n * (n + 1) // 2
        for s in range(total + 1):
            assert (
                signed_rank_cdf_count(ranks, s)
                + signed_rank_cdf_count(ranks, total - s - 1)
                == 2**n
            )

    def test_p_monotone_in_s(self):
        ranks = list(range(1, 12))
        counts = [signed_rank_cdf_count(ranks, s) for s in range(67)]
        assert counts == sorted(counts)
        assert counts[-1] == 2**11

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12])
    def test_convolution_equals_enumeration(self, n):
        ranks = list(range(1, n + 1))
        for s in range(n * (n + 1) // 2 + 1):
            assert signed_rank_cdf_count(ranks, s) == enumerate_signed_rank_count(
                ranks, s
            )

    def test_tied_ranks_against_enumeration(self):
        ranks = [1.5, 1.5, 3.0, 4.5, 4.5]
        for s in np.arange(0.0, 16.0, 0.5):
            assert signed_rank_cdf_count(ranks, float(s)) == enumerate_signed_rank_count(
                ranks, float(s)
            )

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_matches_scipy_exact_on_untied_data(self, seed):
        rng = np.random.default_rng(seed)
        diffs = rng.standard_normal(10)
        diffs = diffs[np.abs(diffs) > 1e-6]
        pairs = [(0.5 + d, 0.5) for d in diffs]
        mine = wilcoxon_one_sided(pairs)
        ref = scipy.stats.wilcoxon(diffs, alternative="greater", method="exact")
        assert mine.p_value == pytest.approx(ref.pvalue, abs=1e-12)

    def test_average_ranks_match_scipy(self):
        rng = np.random.default_rng(9)
        vals = np.round(rng.uniform(0, 1, 20), 1)
        assert average_ranks(vals) == pytest.approx(scipy.stats.rankdata(vals))


class TestCompareMethods:
    def test_reference_identical_run_degenerates(self):
        acc = {f"d{i}": 0.5 + i / 100 for i in range(5)}
        report = compare_methods(
            [MethodRun("MV", dict(acc)), MethodRun("copy", dict(acc))], "MV"
        )
        row = report["methods"][1]
        assert row["average_accuracy"] == report["methods"][0]["average_accuracy"]
        assert row["p_value"] == 1.0

    def test_injected_averages_render_exactly(self):
        datasets = [f"d{i}" for i in range(11)]
        mv = MethodRun("MV", {d: 0.6986 for d in datasets})
        pt = MethodRun("PTBCC", {d: 0.7472 for d in datasets})
        report = compare_methods([mv, pt], "MV")
        assert f"{report['methods'][0]['average_accuracy']:.4f}" == "0.6986"
        assert f"{report['methods'][1]['average_accuracy']:.4f}" == "0.7472"
        assert report["methods"][1]["significance"] == "**"
        text = format_comparison(report)
        assert "0.6986" in text and "0.7472" in text

    def test_significance_thresholds(self):
        datasets = [f"d{i}" for i in range(11)]
        mv = MethodRun("MV", {d: 0.5 for d in datasets})
        # S = 14 -> p = 0.0449...: one star; S = 7 -> p = 0.0093: two stars
        def run_with_negative_ranks(name, neg):
            accs = {}
            for i, d in enumerate(datasets, start=1):
                delta = i / 1000.0
                accs[d] = 0.5 - delta if i in neg else 0.5 + delta
            return MethodRun(name, accs)

        report = compare_methods(
            [mv, run_with_negative_ranks("a", {6, 8}), run_with_negative_ranks("b", {3, 4})],
            "MV",
        )
        assert report["methods"][1]["s_statistic"] == 14.0
        assert report["methods"][1]["significance"] == "*"
        assert report["methods"][2]["significance"] == "**"

    def test_mismatched_dataset_sets_rejected(self):
        with pytest.raises(InputError):
            compare_methods(
                [MethodRun("MV", {"a": 0.5}), MethodRun("x", {"b": 0.5})], "MV"
            )

    def test_missing_reference_rejected(self):
        with pytest.raises(InputError):
            compare_methods([MethodRun("x", {"a": 0.5})], "MV")


class TestLoadExternalPredictions:
    def _dataset(self):
        rng = np.random.default_rng(31)
        records = random_records(12, 5, 3, 3, rng)
        truths = [(f"t{i}", f"c{rng.integers(3)}") for i in range(12)]
        return build_dataset(records, truths)

    def test_echoing_majority_vote_gives_same_accuracy(self):
        ds = self._dataset()
        mv = majority_vote(ds)
        text = "question,predicted\n" + "\n".join(
            f"{ds.task_ids[i]},{ds.class_labels[k]}"
            for i, k in enumerate(mv.predictions.tolist())
        )
        loaded = load_external_predictions(text, ds)
        truths = ds.evaluable_truths()
        assert accuracy(loaded, truths) == accuracy(mv.predictions, truths)

    def test_unknown_class_label_reports_line(self):
        ds = self._dataset()
        text = f"question,predicted\n{ds.task_ids[0]},c0\n{ds.task_ids[1]},zebra\n"
        with pytest.raises(RowError) as exc:
            load_external_predictions(text, ds)
        assert exc.value.line == 3

    def test_unknown_task_reports_line(self):
        ds = self._dataset()
        with pytest.raises(RowError) as exc:
            load_external_predictions("question,predicted\nnope,c0\n", ds)
        assert exc.value.line == 2

    def test_partial_coverage_scores_covered_tasks(self):
        ds = self._dataset()
        truths = ds.evaluable_truths()
        covered = sorted(truths)[:4]
        text = "question,predicted\n" + "\n".join(
            f"{ds.task_ids[i]},{ds.class_labels[truths[i]]}" for i in covered
        )
        assert accuracy(load_external_predictions(text, ds), truths) == 1.0

    def test_bad_header(self):
        with pytest.raises(FormatError):
            load_external_predictions("task,guess\nt0,c0\n", self._dataset())


class TestBenchmark:
    def test_single_repetition_returns_a_time(self, tiny_dataset):
        secs = benchmark(lambda ds: majority_vote(ds), tiny_dataset, repetitions=1)
        assert secs >= 0.0

    def test_invalid_repetitions(self, tiny_dataset):
        with pytest.raises(InputError):
            benchmark(lambda ds: None, tiny_dataset, repetitions=0)

    def test_majority_vote_faster_than_full_inference(self):
        cfg = recovery_config(
            n_classes=5, n_tasks=10_000, n_workers=50, labels_per_task=10
        )
        ds, _ = generate_synthetic(cfg, 0)
        assert ds.num_annotations == 100_000
        hp = Hyperparams(xi=1e-12, max_iterations=3)
        mv_time = benchmark(lambda d: majority_vote(d), ds, repetitions=3)
        pt_time = benchmark(lambda d: fit(d, hp), ds, repetitions=1)
        assert mv_time < pt_time
