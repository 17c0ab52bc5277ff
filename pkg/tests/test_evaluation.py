import math

import numpy as np
import pytest

from specrec import (
    Interaction,
    KernelSpec,
    NoiseConfig,
    evaluate_filter,
    evaluate_online,
    exact_eigs,
    fit,
    group_events,
    hit_rate,
    ndcg,
    spectrum_profile,
)
from specrec.evaluation import ProtocolError

ITEM_ROWS = {"a": 0, "b": 1, "c": 2}


@pytest.fixture()
def model(path3_basis):
    return fit(path3_basis, KernelSpec("tikhonov", gamma=1.0), phi=1.0)


def brute_hit(recs, truth, n):
    return 1.0 if set(recs[:n]) & set(truth) else 0.0


def brute_ndcg(recs, truth, n):
    if not truth:
        return 0.0
    dcg = sum(1.0 / math.log2(j + 2) for j, r in enumerate(recs[:n]) if r in set(truth))
    ideal = sum(1.0 / math.log2(j + 2) for j in range(min(len(truth), n)))
    return dcg / ideal


class TestRankingMetrics:
    def test_hit_rate_basics(self):
        assert hit_rate([3, 1, 2], {1}, 1) == 0.0
        assert hit_rate([3, 1, 2], {1}, 2) == 1.0
        assert hit_rate([3, 1, 2], {9}, 3) == 0.0
        assert hit_rate([], {1}, 5) == 0.0

    def test_ndcg_single_target_positions(self):
        assert ndcg([7], {7}, 10) == 1.0
        assert ndcg([1, 7], {7}, 10) == pytest.approx(1.0 / math.log2(3.0), rel=1e-15)
        assert ndcg([1, 2, 7], {7}, 10) == pytest.approx(0.5, rel=1e-15)
        assert ndcg([1, 2, 3], {7}, 3) == 0.0

    def test_ndcg_multiple_truth_normalization(self):
        # both relevant items ranked first: perfect score
        assert ndcg([4, 5, 1], {4, 5}, 3) == pytest.approx(1.0, rel=1e-15)
        # ideal uses min(|truth|, n) slots
        assert ndcg([4, 2], {4, 5, 6}, 2) == pytest.approx(
            1.0 / (1.0 + 1.0 / math.log2(3.0)), rel=1e-15
        )

    def test_empty_truth_scores_zero(self):
        assert ndcg([1, 2], set(), 2) == 0.0

    def test_invalid_cutoff(self):
        with pytest.raises(ValueError):
            hit_rate([1], {1}, 0)
        with pytest.raises(ValueError):
            ndcg([1], {1}, 0)

    def test_matches_brute_force_on_random_cases(self):
        rng = np.random.default_rng(90)
        for _ in range(300):
            m = int(rng.integers(1, 30))
            recs = rng.permutation(m).tolist()
            truth = set(rng.choice(m, size=int(rng.integers(0, m + 1)), replace=False).tolist())
            n = int(rng.integers(1, m + 2))
            assert hit_rate(recs, truth, n) == brute_hit(recs, truth, n)
            assert ndcg(recs, truth, n) == pytest.approx(brute_ndcg(recs, truth, n), abs=1e-12)


class TestEvaluateFilter:
    def test_two_user_cohort_hand_scored(self, model):
        users = {
            "A": [Interaction("A", "a", 1.0), Interaction("A", "b", 2.0)],
            "B": [Interaction("B", "a", 1.0), Interaction("B", "c", 2.0)],
        }
        report = evaluate_filter(model, ITEM_ROWS, users, cutoffs=(1, 2))
        # prefix {a} scores rows 1 then 2; A's target hits at rank 1,
        # B's at rank 2
        assert report.stats[1]["hr"] == 0.5
        assert report.stats[1]["hr_stderr"] == pytest.approx(0.5)
        assert report.stats[2]["hr"] == 1.0
        assert report.stats[2]["hr_stderr"] == 0.0
        expected_ndcg2 = (1.0 + 1.0 / math.log2(3.0)) / 2.0
        assert report.stats[2]["ndcg"] == pytest.approx(expected_ndcg2, rel=1e-12)
        assert report.counts["users"] == 2
        assert report.counts["skipped"] == 0

    def test_single_event_user_skipped(self, model):
        users = {
            "solo": [Interaction("solo", "a", 1.0)],
            "ok": [Interaction("ok", "a", 1.0), Interaction("ok", "b", 2.0)],
        }
        report = evaluate_filter(model, ITEM_ROWS, users, cutoffs=(1,))
        assert report.counts["users"] == 1
        assert report.counts["skipped"] == 1

    def test_unseen_target_counts_as_miss(self, model):
        users = {"u": [Interaction("u", "a", 1.0), Interaction("u", "new", 2.0)]}
        report = evaluate_filter(model, ITEM_ROWS, users, cutoffs=(3,))
        assert report.counts["users"] == 1
        assert report.counts["unseen_targets"] == 1
        assert report.stats[3]["hr"] == 0.0
        assert report.stats[3]["ndcg"] == 0.0

    def test_unknown_prefix_items_counted(self, model):
        users = {
            "u": [
                Interaction("u", "mystery", 1.0),
                Interaction("u", "a", 2.0),
                Interaction("u", "b", 3.0),
            ]
        }
        report = evaluate_filter(model, ITEM_ROWS, users, cutoffs=(1,))
        assert report.counts["unknown_prefix_items"] == 1

    def test_cutoffs_deduplicated_and_sorted(self, model):
        users = {"u": [Interaction("u", "a", 1.0), Interaction("u", "b", 2.0)]}
        report = evaluate_filter(model, ITEM_ROWS, users, cutoffs=(2, 1, 2))
        assert report.cutoffs == (1, 2)

    def test_no_cutoffs_rejected(self, model):
        with pytest.raises(ProtocolError):
            evaluate_filter(model, ITEM_ROWS, {}, cutoffs=())

    def test_thread_count_does_not_change_results(self, small_cohort):
        log, split, matrix, lap = small_cohort
        basis = exact_eigs(lap, 20)
        model = fit(basis, KernelSpec("tikhonov"), phi=10.0)
        users = group_events([ev for ev in log if ev.user in split.test_users])
        a = evaluate_filter(model, split.item_index, users, cutoffs=(5, 10))
        b = evaluate_filter(model, split.item_index, users, cutoffs=(5, 10), threads=4)
        assert a.to_dict() == b.to_dict()

    def test_report_serialization(self, model):
        users = {"u": [Interaction("u", "a", 1.0), Interaction("u", "b", 2.0)]}
        d = evaluate_filter(model, ITEM_ROWS, users, cutoffs=(1,)).to_dict()
        assert set(d) == {"cutoffs", "metrics", "counts"}
        assert d["cutoffs"] == [1]
        assert set(d["metrics"]["1"]) == {"hr", "hr_stderr", "ndcg", "ndcg_stderr"}
        assert all(isinstance(v, float) for v in d["metrics"]["1"].values())


class TestEvaluateOnline:
    def test_requires_three_events(self, model):
        users = {"u": [Interaction("u", "a", 1.0), Interaction("u", "b", 2.0)]}
        report = evaluate_online(model, ITEM_ROWS, users, NoiseConfig(), p0=1.0, cutoffs=(1,))
        assert report.counts["skipped"] == 1
        assert report.counts["users"] == 0

    def test_huge_measurement_noise_matches_filter(self, small_cohort):
        log, split, matrix, lap = small_cohort
        basis = exact_eigs(lap, 20)
        model = fit(basis, KernelSpec("tikhonov"), phi=10.0)
        users = {
            u: evs
            for u, evs in group_events([ev for ev in log if ev.user in split.test_users]).items()
            if len(evs) >= 3
        }
        noise = NoiseConfig(sigma_eta=1e-4, sigma_nu=1e6)
        online = evaluate_online(model, split.item_index, users, noise, p0=1e-4, cutoffs=(5, 10))
        batch = evaluate_filter(model, split.item_index, users, cutoffs=(5, 10))
        for c in (5, 10):
            for key in ("hr", "ndcg"):
                assert abs(online.stats[c][key] - batch.stats[c][key]) <= 1e-9

    def test_repeat_purchase_gives_empty_delta(self, model):
        users = {
            "u": [
                Interaction("u", "a", 1.0),
                Interaction("u", "a", 2.0),
                Interaction("u", "b", 3.0),
            ]
        }
        report = evaluate_online(model, ITEM_ROWS, users, NoiseConfig(), p0=1.0, cutoffs=(2,))
        assert report.counts["users"] == 1

    def test_unknown_fed_item_counted(self, model):
        users = {
            "u": [
                Interaction("u", "a", 1.0),
                Interaction("u", "mystery", 2.0),
                Interaction("u", "b", 3.0),
            ]
        }
        report = evaluate_online(model, ITEM_ROWS, users, NoiseConfig(), p0=1.0, cutoffs=(2,))
        assert report.counts["unknown_prefix_items"] == 1
        assert report.counts["users"] == 1

    def test_thread_count_does_not_change_results(self, small_cohort):
        log, split, matrix, lap = small_cohort
        basis = exact_eigs(lap, 20)
        model = fit(basis, KernelSpec("tikhonov"), phi=10.0)
        users = group_events([ev for ev in log if ev.user in split.test_users])
        noise = NoiseConfig()
        a = evaluate_online(model, split.item_index, users, noise, p0=1e-3, cutoffs=(5,))
        b = evaluate_online(model, split.item_index, users, noise, p0=1e-3, cutoffs=(5,), threads=4)
        assert a.to_dict() == b.to_dict()


class TestSpectrumProfile:
    def test_basis_column_concentrates(self, path3_basis):
        prof = spectrum_profile(path3_basis, [path3_basis.vectors[:, 1]])
        assert np.allclose(prof.energy, [0.0, 1.0, 0.0], atol=1e-14)
        assert prof.count == 1
        assert prof.skipped == 0

    def test_energy_sums_to_one(self, small_cohort):
        _, _, _, lap = small_cohort
        basis = exact_eigs(lap, lap.n)
        rng = np.random.default_rng(14)
        signals = [(rng.random(lap.n) < 0.3).astype(float) for _ in range(8)]
        prof = spectrum_profile(basis, signals)
        assert prof.energy.sum() == pytest.approx(1.0, rel=1e-12)
        assert prof.count == 8

    def test_average_of_orthogonal_columns(self, path3_basis):
        prof = spectrum_profile(
            path3_basis, [path3_basis.vectors[:, 0], path3_basis.vectors[:, 2]]
        )
        assert np.allclose(prof.energy, [0.5, 0.0, 0.5], atol=1e-14)

    def test_zero_signals_skipped(self, path3_basis):
        prof = spectrum_profile(path3_basis, [np.zeros(3), path3_basis.vectors[:, 0]])
        assert prof.skipped == 1
        assert prof.count == 1

    def test_all_zero_cohort_rejected(self, path3_basis):
        with pytest.raises(ProtocolError):
            spectrum_profile(path3_basis, [np.zeros(3)])
