"""AUROC pair counting and evaluation reports."""

import numpy as np
import pytest

from railgate.evaluate import EvalReport, auroc, fpr_at, tpr_at


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.9, 0.8, 0.7], [0.1, 0.2, 0.3]) == 1.0

    def test_identical_multisets_half(self):
        scores = [0.1, 0.5, 0.5, 0.9]
        assert auroc(scores, scores) == 0.5

    def test_pair_counting_oracle(self):
        # pairs: (0.9 > 0.5) = 1, (0.4 > 0.5) = 0 -> 1/2
        assert auroc([0.9, 0.4], [0.5]) == 0.5

    def test_ties_count_half(self):
        assert auroc([0.5], [0.5]) == 0.5
        assert auroc([0.5, 1.0], [0.5]) == 0.75

    def test_inverted_scores_give_zero(self):
        assert auroc([0.1], [0.9]) == 0.0

    def test_matches_brute_force_on_random_sets(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            pos = rng.integers(0, 5, size=rng.integers(1, 30)).astype(float)
            neg = rng.integers(0, 5, size=rng.integers(1, 30)).astype(float)
            brute = np.mean(
                [1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg]
            )
            assert auroc(pos, neg) == pytest.approx(brute, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            auroc([], [1.0])


class TestRates:
    def test_tpr_fpr_closed_threshold(self):
        pos = np.array([0.4, 0.6, 0.6, 0.9])
        neg = np.array([0.1, 0.6])
        assert tpr_at(pos, 0.6) == 0.75
        assert fpr_at(neg, 0.6) == 0.5


class TestEvalReport:
    def test_round_trip_dict(self):
        r = EvalReport(
            detector="msp", auroc=0.99, threshold=0.7, tpr_at_threshold=0.95,
            fpr_at_threshold=0.02, n_pos=100, n_neg=50,
        )
        d = r.to_dict()
        assert d["detector"] == "msp" and d["n_pos"] == 100

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            EvalReport(
                detector="msp", auroc=1.2, threshold=0.0, tpr_at_threshold=0.5,
                fpr_at_threshold=0.5, n_pos=1, n_neg=1,
            )
