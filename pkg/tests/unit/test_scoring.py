"""Tests fuer Vorhersage-Diagnostiken (domain/scoring.py)."""

import math

import numpy as np
import pytest

from deepwarp.domain.core import InvalidParameterError, PredictiveSummary, RngStream
from deepwarp.domain.scoring import (
    crps_gaussian,
    crps_samples,
    interval_score95,
    mape,
    rmspe,
    score_report,
    threat_curve,
    threat_score,
)


class TestPointErrors:
    """Tests fuer MAPE und RMSPE."""

    def test_perfect_prediction(self):
        truth = np.array([1.0, 2.0, 3.0])
        assert mape(truth, truth) == 0.0
        assert rmspe(truth, truth) == 0.0

    def test_symmetric_errors(self):
        assert mape(np.array([0.0, 0.0]), np.array([1.0, -1.0])) == pytest.approx(1.0)
        assert rmspe(np.array([0.0, 0.0]), np.array([1.0, -1.0])) == pytest.approx(1.0)

    def test_uneven_errors(self):
        assert mape(np.array([0.0, 0.0]), np.array([0.0, 2.0])) == pytest.approx(1.0)
        assert rmspe(np.array([0.0, 0.0]), np.array([0.0, 2.0])) == pytest.approx(math.sqrt(2.0))

    def test_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            mape(np.array([]), np.array([]))

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidParameterError):
            rmspe(np.zeros(2), np.zeros(3))


class TestCrps:
    """Tests fuer CRPS in geschlossener Form und aus Ziehungen."""

    def test_gaussian_at_mean(self):
        expected = 2.0 / math.sqrt(2.0 * math.pi) - 1.0 / math.sqrt(math.pi)
        value = crps_gaussian(np.array([0.0]), np.array([1.0]), np.array([0.0]))
        assert value == pytest.approx(expected)
        assert value == pytest.approx(0.23370, abs=1e-5)

    def test_gaussian_point_forecast(self):
        value = crps_gaussian(np.array([1.0, 2.0]), np.array([0.0, 0.0]), np.array([1.0, 0.5]))
        assert value == pytest.approx(0.75)

    def test_gaussian_scales_with_sd(self):
        one = crps_gaussian(np.array([0.0]), np.array([1.0]), np.array([0.7]))
        three = crps_gaussian(np.array([0.0]), np.array([3.0]), np.array([2.1]))
        assert three == pytest.approx(3.0 * one)

    def test_negative_sd_rejected(self):
        with pytest.raises(InvalidParameterError):
            crps_gaussian(np.zeros(1), np.array([-1.0]), np.zeros(1))

    def test_samples_all_equal_truth(self):
        assert crps_samples(np.full((2, 5), 3.0), np.array([3.0, 3.0])) == pytest.approx(0.0)

    def test_samples_enumeration(self):
        assert crps_samples(np.array([[0.0, 2.0]]), np.array([1.0])) == pytest.approx(0.5)

    def test_samples_approach_gaussian(self):
        samples = RngStream(0).normal((1, 20000))
        expected = crps_gaussian(np.array([0.0]), np.array([1.0]), np.array([0.4]))
        assert crps_samples(samples, np.array([0.4])) == pytest.approx(expected, abs=0.01)

    def test_single_draw_rejected(self):
        with pytest.raises(InvalidParameterError):
            crps_samples(np.zeros((3, 1)), np.zeros(3))

    @pytest.mark.parametrize(("mean", "sd"), [(0.5, 1.0), (0.0, 0.5), (0.0, 2.0), (-0.3, 1.3)])
    def test_expected_score_minimal_at_truth(self, mean, sd):
        truth = RngStream(21).normal(20_000)
        n = truth.shape[0]
        correct = crps_gaussian(np.zeros(n), np.ones(n), truth)
        wrong = crps_gaussian(np.full(n, mean), np.full(n, sd), truth)
        assert correct < wrong

    def test_samples_invariant_to_draw_order(self):
        rng = RngStream(22)
        samples = rng.normal((3, 50))
        truth = rng.normal(3)
        shuffled = samples[:, rng.permutation(50)]
        assert crps_samples(shuffled, truth) == pytest.approx(crps_samples(samples, truth))


class TestIntervalScore:
    """Tests fuer den Intervall-Score."""

    def test_covered(self):
        value = interval_score95(np.array([-1.96]), np.array([1.96]), np.array([0.0]))
        assert value == pytest.approx(3.92)

    def test_above_interval(self):
        value = interval_score95(np.array([-1.96]), np.array([1.96]), np.array([2.96]))
        assert value == pytest.approx(43.92)

    def test_below_interval(self):
        value = interval_score95(np.array([0.0]), np.array([1.0]), np.array([-0.5]))
        assert value == pytest.approx(1.0 + 40.0 * 0.5)

    def test_inverted_interval_rejected(self):
        with pytest.raises(InvalidParameterError):
            interval_score95(np.array([1.0]), np.array([0.0]), np.array([0.5]))


class TestThreatScore:
    """Tests fuer Threat Score und Schwellwertkurve."""

    def test_perfect_agreement(self):
        field = np.array([1.0, 5.0, 2.0, 9.0])
        assert threat_score(field, field, 3.0, 3.0) == pytest.approx(1.0)

    def test_no_overlap(self):
        pred = np.array([1.0, 9.0])
        true = np.array([9.0, 1.0])
        assert threat_score(pred, true, 3.0, 3.0) == 0.0

    def test_counting(self):
        # TP an 0 und 1, FP an 2, FN an 3, TN an 4
        pred = np.array([0.0, 0.0, 0.0, 5.0, 5.0])
        true = np.array([0.0, 0.0, 5.0, 0.0, 5.0])
        assert threat_score(pred, true, 1.0, 1.0) == pytest.approx(0.5)

    def test_no_positives_anywhere(self):
        assert threat_score(np.ones(3), np.ones(3), 0.0, 0.0) == 0.0

    def test_curve(self):
        pred = np.array([0.0, 1.0, 2.0])
        true = np.array([0.0, 1.0, 2.0])
        curve = threat_curve(pred, true, np.array([0.5, 1.5]), 1.5)
        assert curve == [(0.5, pytest.approx(0.5)), (1.5, pytest.approx(1.0))]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidParameterError):
            threat_score(np.zeros(2), np.zeros(3), 0.0, 0.0)


class TestScoreReport:
    """Tests fuer den zusammengefassten Bericht."""

    def test_gaussian_summary(self):
        summary = PredictiveSummary.from_moments(np.zeros(2), np.ones(2))
        report = score_report(np.zeros(2), summary)
        assert report.n == 2
        assert report.mape == 0.0
        assert report.crps == pytest.approx(0.23370, abs=1e-5)
        assert report.is95 == pytest.approx(2.0 * 1.959964)

    def test_sample_summary_uses_draws(self):
        samples = np.array([[0.0, 2.0]])
        summary = PredictiveSummary.from_samples(samples)
        report = score_report(np.array([1.0]), summary)
        assert report.crps == pytest.approx(0.5)
