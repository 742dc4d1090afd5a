import numpy as np
import pytest

from segguard import errors
from segguard.calibration import ReliabilityBins, bin_predictions, calibration_report, ece, mce


def brute_force_bins(p, gt, B):
    """Independent per-voxel re-binning oracle."""
    counts = np.zeros(B, dtype=int)
    conf_sums = np.zeros(B)
    correct = np.zeros(B, dtype=int)
    for pv, gv in zip(np.ravel(p), np.ravel(gt)):
        pred = pv >= 0.5
        conf = pv if pred else 1.0 - pv
        b = min(int((conf - 0.5) * B / 0.5), B - 1)
        counts[b] += 1
        conf_sums[b] += conf
        correct[b] += int(pred == bool(gv))
    return counts, conf_sums, correct


def test_confident_correct_goes_to_top_bin():
    p = np.ones((3, 3, 3))
    gt = np.ones((3, 3, 3), dtype=np.uint8)
    bins = bin_predictions(p, gt, 10)
    assert bins.counts[-1] == 27
    assert bins.counts[:-1].sum() == 0
    assert bins.correct_counts[-1] == 27


def test_half_confidence_tie_rule():
    p = np.full((2, 2, 2), 0.5)
    gt = np.ones((2, 2, 2), dtype=np.uint8)
    bins = bin_predictions(p, gt, 10)
    assert bins.counts[0] == 8  # conf exactly 0.5 lands in bin 0
    assert bins.correct_counts[0] == 8  # tie predicts foreground


def test_binning_matches_oracle():
    rng = np.random.default_rng(0)
    p = rng.random((6, 5, 4))
    gt = rng.integers(0, 2, (6, 5, 4)).astype(np.uint8)
    bins = bin_predictions(p, gt, 7)
    counts, conf_sums, correct = brute_force_bins(p, gt, 7)
    assert np.array_equal(bins.counts, counts)
    assert np.allclose(bins.confidence_sums, conf_sums)
    assert np.array_equal(bins.correct_counts, correct)


def test_ece_single_bin_hand_case():
    bins = ReliabilityBins(1)
    bins.counts[0] = 10
    bins.confidence_sums[0] = 9.0  # conf 0.9
    bins.correct_counts[0] = 6  # acc 0.6
    assert ece(bins) == pytest.approx(0.3)
    assert mce(bins) == pytest.approx(0.3)


def test_perfect_calibration_zero():
    p = np.ones((4, 4, 4))
    gt = np.ones((4, 4, 4), dtype=np.uint8)
    bins = bin_predictions(p, gt, 10)
    assert ece(bins) == 0.0
    assert mce(bins) == 0.0


def test_mce_dominates_ece():
    rng = np.random.default_rng(1)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        p = rng.random((5, 5, 5))
        gt = rng.integers(0, 2, (5, 5, 5)).astype(np.uint8)
        bins = bin_predictions(p, gt, 10)
        assert 0.0 <= ece(bins) <= mce(bins) <= 1.0


def test_merge_equals_pooled():
    rng = np.random.default_rng(2)
    p1, p2 = rng.random((4, 4, 4)), rng.random((4, 4, 4))
    g1 = rng.integers(0, 2, (4, 4, 4)).astype(np.uint8)
    g2 = rng.integers(0, 2, (4, 4, 4)).astype(np.uint8)
    merged = bin_predictions(p1, g1, 10).merge(bin_predictions(p2, g2, 10))
    pooled = bin_predictions(np.concatenate([p1.ravel(), p2.ravel()]), np.concatenate([g1.ravel(), g2.ravel()]), 10)
    assert np.array_equal(merged.counts, pooled.counts)
    assert np.allclose(merged.confidence_sums, pooled.confidence_sums)
    assert np.array_equal(merged.correct_counts, pooled.correct_counts)


def test_voxel_order_invariance():
    rng = np.random.default_rng(3)
    p = rng.random(200)
    gt = rng.integers(0, 2, 200).astype(np.uint8)
    perm = rng.permutation(200)
    b1 = bin_predictions(p, gt, 10)
    b2 = bin_predictions(p[perm], gt[perm], 10)
    assert ece(b1) == pytest.approx(ece(b2), abs=1e-12)
    assert mce(b1) == pytest.approx(mce(b2), abs=1e-12)


def test_shape_mismatch():
    with pytest.raises(errors.ShapeMismatch):
        bin_predictions(np.zeros((2, 2)), np.zeros((3, 3), dtype=np.uint8), 10)


def test_empty_input():
    with pytest.raises(errors.EmptyInput):
        ece(ReliabilityBins(10))


def test_report_schema():
    rng = np.random.default_rng(4)
    p = rng.random((4, 4, 4))
    gt = rng.integers(0, 2, (4, 4, 4)).astype(np.uint8)
    report = calibration_report(bin_predictions(p, gt, 5))
    assert set(report) == {"ece", "mce", "bins"}
    assert len(report["bins"]) == 5
    assert report["bins"][0]["lo"] == 0.5
    assert report["bins"][-1]["hi"] == 1.0
    assert sum(b["count"] for b in report["bins"]) == 64
