"""Binned confidence calibration (ECE / MCE) for binary voxel predictions.

Confidence is taken for the predicted class, max(p, 1-p), so it lives in
[0.5, 1]; that interval is split into B equal-width bins. Bins are plain
mergeable counters, so per-image binning followed by a merge equals
binning the pooled voxels.
"""

from dataclasses import dataclass, field

import numpy as np

from segguard.errors import EmptyInput, ShapeMismatch, ValidationError
from segguard.tensor_core import check_binary_mask, check_prob_map


@dataclass
class ReliabilityBins:
    bin_count: int
    counts: np.ndarray = None
    confidence_sums: np.ndarray = None
    correct_counts: np.ndarray = None

    def __post_init__(self):
        if self.bin_count < 1:
            raise ValidationError("bin_count must be >= 1")
        if self.counts is None:
            self.counts = np.zeros(self.bin_count, dtype=np.int64)
            self.confidence_sums = np.zeros(self.bin_count, dtype=np.float64)
            self.correct_counts = np.zeros(self.bin_count, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def edges(self):
        return np.linspace(0.5, 1.0, self.bin_count + 1)

    def merge(self, other: "ReliabilityBins") -> "ReliabilityBins":
        if other.bin_count != self.bin_count:
            raise ValidationError("cannot merge bins with different bin counts")
        return ReliabilityBins(
            self.bin_count,
            self.counts + other.counts,
            self.confidence_sums + other.confidence_sums,
            self.correct_counts + other.correct_counts,
        )

    def to_report(self) -> list:
        edges = self.edges()
        rows = []
        for b in range(self.bin_count):
            count = int(self.counts[b])
            rows.append(
                {
                    "lo": float(edges[b]),
                    "hi": float(edges[b + 1]),
                    "count": count,
                    "conf": float(self.confidence_sums[b] / count) if count else None,
                    "acc": float(self.correct_counts[b] / count) if count else None,
                }
            )
        return rows


def bin_predictions(p: np.ndarray, gt: np.ndarray, bin_count: int = 10, mask: np.ndarray = None) -> ReliabilityBins:
    """Assign every voxel to a confidence bin and tally correctness.

    Predicted label is p >= 0.5 (ties to foreground); a voxel is correct
    when that label matches gt. The optional mask restricts the voxel
    population.
    """
    p = np.asarray(check_prob_map(p), dtype=np.float64)
    gt = check_binary_mask(gt)
    if p.shape != gt.shape:
        raise ShapeMismatch(f"prob map {p.shape} vs ground truth {gt.shape}")
    if mask is not None:
        mask = check_binary_mask(mask)
        if mask.shape != p.shape:
            raise ShapeMismatch(f"mask {mask.shape} vs prob map {p.shape}")
        p, gt = p[mask], gt[mask]
    else:
        p, gt = p.ravel(), gt.ravel()

    pred = p >= 0.5
    conf = np.where(pred, p, 1.0 - p)
    idx = np.floor((conf - 0.5) * (bin_count / 0.5)).astype(np.int64)
    np.clip(idx, 0, bin_count - 1, out=idx)
    correct = pred == gt

    bins = ReliabilityBins(bin_count)
    np.add.at(bins.counts, idx, 1)
    np.add.at(bins.confidence_sums, idx, conf)
    np.add.at(bins.correct_counts, idx, correct.astype(np.int64))
    return bins


def _gaps(bins: ReliabilityBins) -> np.ndarray:
    if bins.total == 0:
        raise EmptyInput("no voxels were binned")
    nonempty = bins.counts > 0
    acc = bins.correct_counts[nonempty] / bins.counts[nonempty]
    conf = bins.confidence_sums[nonempty] / bins.counts[nonempty]
    return np.abs(acc - conf), bins.counts[nonempty]


def ece(bins: ReliabilityBins) -> float:
    """Count-weighted mean |accuracy - confidence| over non-empty bins."""
    gaps, counts = _gaps(bins)
    return float((counts / bins.total * gaps).sum())


def mce(bins: ReliabilityBins) -> float:
    """Largest |accuracy - confidence| over non-empty bins."""
    gaps, _ = _gaps(bins)
    return float(gaps.max())


def calibration_report(bins: ReliabilityBins) -> dict:
    return {"ece": ece(bins), "mce": mce(bins), "bins": bins.to_report()}
