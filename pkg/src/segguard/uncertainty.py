"""MC-dropout style entropy baseline for OOD detection.

Consumes already-sampled probability maps (the dropout forward passes
themselves happen in whatever framework trained the model), averages
them, and turns foreground entropy into an image-level score.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from segguard.errors import EmptyInput, ShapeMismatch
from segguard.spectral import threshold_tau as uncertainty_threshold  # noqa: F401  (same mean+c*std contract)
from segguard.tensor_core import check_prob_map


@dataclass(frozen=True)
class UncertaintyScore:
    value: float
    threshold: float
    is_ood: bool


class ImageUncertainty(NamedTuple):
    value: float
    empty_foreground: bool


def mean_prob_map(maps) -> np.ndarray:
    """Voxel-wise arithmetic mean of an ensemble of probability maps."""
    maps = [check_prob_map(m) for m in maps]
    if not maps:
        raise EmptyInput("ensemble is empty")
    shape = maps[0].shape
    if any(m.shape != shape for m in maps):
        raise ShapeMismatch("ensemble members disagree on shape")
    stacked = np.stack([np.asarray(m, dtype=np.float64) for m in maps])
    return stacked.mean(axis=0)


def entropy_map(p: np.ndarray) -> np.ndarray:
    """Voxel-wise -p*ln(p), with 0*ln(0) taken as 0."""
    p = np.asarray(check_prob_map(p), dtype=np.float64)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = -p[pos] * np.log(p[pos])
    return out


def image_uncertainty(p_mean: np.ndarray) -> ImageUncertainty:
    """Mean entropy over the predicted foreground (p >= 0.5).

    An empty foreground yields score 0 with the flag set, so reports can
    distinguish "confidently empty" from "confident foreground".
    """
    p_mean = np.asarray(check_prob_map(p_mean), dtype=np.float64)
    fg = p_mean >= 0.5
    if not fg.any():
        return ImageUncertainty(0.0, True)
    return ImageUncertainty(float(entropy_map(p_mean)[fg].mean()), False)


def classify_uncertainty(score: float, threshold: float) -> UncertaintyScore:
    """OOD iff the score strictly exceeds the threshold."""
    return UncertaintyScore(value=float(score), threshold=float(threshold), is_ood=score > threshold)
