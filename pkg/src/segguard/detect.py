"""Detection-quality evaluation: confusion rates at a fixed threshold and ROC/AUC.

The positive class is OOD. Predictions follow the strict score > tau
rule used by the classifiers, so ties at the threshold count negative.
"""

from dataclasses import dataclass

import numpy as np

from segguard.errors import DegenerateLabels, EmptyInput, ValidationError


@dataclass(frozen=True)
class LabeledScores:
    scores: np.ndarray
    labels: np.ndarray  # True = OOD

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=bool)
        if scores.shape != labels.shape or scores.ndim != 1:
            raise ValidationError("scores and labels must be equal-length vectors")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return int(self.scores.shape[0])


@dataclass(frozen=True)
class DetectionReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    sensitivity: float | None
    specificity: float | None
    tau_used: float
    auc: float | None = None

    def to_row(self, method: str) -> dict:
        return {
            "method": method,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "auc": self.auc,
        }


def confusion_at(data: LabeledScores, tau: float) -> DetectionReport:
    """Confusion counts and rates with prediction = (score > tau)."""
    if len(data) == 0:
        raise EmptyInput("no scores to evaluate")
    pred = data.scores > tau
    tp = int(np.sum(pred & data.labels))
    fp = int(np.sum(pred & ~data.labels))
    tn = int(np.sum(~pred & ~data.labels))
    fn = int(np.sum(~pred & data.labels))
    return DetectionReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / len(data),
        sensitivity=tp / (tp + fn) if (tp + fn) else None,
        specificity=tn / (tn + fp) if (tn + fp) else None,
        tau_used=float(tau),
    )


def roc_curve(data: LabeledScores):
    """(fpr, tpr) polyline from a sweep over all distinct score thresholds."""
    n_pos = int(data.labels.sum())
    n_neg = len(data) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("AUC needs at least one positive and one negative")
    order = np.argsort(-data.scores, kind="mergesort")
    scores = data.scores[order]
    labels = data.labels[order]
    # indices where a run of tied scores ends
    distinct = np.nonzero(np.diff(scores))[0]
    ends = np.r_[distinct, len(scores) - 1]
    tps = np.cumsum(labels)[ends]
    fps = np.cumsum(~labels)[ends]
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    return fpr, tpr


def roc_auc(data: LabeledScores) -> float:
    """Trapezoidal area under the ROC; equals the Mann-Whitney statistic."""
    fpr, tpr = roc_curve(data)
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(tpr, fpr))


def evaluate(data: LabeledScores, tau: float) -> DetectionReport:
    """Confusion rates at tau plus AUC from the full sweep."""
    base = confusion_at(data, tau)
    return DetectionReport(**{**base.__dict__, "auc": roc_auc(data)})
