"""Spectral signatures of feature maps and nearest-neighbor OOD scoring.

A feature map of shape (w, h, d, n) is reshaped to a (w*h*d, n) matrix;
its singular values form the spectrum. The signature is the log-spectrum
scaled to unit l2 norm. A bank of training signatures plus a threshold
tau = mean + C*std of the leave-one-out nearest-neighbor distances turns
the distance-to-bank score into an in/out-of-distribution verdict.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from segguard.errors import (
    DegenerateSpectrum,
    InconsistentChannels,
    InsufficientData,
    IoFailure,
    LengthMismatch,
    MalformedFile,
    NumericalFailure,
    ValidationError,
)
from segguard.tensor_core import check_feature_map

BANK_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BankConfig:
    c_multiplier: float = 2.5
    epsilon_floor: float = 1e-12  # relative to the largest singular value

    def __post_init__(self):
        if self.c_multiplier < 0:
            raise ValidationError("c_multiplier must be >= 0")
        if self.epsilon_floor <= 0:
            raise ValidationError("epsilon_floor must be > 0")


@dataclass(frozen=True)
class SpectralSignature:
    values: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        norm = float(np.linalg.norm(vals))
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"signature norm {norm} is not 1")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class OODVerdict:
    oodm: float
    tau: float
    is_ood: bool
    nearest_neighbor_id: str


@dataclass(frozen=True)
class SignatureBank:
    signatures: np.ndarray  # (k, m), unit-norm rows
    oodm_train: np.ndarray  # (k,) leave-one-out distances
    tau: float
    config: BankConfig
    dataset_labels: tuple
    layer_id: str = ""

    @property
    def signature_length(self) -> int:
        return int(self.signatures.shape[1])

    def __post_init__(self):
        sigs = np.asarray(self.signatures, dtype=np.float64)
        if sigs.ndim != 2 or sigs.shape[0] < 2:
            raise InsufficientData("bank needs at least 2 signatures")
        norms = np.linalg.norm(sigs, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValidationError("bank rows must have unit l2 norm")
        object.__setattr__(self, "signatures", sigs)
        object.__setattr__(self, "oodm_train", np.asarray(self.oodm_train, dtype=np.float64))
        object.__setattr__(self, "dataset_labels", tuple(self.dataset_labels))


def compute_spectrum(f: np.ndarray) -> np.ndarray:
    """Singular values (descending) of the (w*h*d, n) reshaped feature map."""
    f = check_feature_map(f)
    mat = np.asarray(f, dtype=np.float64).reshape(-1, f.shape[-1])
    try:
        s = np.linalg.svd(mat, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return s


def signature_from_spectrum(s: np.ndarray, cfg: BankConfig = BankConfig(), source_id: str = "") -> SpectralSignature:
    """Unit-norm log-spectrum, flooring tiny singular values at eps * s_max."""
    s = np.asarray(s, dtype=np.float64)
    s_max = s[0] if s.size else 0.0
    if s_max <= 0.0:
        raise DegenerateSpectrum(f"{source_id or 'feature map'}: all singular values are zero")
    logs = np.log(np.maximum(s, cfg.epsilon_floor * s_max))
    norm = float(np.linalg.norm(logs))
    if norm < 1e-12:
        raise DegenerateSpectrum(
            f"{source_id or 'feature map'}: log-spectrum is (numerically) zero and cannot be normalized"
        )
    return SpectralSignature(logs / norm, source_id=source_id)


def signature_from_feature_map(f: np.ndarray, cfg: BankConfig = BankConfig(), source_id: str = "") -> SpectralSignature:
    return signature_from_spectrum(compute_spectrum(f), cfg, source_id=source_id)


def oodm(test_sig: SpectralSignature, bank: SignatureBank) -> tuple:
    """Distance to the nearest bank signature; ties go to the lowest index."""
    if len(test_sig) != bank.signature_length:
        raise LengthMismatch(
            f"signature length {len(test_sig)} != bank signature length {bank.signature_length}"
        )
    dists = np.linalg.norm(bank.signatures - test_sig.values, axis=1)
    idx = int(np.argmin(dists))
    return float(dists[idx]), bank.dataset_labels[idx]


def threshold_tau(oodm_train, c: float) -> float:
    """mean + c * std over the training scores, sample-std (ddof=1) convention."""
    vals = np.asarray(oodm_train, dtype=np.float64)
    if vals.size < 2:
        raise InsufficientData("threshold needs at least 2 training scores")
    return float(vals.mean() + c * vals.std(ddof=1))


def bank_build(feature_maps, labels, cfg: BankConfig = BankConfig(), layer_id: str = "") -> SignatureBank:
    """Signatures for every training map plus the leave-one-out threshold."""
    feature_maps = list(feature_maps)
    labels = [str(l) for l in labels]
    if len(labels) != len(feature_maps):
        raise ValidationError("one label per feature map required")
    if len(set(labels)) != len(labels):
        raise ValidationError("labels must be unique")
    if len(feature_maps) < 2:
        raise InsufficientData("bank needs at least 2 feature maps")
    channels = {np.asarray(f).shape[-1] for f in map(check_feature_map, feature_maps)}
    if len(channels) != 1:
        raise InconsistentChannels(f"feature maps disagree on channel count: {sorted(channels)}")

    sigs = np.stack(
        [signature_from_feature_map(f, cfg, source_id=lab).values for f, lab in zip(feature_maps, labels)]
    )
    oodm_train = loo_nearest_distances(sigs)
    tau = threshold_tau(oodm_train, cfg.c_multiplier)
    return SignatureBank(
        signatures=sigs,
        oodm_train=oodm_train,
        tau=tau,
        config=cfg,
        dataset_labels=tuple(labels),
        layer_id=layer_id,
    )


def loo_nearest_distances(sigs: np.ndarray) -> np.ndarray:
    """Per row, the distance to its nearest other row (leave-one-out)."""
    diff = sigs[:, None, :] - sigs[None, :, :]
    dists = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dists, np.inf)
    return dists.min(axis=1)


def classify(test_sig: SpectralSignature, bank: SignatureBank) -> OODVerdict:
    """OOD iff the distance strictly exceeds tau."""
    dist, nearest = oodm(test_sig, bank)
    return OODVerdict(oodm=dist, tau=bank.tau, is_ood=dist > bank.tau, nearest_neighbor_id=nearest)


def save_bank(bank: SignatureBank, path) -> None:
    doc = {
        "version": BANK_FORMAT_VERSION,
        "layer_id": bank.layer_id,
        "config": {"c_multiplier": bank.config.c_multiplier, "epsilon_floor": bank.config.epsilon_floor},
        "signature_length": bank.signature_length,
        "labels": list(bank.dataset_labels),
        "signatures": [[float(x) for x in row] for row in bank.signatures],
        "oodm_train": [float(x) for x in bank.oodm_train],
        "tau": bank.tau,
        "std_convention": "sample",
    }
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_bank(path) -> SignatureBank:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: not valid JSON") from exc
    try:
        if doc["version"] != BANK_FORMAT_VERSION:
            raise MalformedFile(f"{path}: unsupported bank version {doc['version']}")
        cfg = BankConfig(c_multiplier=doc["config"]["c_multiplier"], epsilon_floor=doc["config"]["epsilon_floor"])
        bank = SignatureBank(
            signatures=np.asarray(doc["signatures"], dtype=np.float64),
            oodm_train=np.asarray(doc["oodm_train"], dtype=np.float64),
            tau=float(doc["tau"]),
            config=cfg,
            dataset_labels=tuple(doc["labels"]),
            layer_id=doc.get("layer_id", ""),
        )
    except (KeyError, TypeError) as exc:
        raise MalformedFile(f"{path}: missing bank field {exc}") from exc
    if bank.signature_length != int(doc["signature_length"]):
        raise MalformedFile(f"{path}: signature_length disagrees with signature rows")
    return bank
