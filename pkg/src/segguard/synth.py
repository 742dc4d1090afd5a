"""Deterministic synthetic volumes and a fixed random-weight feature extractor.

The two volume families (smooth Gaussian blobs vs high-frequency
checkerboard texture) stand in for in-distribution and OOD cohorts. The
extractor is a stack of seeded random 3x3x3 stride-2 convolutions with
ReLU; it is not a trained model, it only has to preserve the
distributional differences so the OOD pipeline can be exercised
end-to-end.

All randomness flows through numpy's PCG64 seeded from the documented
(stream, seed) pairs, so outputs are bit-reproducible across platforms.
"""

from dataclasses import dataclass

import numpy as np

from segguard.errors import ValidationError, ShapeTooSmall
from segguard.tensor_core import Tensor, check_binary_mask

FAMILIES = ("smooth-blobs", "hi-freq-texture")
_FAMILY_CODE = {"smooth-blobs": 0, "hi-freq-texture": 1}


@dataclass(frozen=True)
class ExtractorSpec:
    stage_count: int = 4
    channels: tuple = (4, 8, 12, 14)
    seed: int = 0

    def __post_init__(self):
        if self.stage_count < 1 or len(self.channels) != self.stage_count:
            raise ValidationError("channels must list one entry per stage")
        if self.channels[-1] < 2:
            raise ValidationError("final channel count must be >= 2")


def _rng(*stream) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(stream))))


def gen_volume(family: str, shape, seed: int, spacing=(1.0, 1.0, 1.0)) -> Tensor:
    """Deterministic synthetic volume in [0, 1] for the given family and seed."""
    if family not in _FAMILY_CODE:
        raise ValidationError(f"unknown family {family!r}; expected one of {FAMILIES}")
    shape = tuple(int(x) for x in shape)
    if len(shape) != 3 or min(shape) < 16:
        raise ShapeTooSmall("volume must be 3-d with every axis >= 16 voxels")
    rng = _rng(_FAMILY_CODE[family], seed)
    grids = np.meshgrid(*(np.arange(n, dtype=np.float64) for n in shape), indexing="ij", sparse=True)

    if family == "smooth-blobs":
        vol = np.zeros(shape, dtype=np.float64)
        n_bumps = int(rng.integers(6, 13))
        for _ in range(n_bumps):
            center = rng.uniform(0.0, 1.0, size=3) * np.array(shape)
            sigma = rng.uniform(0.08, 0.2) * min(shape)
            amp = rng.uniform(0.5, 1.0)
            sq = sum((g - c) ** 2 for g, c in zip(grids, center))
            vol += amp * np.exp(-sq / (2.0 * sigma * sigma))
    else:
        period = int(rng.integers(2, 5))
        phase = rng.integers(0, period, size=3)
        vol = sum((g.astype(np.int64) + ph) // period for g, ph in zip(grids, phase)) % 2
        vol = vol.astype(np.float64) + 0.3 * rng.random(shape)

    lo, hi = vol.min(), vol.max()
    vol = (vol - lo) / (hi - lo) if hi > lo else np.zeros(shape)
    return Tensor(vol, spacing=spacing)


def _stage_weights(spec: ExtractorSpec, stage: int, c_in: int) -> np.ndarray:
    rng = _rng(spec.seed, stage)
    a = 1.0 / np.sqrt(27.0 * c_in)
    return rng.uniform(-a, a, size=(3, 3, 3, c_in, spec.channels[stage]))


def extract_features(v, spec: ExtractorSpec = ExtractorSpec()) -> np.ndarray:
    """Feature map (w, h, d, n) from stacked stride-2 convolutions.

    Each stage zero-pads one voxel at the leading edge per axis, so the
    spatial extent halves exactly: out = floor(in / 2) per stage.
    """
    arr = v.data if isinstance(v, Tensor) else np.asarray(v)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3:
        raise ValidationError("input volume must be 3-d")
    if min(arr.shape) < 2**spec.stage_count:
        raise ShapeTooSmall(
            f"volume {arr.shape} too small for {spec.stage_count} stride-2 stages"
        )
    x = arr[..., None]
    for stage in range(spec.stage_count):
        w = _stage_weights(spec, stage, x.shape[-1])
        padded = np.pad(x, ((1, 0), (1, 0), (1, 0), (0, 0)))
        windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3, 3), axis=(0, 1, 2))
        windows = windows[::2, ::2, ::2]  # stride 2
        x = np.einsum("xyzcijk,ijkco->xyzo", windows, w, optimize=True)
        np.maximum(x, 0.0, out=x)
    return x


def gen_calibrated_predictor(gt: np.ndarray, target_ece: float, seed: int) -> np.ndarray:
    """Probability map whose pooled calibration error is ~target_ece.

    Per voxel: draw confidence c uniform on (0.5, 1), make the predicted
    label agree with gt with probability c - target_ece, and emit p = c
    for predicted foreground, 1 - c otherwise. Each bin's accuracy then
    sits target_ece below its confidence.
    """
    gt = check_binary_mask(gt)
    if not 0.0 <= target_ece <= 0.4:
        raise ValidationError("target_ece must be in [0, 0.4]")
    rng = _rng(2, seed)
    c = rng.uniform(0.5, 1.0, size=gt.shape)
    np.maximum(c, np.nextafter(0.5, 1.0), out=c)
    correct = rng.random(gt.shape) < (c - target_ece)
    pred = np.where(correct, gt, ~gt)
    return np.where(pred, c, 1.0 - c)
