"""Multi-dataset sampling probabilities and sliding-window tiling plans.

Each image carries weight 1/sqrt(n) where n is its dataset's size, so a
dataset's selection probability is sqrt(n) / sum(sqrt(n_j)). For two
datasets of 10 and 100 images this gives 0.24 / 0.76.

Tiling covers a volume with fixed-size blocks at stride (block -
overlap); the last block per axis is clamped flush with the border.
Overlapping predictions are combined by unweighted voxel-wise averaging.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from segguard.errors import (
    BlockTooLarge,
    EmptyCatalog,
    InvalidOverlap,
    PlanMismatch,
    ValidationError,
)


@dataclass(frozen=True)
class DatasetCatalog:
    entries: tuple  # of (name, n_images)

    def __post_init__(self):
        entries = tuple((str(n), int(c)) for n, c in self.entries)
        names = [n for n, _ in entries]
        if len(set(names)) != len(names):
            raise ValidationError("dataset names must be unique")
        if any(c < 1 for _, c in entries):
            raise ValidationError("dataset sizes must be >= 1")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class SamplingPlan:
    names: tuple
    sizes: tuple
    probabilities: np.ndarray  # per dataset, sums to 1
    per_image_weights: np.ndarray  # 1/sqrt(n) per dataset


@dataclass(frozen=True)
class TilingPlan:
    block_size: tuple
    overlap: int
    origins: tuple  # of (x, y, z), lexicographically sorted
    volume_shape: tuple


def sampling_plan(catalog: DatasetCatalog) -> SamplingPlan:
    """Per-image weight 1/sqrt(n); dataset probability sqrt(n)/sum(sqrt(n_j))."""
    if not catalog.entries:
        raise EmptyCatalog("catalog has no datasets")
    sizes = np.array([c for _, c in catalog.entries], dtype=np.float64)
    weights = 1.0 / np.sqrt(sizes)
    probs = sizes * weights
    probs /= probs.sum()
    return SamplingPlan(
        names=tuple(n for n, _ in catalog.entries),
        sizes=tuple(int(c) for _, c in catalog.entries),
        probabilities=probs,
        per_image_weights=weights,
    )


def sample_dataset(plan: SamplingPlan, seed: int, draws: int) -> list:
    """Reproducible dataset draws; stream is numpy PCG64 seeded with `seed`."""
    if draws < 0:
        raise ValidationError("draws must be >= 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.choice(len(plan.names), size=draws, p=plan.probabilities)
    return [plan.names[i] for i in idx]


def tiling_origins(volume_shape, block, overlap: int) -> TilingPlan:
    """Block origins covering the volume with the requested overlap."""
    volume_shape = tuple(int(x) for x in volume_shape)
    block = tuple(int(x) for x in block)
    if len(volume_shape) != 3 or len(block) != 3:
        raise ValidationError("volume_shape and block must be integer triples")
    if any(b > e for b, e in zip(block, volume_shape)):
        raise BlockTooLarge(f"block {block} exceeds volume {volume_shape}")
    if not 0 <= overlap < min(block):
        raise InvalidOverlap(f"overlap {overlap} must satisfy 0 <= overlap < min(block)")

    per_axis = []
    for extent, b in zip(volume_shape, block):
        stride = b - overlap
        origins = list(range(0, extent - b + 1, stride))
        last = extent - b
        if origins[-1] != last:
            origins.append(last)
        per_axis.append(origins)
    return TilingPlan(
        block_size=block,
        overlap=int(overlap),
        origins=tuple(product(*per_axis)),
        volume_shape=volume_shape,
    )


def assemble_blocks(blocks, plan: TilingPlan) -> np.ndarray:
    """Voxel-wise mean of all covering blocks, per the plan's origins."""
    blocks = list(blocks)
    if sorted(origin for origin, _ in blocks) != sorted(plan.origins):
        raise PlanMismatch("block origins do not match the tiling plan")
    acc = np.zeros(plan.volume_shape, dtype=np.float64)
    cover = np.zeros(plan.volume_shape, dtype=np.int64)
    for origin, data in blocks:
        data = np.asarray(data, dtype=np.float64)
        if data.shape != plan.block_size:
            raise PlanMismatch(f"block at {origin} has shape {data.shape}, expected {plan.block_size}")
        sl = tuple(slice(o, o + b) for o, b in zip(origin, plan.block_size))
        acc[sl] += data
        cover[sl] += 1
    return acc / cover


def coverage_counts(plan: TilingPlan) -> np.ndarray:
    """How many blocks cover each voxel (>= 1 everywhere for a valid plan)."""
    cover = np.zeros(plan.volume_shape, dtype=np.int64)
    for origin in plan.origins:
        sl = tuple(slice(o, o + b) for o, b in zip(origin, plan.block_size))
        cover[sl] += 1
    return cover
