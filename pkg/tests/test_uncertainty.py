import numpy as np
import pytest

from segguard import errors
from segguard.uncertainty import (
    classify_uncertainty,
    entropy_map,
    image_uncertainty,
    mean_prob_map,
    uncertainty_threshold,
)

H_HALF = -0.5 * np.log(0.5)  # 0.34657...


def test_mean_single_member_identity():
    rng = np.random.default_rng(0)
    p = rng.random((4, 4, 4))
    assert np.array_equal(mean_prob_map([p]), p)


def test_mean_symmetry():
    zeros = np.zeros((3, 3, 3))
    ones = np.ones((3, 3, 3))
    assert np.allclose(mean_prob_map([zeros, ones]), 0.5)


def test_mean_matches_per_voxel_oracle():
    rng = np.random.default_rng(1)
    maps = [rng.random((3, 4, 5)) for _ in range(10)]
    mean = mean_prob_map(maps)
    oracle = sum(maps) / 10.0
    assert np.abs(mean - oracle).max() < 1e-15


def test_mean_permutation_invariant():
    rng = np.random.default_rng(2)
    maps = [rng.random((3, 3, 3)) for _ in range(5)]
    assert np.allclose(mean_prob_map(maps), mean_prob_map(maps[::-1]), atol=1e-15)


def test_mean_shape_mismatch():
    with pytest.raises(errors.ShapeMismatch):
        mean_prob_map([np.zeros((2, 2, 2)), np.zeros((3, 3, 3))])


@pytest.mark.parametrize("p,expected", [(0.0, 0.0), (1.0, 0.0), (0.5, H_HALF)])
def test_entropy_values(p, expected):
    out = entropy_map(np.full((2, 2, 2), p))
    assert np.allclose(out, expected)


def test_entropy_bounded_by_inverse_e():
    p = np.linspace(0, 1, 1001).reshape(7, 11, 13)
    out = entropy_map(p)
    assert out.min() >= 0.0
    assert out.max() <= 1.0 / np.e + 1e-12


def test_image_uncertainty_confident_foreground():
    score = image_uncertainty(np.ones((3, 3, 3)))
    assert score.value == 0.0
    assert not score.empty_foreground


def test_image_uncertainty_empty_foreground():
    score = image_uncertainty(np.zeros((3, 3, 3)))
    assert score.value == 0.0
    assert score.empty_foreground


def test_image_uncertainty_foreground_mean():
    p = np.zeros((2, 2, 2))
    p[0] = 0.5  # half the voxels at the decision boundary -> foreground by tie rule
    score = image_uncertainty(p)
    assert score.value == pytest.approx(H_HALF)


def test_image_uncertainty_background_values_irrelevant():
    rng = np.random.default_rng(3)
    p = rng.random((4, 4, 4))
    q = p.copy()
    bg = p < 0.5
    q[bg] = rng.random(bg.sum()) * 0.499  # stay below 0.5
    assert image_uncertainty(q).value == image_uncertainty(p).value


def test_uncertainty_threshold_shared_contract():
    assert uncertainty_threshold([0.1, 0.2, 0.3], 2.5) == pytest.approx(0.45, abs=1e-15)
    assert uncertainty_threshold([0.3, 0.3], 2.5) == pytest.approx(0.3)
    assert uncertainty_threshold([0.1, 0.2, 0.3], 0.0) == pytest.approx(0.2)


def test_classify_uncertainty_boundary():
    assert not classify_uncertainty(0.45, 0.45).is_ood
    assert not classify_uncertainty(0.0, 0.1).is_ood
    assert classify_uncertainty(0.46, 0.45).is_ood
