from __future__ import annotations

import math

import numpy as np
import pytest

from roadstereo.costs import CostVolume
from roadstereo.costs import NccParams
from roadstereo.costs import compute_block_stats
from roadstereo.costs import compute_cost_volumes
from roadstereo.errors import DimensionError
from roadstereo.errors import ParameterError
from roadstereo.image import GrayImage
from testing import oracles


def _random_pair(seed, width, height):
    rng = np.random.default_rng(seed)
    left = rng.integers(0, 256, size=(height, width))
    right = rng.integers(0, 256, size=(height, width))
    return GrayImage.from_array(left), GrayImage.from_array(right)


def test_ncc_params():
    assert NccParams(rho_block=3).n_pixels == 49


@pytest.mark.parametrize('params', (NccParams(0, 4), NccParams(1, 0)))
def test_ncc_params_validate(params):
    with pytest.raises(ParameterError):
        params.validate()


def test_block_stats_one_to_nine():
    img = GrayImage.from_array(np.arange(1, 10).reshape(3, 3))
    stats = compute_block_stats(img, NccParams(rho_block=1))
    assert stats.mu[1, 1] == 5
    assert stats.sigma[1, 1] == pytest.approx(math.sqrt(285 / 9 - 25), abs=1e-12)
    assert stats.sums[1, 1] == 45


def test_block_stats_constant_image():
    stats = compute_block_stats(GrayImage.from_array(np.full((9, 9), 7)), NccParams(2))
    np.testing.assert_array_equal(stats.mu[2:-2, 2:-2], 7)
    np.testing.assert_array_equal(stats.sigma[2:-2, 2:-2], 0)


def test_block_stats_match_loops():
    left, _ = _random_pair(1, 17, 13)
    stats = compute_block_stats(left, NccParams(rho_block=2))
    pixels = left.pixels.tolist()
    for v in range(2, 11):
        for u in range(2, 15):
            mu, sigma = oracles.block_stats(pixels, u, v, 2)
            assert stats.mu[v, u] == pytest.approx(mu, abs=1e-9)
            assert stats.sigma[v, u] == pytest.approx(sigma, abs=1e-9)
    assert (stats.sigma >= 0).all()
    assert ((stats.mu >= 0) & (stats.mu <= 255)).all()


def test_block_stats_image_too_small():
    with pytest.raises(DimensionError):
        compute_block_stats(GrayImage.from_array(np.zeros((4, 9))), NccParams(2))


def _assert_matches_oracle(left, right, rho, d_max):
    ref, tar = compute_cost_volumes(left, right, NccParams(rho, d_max))
    lp, rp = left.pixels.tolist(), right.pixels.tolist()
    for d in range(d_max + 1):
        for v in range(left.height):
            for u in range(left.width):
                expected = oracles.ncc(lp, rp, u, v, d, rho)
                got = ref[u, v, d]
                if expected is None:
                    assert math.isnan(got), (u, v, d)
                else:
                    assert got == pytest.approx(expected, abs=1e-9), (u, v, d)


def test_costs_match_oracle_small():
    left, right = _random_pair(0, 21, 11)
    _assert_matches_oracle(left, right, rho=2, d_max=4)


@pytest.mark.parametrize('seed', range(21))
def test_costs_match_oracle(seed):
    left, right = _random_pair(100 + seed, 32, 24)
    _assert_matches_oracle(left, right, rho=1 + seed % 3, d_max=8)


@pytest.mark.parametrize('seed', range(5))
def test_dual_volumes_agree(seed):
    left, right = _random_pair(seed, 30, 20)
    ref, tar = compute_cost_volumes(left, right, NccParams(2, 6))
    for d in range(7):
        a = ref.costs[d, :, d:]
        b = tar.costs[d, :, :ref.width - d]
        np.testing.assert_array_equal(a, b)
    assert np.isnan(ref.costs).sum() == np.isnan(tar.costs).sum()


def test_costs_in_range():
    left, right = _random_pair(3, 40, 30)
    ref, _ = compute_cost_volumes(left, right, NccParams(1, 10))
    valid = ref.costs[~np.isnan(ref.costs)]
    assert ((valid >= -1) & (valid <= 1)).all()


def test_border_band_invalid():
    left, right = _random_pair(8, 20, 15)
    ref, _ = compute_cost_volumes(left, right, NccParams(2, 3))
    costs = ref.costs
    assert np.isnan(costs[:, :2]).all()
    assert np.isnan(costs[:, -2:]).all()
    assert np.isnan(costs[:, :, -2:]).all()
    for d in range(4):
        assert np.isnan(costs[d, :, :2 + d]).all()
        assert not np.isnan(costs[d, 2:-2, 2 + d:-2]).any()


def test_self_correlation():
    left, _ = _random_pair(5, 20, 12)
    ref, _ = compute_cost_volumes(left, left, NccParams(2, 2))
    np.testing.assert_allclose(ref.costs[0, 2:-2, 2:-2], 1., atol=1e-12)


def test_anticorrelation():
    left, _ = _random_pair(6, 20, 12)
    inverted = GrayImage.from_array(255 - left.pixels.astype(int))
    ref, _ = compute_cost_volumes(left, inverted, NccParams(2, 2))
    np.testing.assert_allclose(ref.costs[0, 2:-2, 2:-2], -1., atol=1e-12)


def test_photometric_invariance():
    rng = np.random.default_rng(9)
    left = GrayImage.from_array(rng.integers(0, 256, size=(16, 24)))
    raw = rng.integers(0, 121, size=(16, 24))
    right = GrayImage.from_array(raw)
    brighter = GrayImage.from_array(2 * raw + 10)
    a, _ = compute_cost_volumes(left, right, NccParams(2, 5))
    b, _ = compute_cost_volumes(left, brighter, NccParams(2, 5))
    np.testing.assert_array_equal(np.isnan(a.costs), np.isnan(b.costs))
    np.testing.assert_allclose(a.costs, b.costs, atol=1e-6)


def test_textureless_blocks_invalid():
    left, right = _random_pair(2, 24, 16)
    flat = right.pixels.copy()
    flat[:, 10:20] = 100
    ref, _ = compute_cost_volumes(left, GrayImage.from_array(flat), NccParams(1, 2))
    # right blocks centred at 11..18 are flat
    for d in range(3):
        assert np.isnan(ref.costs[d, :, 11 + d:19 + d]).all()


def test_flat_blocks_invalid_at_zero_min_sigma():
    rng = np.random.default_rng(4)
    pixels = rng.integers(0, 256, size=(30, 40))
    pixels[10:20, 10:20] = 100
    img = GrayImage.from_array(pixels)
    ref, tar = compute_cost_volumes(img, img, NccParams(1, 3), min_sigma=0.)
    # blocks centred at 11..18 lie inside the flat patch
    assert np.isnan(ref.costs[:, 11:19, 11:19]).all()
    assert np.isnan(tar.costs[:, 11:19, 11:19]).all()
    assert not np.isnan(ref.costs[0, 1:5, 1:-1]).any()


def test_right_valid_mask():
    left, right = _random_pair(2, 24, 16)
    mask = np.ones((16, 24), dtype=bool)
    mask[:, :4] = False
    ref, tar = compute_cost_volumes(left, right, NccParams(1, 3), right_valid=mask)
    # target blocks centred at x <= 4 touch a masked column
    assert np.isnan(tar.costs[:, :, :5]).all()
    assert not np.isnan(tar.costs[0, 1:-1, 5:-1]).any()


def test_compute_cost_volumes_size_mismatch():
    left, _ = _random_pair(0, 10, 10)
    with pytest.raises(DimensionError):
        compute_cost_volumes(left, GrayImage.from_array(np.zeros((10, 11))), NccParams(1, 2))


def test_compute_cost_volumes_mask_size_mismatch():
    left, right = _random_pair(0, 10, 10)
    with pytest.raises(DimensionError):
        compute_cost_volumes(
            left, right, NccParams(1, 2), right_valid=np.ones((3, 3), dtype=bool),
        )


def test_cost_volume_accessors():
    volume = CostVolume(np.arange(24, dtype=float).reshape(2, 3, 4))
    assert (volume.d_max, volume.height, volume.width) == (1, 3, 4)
    assert volume[3, 2, 1] == 23.
