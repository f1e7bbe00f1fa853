"""sparse correspondences for road model calibration

texture peaks are picked on a grid in the reference image and matched
along their epipolar row in the target image by NCC
"""
from __future__ import annotations

import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from roadstereo.costs import NccParams
from roadstereo.costs import compute_block_stats
from roadstereo.errors import DimensionError
from roadstereo.image import GrayImage
from roadstereo.transform import Correspondence

logger = logging.getLogger(__name__)

HALF_WINDOW = 5
MIN_PEAK = .9


def detect_features(
        image: GrayImage,
        *,
        cell: int = 32,
        half_window: int = HALF_WINDOW,
        min_sigma: float = 2.,
) -> list[tuple[int, int]]:
    """(u, v) of the highest block variance in every grid cell"""
    stats = compute_block_stats(image, NccParams(half_window, 1))
    sigma = stats.sigma
    ret = []
    for v0 in range(half_window, image.height - half_window, cell):
        for u0 in range(half_window, image.width - half_window, cell):
            v1 = min(v0 + cell, image.height - half_window)
            u1 = min(u0 + cell, image.width - half_window)
            block = sigma[v0:v1, u0:u1]
            dv, du = np.unravel_index(np.argmax(block), block.shape)
            if block[dv, du] >= min_sigma:
                ret.append((int(u0 + du), int(v0 + dv)))
    return ret


def match_features(
        left: GrayImage,
        right: GrayImage,
        points: list[tuple[int, int]],
        *,
        half_window: int = HALF_WINDOW,
        min_peak: float = MIN_PEAK,
        max_disparity: int | None = None,
) -> list[Correspondence]:
    if left.pixels.shape != right.pixels.shape:
        raise DimensionError(
            f'image sizes differ: {left.pixels.shape} vs {right.pixels.shape}',
        )
    k = 2 * half_window + 1
    lpix = left.pixels.astype(float)
    rpix = right.pixels.astype(float)

    ret = []
    for u, v in points:
        patch = lpix[v - half_window:v + half_window + 1, u - half_window:u + half_window + 1]
        lo = half_window
        if max_disparity is not None:
            lo = max(lo, u - max_disparity)
        band = rpix[v - half_window:v + half_window + 1, lo - half_window:u + half_window + 1]
        # candidates[i] is the block centred at column lo + i
        candidates = sliding_window_view(band, (k, k))[0].reshape(-1, k * k)

        pz = patch.ravel() - patch.mean()
        cz = candidates - candidates.mean(axis=1, keepdims=True)
        denom = np.sqrt((pz @ pz) * np.einsum('ij,ij->i', cz, cz))
        with np.errstate(divide='ignore', invalid='ignore'):
            ncc = np.where(denom > 0, (cz @ pz) / denom, -1.)

        best = int(np.argmax(ncc))
        if ncc[best] >= min_peak:
            ret.append(Correspondence(u, v, lo + best, v))

    logger.info('matched %d of %d features', len(ret), len(points))
    return ret


def sparse_correspondences(
        left: GrayImage,
        right: GrayImage,
        *,
        max_disparity: int | None = None,
) -> list[Correspondence]:
    return match_features(
        left, right, detect_features(left), max_disparity=max_disparity,
    )
