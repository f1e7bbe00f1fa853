from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numba
import numpy as np
import numpy.typing as npt

from roadstereo.errors import DimensionError
from roadstereo.errors import ParameterError
from roadstereo.image import GrayImage
from roadstereo.image import build_integral

logger = logging.getLogger(__name__)

# blocks flatter than this (intensity levels) produce no cost
MIN_SIGMA = .5


class NccParams(NamedTuple):
    rho_block: int = 3
    d_max: int = 20

    @property
    def n_pixels(self) -> int:
        return (2 * self.rho_block + 1) ** 2

    def validate(self) -> None:
        if self.rho_block < 1:
            raise ParameterError(f'rho_block must be >= 1: {self.rho_block}')
        elif self.d_max < 1:
            raise ParameterError(f'd_max must be >= 1: {self.d_max}')


class BlockStats(NamedTuple):
    """per-pixel statistics of the block centred at each pixel

    `sums` and `sq_dev` (n * sum(i^2) - sum(i)^2) are exact integers, the
    cost kernel works on those; `mu` / `sigma` are their real views.
    Pixels whose block leaves the image hold zeros.
    """
    sums: npt.NDArray[np.int64]
    sq_dev: npt.NDArray[np.int64]
    mu: npt.NDArray[np.float64]
    sigma: npt.NDArray[np.float64]


class CostVolume(NamedTuple):
    """c(u, v, d) stored disparity-major as costs[d, v, u], NaN = invalid"""
    costs: npt.NDArray[np.float64]

    @property
    def d_max(self) -> int:
        return self.costs.shape[0] - 1

    @property
    def height(self) -> int:
        return self.costs.shape[1]

    @property
    def width(self) -> int:
        return self.costs.shape[2]

    def __getitem__(self, udv: tuple[int, int, int]) -> float:
        u, v, d = udv
        return float(self.costs[d, v, u])


def compute_block_stats(image: GrayImage, params: NccParams) -> BlockStats:
    rho = params.rho_block
    k = 2 * rho + 1
    if image.width < k or image.height < k:
        raise DimensionError(
            f'{image.width}x{image.height} image is smaller than a '
            f'{k}x{k} block',
        )
    n = params.n_pixels
    pixels = image.pixels.astype(np.int64)
    s1 = build_integral(pixels).block_sums(rho)
    s2 = build_integral(pixels * pixels).block_sums(rho)

    sums = np.zeros(pixels.shape, dtype=np.int64)
    sq_dev = np.zeros(pixels.shape, dtype=np.int64)
    inner = np.s_[rho:image.height - rho, rho:image.width - rho]
    sums[inner] = s1
    # exact in integers, never negative
    sq_dev[inner] = n * s2 - s1 * s1

    mu = sums / n
    sigma = np.sqrt(sq_dev) / n
    for arr in (sums, sq_dev, mu, sigma):
        arr.flags.writeable = False
    return BlockStats(sums=sums, sq_dev=sq_dev, mu=mu, sigma=sigma)


@numba.njit(parallel=True, cache=True, nogil=True)
def _ncc_kernel(
        left: npt.NDArray[np.int64],
        right: npt.NDArray[np.int64],
        sum_l: npt.NDArray[np.int64],
        dev_l: npt.NDArray[np.int64],
        sum_r: npt.NDArray[np.int64],
        dev_r: npt.NDArray[np.int64],
        bad_r: npt.NDArray[np.bool_],
        rho: int,
        min_dev: float,
        ref: npt.NDArray[np.float64],
        tar: npt.NDArray[np.float64],
) -> None:  # pragma: no cover (compiled)
    n_disp, height, width = ref.shape
    n = (2 * rho + 1) ** 2
    # each row writes only its own row of both volumes
    for v in numba.prange(rho, height - rho):
        for d in range(n_disp):
            for u in range(rho + d, width - rho):
                x = u - d
                if dev_l[v, u] < min_dev or dev_r[v, x] < min_dev or bad_r[v, x]:
                    continue
                dot = 0
                for y in range(v - rho, v + rho + 1):
                    for k in range(-rho, rho + 1):
                        dot += left[y, u + k] * right[y, x + k]
                num = n * dot - sum_l[v, u] * sum_r[v, x]
                c = num / math.sqrt(float(dev_l[v, u]) * float(dev_r[v, x]))
                c = min(1., max(-1., c))
                ref[d, v, u] = c
                tar[d, v, x] = c


def compute_cost_volumes(
        left: GrayImage,
        right_warped: GrayImage,
        params: NccParams,
        *,
        right_valid: npt.NDArray[np.bool_] | None = None,
        min_sigma: float = MIN_SIGMA,
) -> tuple[CostVolume, CostVolume]:
    """NCC reference and target volumes

    ref[d, v, u] compares the left block at (u, v) with the right block at
    (u - d, v); tar holds the same value at [d, v, u - d].  Costs whose
    target block touches a pixel flagged False in `right_valid` are
    invalid, as are border blocks and flat (sigma < min_sigma) blocks.
    """
    if left.pixels.shape != right_warped.pixels.shape:
        raise DimensionError(
            f'image sizes differ: {left.pixels.shape} vs '
            f'{right_warped.pixels.shape}',
        )
    params.validate()
    stats_l = compute_block_stats(left, params)
    stats_r = compute_block_stats(right_warped, params)

    rho = params.rho_block
    bad_r = np.zeros(left.pixels.shape, dtype=bool)
    if right_valid is not None:
        if right_valid.shape != left.pixels.shape:
            raise DimensionError(
                f'mask size differs: {right_valid.shape} vs {left.pixels.shape}',
            )
        holes = build_integral(~right_valid).block_sums(rho)
        bad_r[rho:left.height - rho, rho:left.width - rho] = holes > 0

    shape = (params.d_max + 1, left.height, left.width)
    ref = np.full(shape, np.nan)
    tar = np.full(shape, np.nan)
    # deviations are integer sums, a flat block is exactly 0 and always invalid
    min_dev = max((params.n_pixels * min_sigma) ** 2, 1.)
    _ncc_kernel(
        left.pixels.astype(np.int64), right_warped.pixels.astype(np.int64),
        stats_l.sums, stats_l.sq_dev, stats_r.sums, stats_r.sq_dev,
        bad_r, rho, min_dev, ref, tar,
    )
    logger.debug(
        'cost volumes %dx%dx%d: %.1f%% valid',
        left.width, left.height, params.d_max + 1,
        100 * np.count_nonzero(~np.isnan(ref)) / ref.size,
    )
    return CostVolume(ref), CostVolume(tar)
