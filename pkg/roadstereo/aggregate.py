from __future__ import annotations

import logging
from typing import NamedTuple

import numba
import numpy as np
import numpy.typing as npt

from roadstereo.costs import CostVolume
from roadstereo.errors import DimensionError
from roadstereo.errors import ParameterError
from roadstereo.image import GrayImage

logger = logging.getLogger(__name__)

# smallest realised weight sum that still produces a cost
MIN_WEIGHT = 1e-12


class BilateralParams(NamedTuple):
    rho_agg: int = 4
    gamma_d: float = 5.
    gamma_r: float = 10.

    def validate(self) -> None:
        if self.rho_agg < 0:
            raise ParameterError(f'rho_agg must be >= 0: {self.rho_agg}')
        elif not self.gamma_d > 0:
            raise ParameterError(f'gamma_d must be positive: {self.gamma_d}')
        elif not self.gamma_r > 0:
            raise ParameterError(f'gamma_r must be positive: {self.gamma_r}')


def spatial_weights(params: BilateralParams) -> npt.NDArray[np.float64]:
    """omega_d over the (2rho+1)^2 window, indexed [dy + rho, dx + rho]"""
    offsets = np.arange(-params.rho_agg, params.rho_agg + 1, dtype=float)
    sq = offsets[:, None] ** 2 + offsets[None, :] ** 2
    return np.exp(-sq / params.gamma_d ** 2)


def range_weights(params: BilateralParams) -> npt.NDArray[np.float64]:
    """omega_r for every absolute 8-bit intensity difference"""
    diff = np.arange(256, dtype=float)
    return np.exp(-diff ** 2 / params.gamma_r ** 2)


def bilateral_weights(
        guide: GrayImage,
        center: tuple[int, int],
        params: BilateralParams,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """(omega_d, omega_r) of the window around `center` = (u, v)

    window cells falling outside the image carry weight 0
    """
    u, v = center
    rho = params.rho_agg
    omega_d = spatial_weights(params)
    omega_r = np.zeros_like(omega_d)

    ys = np.arange(v - rho, v + rho + 1)
    xs = np.arange(u - rho, u + rho + 1)
    inside = (
        ((ys >= 0) & (ys < guide.height))[:, None] &
        ((xs >= 0) & (xs < guide.width))[None, :]
    )
    window = guide.pixels[
        np.clip(ys, 0, guide.height - 1)[:, None],
        np.clip(xs, 0, guide.width - 1)[None, :],
    ].astype(int)
    diff = np.abs(window - int(guide.pixels[v, u]))
    omega_r[inside] = range_weights(params)[diff[inside]]
    omega_d = np.where(inside, omega_d, 0.)
    return omega_d, omega_r


@numba.njit(parallel=True, cache=True, nogil=True)
def _aggregate_kernel(
        costs: npt.NDArray[np.float64],
        guide: npt.NDArray[np.int64],
        spatial: npt.NDArray[np.float64],
        rng: npt.NDArray[np.float64],
        rho: int,
        min_weight: float,
        out: npt.NDArray[np.float64],
) -> None:  # pragma: no cover (compiled)
    n_disp, height, width = costs.shape
    for v in numba.prange(height):
        y0, y1 = max(0, v - rho), min(height, v + rho + 1)
        for d in range(n_disp):
            for u in range(width):
                x0, x1 = max(0, u - rho), min(width, u + rho + 1)
                g = guide[v, u]
                acc = 0.
                wsum = 0.
                for y in range(y0, y1):
                    for x in range(x0, x1):
                        c = costs[d, y, x]
                        if np.isnan(c):
                            continue
                        w = spatial[y - v + rho, x - u + rho] * rng[abs(guide[y, x] - g)]
                        acc += w * c
                        wsum += w
                if wsum >= min_weight:
                    out[d, v, u] = acc / wsum


def aggregate_volume(
        volume: CostVolume,
        guide: GrayImage,
        params: BilateralParams,
) -> CostVolume:
    """bilateral weighted mean of each slice, guided by `guide`

    invalid neighbours are left out of both sums; windows are clipped at
    the image border
    """
    if (guide.height, guide.width) != (volume.height, volume.width):
        raise DimensionError(
            f'guide is {guide.width}x{guide.height}, volume is '
            f'{volume.width}x{volume.height}',
        )
    params.validate()

    out = np.full(volume.costs.shape, np.nan)
    _aggregate_kernel(
        volume.costs, guide.pixels.astype(np.int64),
        spatial_weights(params), range_weights(params),
        params.rho_agg, MIN_WEIGHT, out,
    )
    return CostVolume(out)
