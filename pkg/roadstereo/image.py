from __future__ import annotations

from typing import Any
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from roadstereo.errors import DimensionError

# origin top-left, x rightward, y downward, arrays indexed [y, x]


def _frozen(arr: npt.NDArray[Any]) -> npt.NDArray[Any]:
    if arr.flags.writeable or not arr.flags.c_contiguous:
        arr = np.array(arr, order='C')
    arr.flags.writeable = False
    return arr


class GrayImage(NamedTuple):
    pixels: npt.NDArray[np.uint8]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_array(cls, arr: npt.ArrayLike) -> GrayImage:
        arr = np.asarray(arr)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f'expected a non-empty 2-d raster: {arr.shape}')
        if arr.dtype != np.uint8:
            if not np.all(np.isfinite(arr)):
                raise DimensionError('intensities must be finite')
            elif np.any(arr < 0) or np.any(arr > 255):
                raise DimensionError('intensities must be within 0..255')
            arr = np.rint(arr).astype(np.uint8)
        return cls(_frozen(arr))


class DisparityMap(NamedTuple):
    """real-valued disparities, NaN marks an invalid pixel"""
    values: npt.NDArray[np.float64]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def valid(self) -> npt.NDArray[np.bool_]:
        return ~np.isnan(self.values)

    @classmethod
    def from_array(cls, arr: npt.ArrayLike) -> DisparityMap:
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f'expected a non-empty 2-d raster: {arr.shape}')
        if np.any(arr[~np.isnan(arr)] < 0):
            raise DimensionError('disparities must be non-negative')
        return cls(_frozen(arr))

    @classmethod
    def invalid(cls, width: int, height: int) -> DisparityMap:
        return cls.from_array(np.full((height, width), np.nan))


class Region(NamedTuple):
    u: int
    v: int
    w: int
    h: int

    @classmethod
    def parse(cls, s: str) -> Region:
        try:
            u, v, w, h = (int(part) for part in s.split(','))
        except ValueError:
            raise ValueError(f'expected u,v,w,h: {s!r}')
        if w < 1 or h < 1:
            raise ValueError(f'region must be non-empty: {s!r}')
        return cls(u, v, w, h)

    def mask(self, width: int, height: int) -> npt.NDArray[np.bool_]:
        ret = np.zeros((height, width), dtype=bool)
        ret[
            max(self.v, 0):max(self.v + self.h, 0),
            max(self.u, 0):max(self.u + self.w, 0),
        ] = True
        return ret


class IntegralImage(NamedTuple):
    """(height + 1) x (width + 1) running sums, first row / column zero"""
    table: npt.NDArray[np.int64] | npt.NDArray[np.float64]

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    def __getitem__(self, xy: tuple[int, int]) -> float:
        x, y = xy
        return self.table[y, x].item()

    def rect_sum(self, x1: int, y1: int, x2: int, y2: int) -> float:
        """sum over x1 <= x < x2, y1 <= y < y2"""
        t = self.table
        return (t[y2, x2] - t[y2, x1] - t[y1, x2] + t[y1, x1]).item()

    def block_sums(self, rho: int) -> npt.NDArray[np.int64] | npt.NDArray[np.float64]:
        """sums of every (2rho+1)^2 block fully inside the source raster

        entry [y, x] belongs to the block centred at (x + rho, y + rho)
        """
        k = 2 * rho + 1
        t = self.table
        return t[k:, k:] - t[k:, :-k] - t[:-k, k:] + t[:-k, :-k]


def build_integral(raster: npt.ArrayLike) -> IntegralImage:
    arr = np.asarray(raster)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f'cannot integrate an empty raster: {arr.shape}')

    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == np.bool_:
        acc: type[np.generic] = np.int64
    else:
        acc = np.float64

    table = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=acc)
    np.cumsum(arr, axis=0, dtype=acc, out=table[1:, 1:])
    np.cumsum(table[1:, 1:], axis=1, dtype=acc, out=table[1:, 1:])
    table.flags.writeable = False
    return IntegralImage(table)


def resample_rows(
        raster: npt.NDArray[np.float64],
        xs: npt.NDArray[np.float64],
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.bool_]]:
    """sample each row of `raster` at real columns `xs` (same shape as
    `raster`) by horizontal linear interpolation

    samples outside [0, width - 1] are 0 and flagged False in the mask
    """
    height, width = raster.shape
    valid = (xs >= 0) & (xs <= width - 1)
    clipped = np.where(valid, xs, 0.)
    x0 = np.floor(clipped).astype(np.intp)
    frac = clipped - x0
    x1 = np.minimum(x0 + 1, width - 1)
    rows = np.arange(height)[:, None]
    out = (1 - frac) * raster[rows, x0] + frac * raster[rows, x1]
    return np.where(valid, out, 0.), valid
