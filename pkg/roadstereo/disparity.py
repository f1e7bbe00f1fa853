from __future__ import annotations

import numba
import numpy as np
import numpy.typing as npt

from roadstereo.costs import CostVolume
from roadstereo.errors import DimensionError
from roadstereo.image import DisparityMap
from roadstereo.transform import RoadModel

# |2c(d-1) + 2c(d+1) - 4c(d)| below this keeps the integer disparity
FLAT_DENOMINATOR = 1e-12


@numba.njit(parallel=True, cache=True, nogil=True)
def _wta_kernel(
        costs: npt.NDArray[np.float64],
        out: npt.NDArray[np.float64],
) -> None:  # pragma: no cover (compiled)
    n_disp, height, width = costs.shape
    for v in numba.prange(height):
        for u in range(width):
            best = -np.inf
            best_d = -1
            for d in range(n_disp):
                c = costs[d, v, u]
                # strict: ties go to the smaller disparity
                if not np.isnan(c) and c > best:
                    best = c
                    best_d = d
            if best_d >= 0:
                out[v, u] = best_d


def wta(volume: CostVolume) -> DisparityMap:
    """per pixel argmax over d of the (correlation) cost"""
    out = np.full((volume.height, volume.width), np.nan)
    _wta_kernel(volume.costs, out)
    return DisparityMap.from_array(out)


def lr_consistency(
        ref_map: DisparityMap,
        tar_map: DisparityMap,
        tol: float = 0.,
) -> DisparityMap:
    """drop pixels where ref(u, v) != tar(u - ref(u, v), v) within `tol`"""
    if ref_map.values.shape != tar_map.values.shape:
        raise DimensionError(
            f'maps differ in size: {ref_map.values.shape} vs '
            f'{tar_map.values.shape}',
        )
    ref = ref_map.values
    v, u = np.nonzero(ref_map.valid)
    x = u - ref[v, u].astype(np.intp)
    inside = x >= 0
    keep = np.zeros(len(u), dtype=bool)
    other = tar_map.values[v[inside], x[inside]]
    # NaN compares False, invalid target pixels drop out here too
    keep[inside] = np.abs(ref[v[inside], u[inside]] - other) <= tol

    out = np.full(ref.shape, np.nan)
    out[v[keep], u[keep]] = ref[v[keep], u[keep]]
    return DisparityMap.from_array(out)


def parabola_offset(
        c_minus: npt.NDArray[np.float64],
        c0: npt.NDArray[np.float64],
        c_plus: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """vertex of the parabola through (-1, c_minus), (0, c0), (1, c_plus)

    NaN where the three costs are (numerically) collinear
    """
    denom = 2 * c_minus + 2 * c_plus - 4 * c0
    flat = ~(np.abs(denom) >= FLAT_DENOMINATOR)
    with np.errstate(divide='ignore', invalid='ignore'):
        offset = (c_minus - c_plus) / np.where(flat, 1., denom)
    return np.where(flat, np.nan, offset)


def subpixel_refine(disparity: DisparityMap, volume: CostVolume) -> DisparityMap:
    values = disparity.values
    out = values.copy()
    v, u = np.nonzero(disparity.valid)
    d = values[v, u].astype(np.intp)
    interior = (d > 0) & (d < volume.d_max)
    v, u, d = v[interior], u[interior], d[interior]

    costs = volume.costs
    offset = parabola_offset(costs[d - 1, v, u], costs[d, v, u], costs[d + 1, v, u])
    # boundary, invalid neighbours and flat triples keep the integer value
    refined = ~np.isnan(offset)
    out[v[refined], u[refined]] = d[refined] + offset[refined]
    return DisparityMap.from_array(np.where(out < 0, 0., out))


def postprocess(disparity: DisparityMap, model: RoadModel) -> DisparityMap:
    """undo the perspective transformation: add the row shift back"""
    shift = model.shift(np.arange(disparity.height))
    return DisparityMap.from_array(disparity.values + shift[:, None])
