from __future__ import annotations

from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from roadstereo.errors import DimensionError
from roadstereo.image import DisparityMap

BAD_THRESHOLDS = (.25, .5, 1.)


class ErrorReport(NamedTuple):
    evaluated: int
    coverage: float
    rms: float
    mae: float
    bad: tuple[tuple[float, float], ...]

    def lines(self) -> list[str]:
        ret = [
            f'evaluated: {self.evaluated}',
            f'coverage: {self.coverage:.4f}',
            f'rms: {self.rms:.4f}',
            f'mae: {self.mae:.4f}',
        ]
        ret.extend(f'bad_{t:g}: {rate:.4f}' for t, rate in self.bad)
        return ret


def compare(
        estimate: DisparityMap,
        truth: DisparityMap,
        occluded: npt.NDArray[np.bool_] | None = None,
        *,
        thresholds: tuple[float, ...] = BAD_THRESHOLDS,
) -> ErrorReport:
    """error statistics over pixels with a valid, non-occluded ground truth

    rms / mae / bad rates use the pixels the estimate also covers
    """
    if estimate.values.shape != truth.values.shape:
        raise DimensionError(
            f'maps differ in size: {estimate.values.shape} vs '
            f'{truth.values.shape}',
        )
    evaluable = truth.valid
    if occluded is not None:
        evaluable &= ~occluded

    both = evaluable & estimate.valid
    err = np.abs(estimate.values[both] - truth.values[both])
    total = int(evaluable.sum())
    if len(err) == 0:
        return ErrorReport(
            evaluated=0,
            coverage=0.,
            rms=np.nan,
            mae=np.nan,
            bad=tuple((t, np.nan) for t in thresholds),
        )
    return ErrorReport(
        evaluated=len(err),
        coverage=len(err) / total,
        rms=float(np.sqrt(np.mean(err ** 2))),
        mae=float(err.mean()),
        bad=tuple((t, float(np.mean(err > t))) for t in thresholds),
    )
