from __future__ import annotations

import math

import numpy as np
import pytest

from roadstereo.errors import DimensionError
from roadstereo.evaluate import ErrorReport
from roadstereo.evaluate import compare
from roadstereo.image import DisparityMap

nan = math.nan


def test_compare():
    truth = DisparityMap.from_array([[10., 10., 10., 10., nan]])
    estimate = DisparityMap.from_array([[10., 10.3, 12., nan, 3.]])
    report = compare(estimate, truth)
    assert report.evaluated == 3
    assert report.coverage == pytest.approx(.75)
    assert report.mae == pytest.approx(2.3 / 3)
    assert report.rms == pytest.approx(math.sqrt((.09 + 4) / 3))
    assert report.bad == ((.25, pytest.approx(2 / 3)), (.5, pytest.approx(1 / 3)), (1., pytest.approx(1 / 3)))


def test_compare_excludes_occluded():
    truth = DisparityMap.from_array([[1., 1.]])
    estimate = DisparityMap.from_array([[1., 9.]])
    report = compare(estimate, truth, np.array([[False, True]]))
    assert report.evaluated == 1
    assert report.rms == 0.
    assert report.coverage == 1.


def test_compare_nothing_to_evaluate():
    truth = DisparityMap.from_array([[1.]])
    report = compare(DisparityMap.invalid(1, 1), truth)
    assert report.evaluated == 0
    assert report.coverage == 0.
    assert math.isnan(report.rms)


def test_compare_size_mismatch():
    with pytest.raises(DimensionError):
        compare(DisparityMap.invalid(1, 1), DisparityMap.invalid(2, 1))


def test_report_lines():
    report = ErrorReport(
        evaluated=10, coverage=.5, rms=.125, mae=.1,
        bad=((.25, .2), (.5, .1), (1., 0.)),
    )
    assert report.lines() == [
        'evaluated: 10',
        'coverage: 0.5000',
        'rms: 0.1250',
        'mae: 0.1000',
        'bad_0.25: 0.2000',
        'bad_0.5: 0.1000',
        'bad_1: 0.0000',
    ]
