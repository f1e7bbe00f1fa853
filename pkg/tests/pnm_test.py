from __future__ import annotations

import numpy as np
import pytest

from roadstereo.errors import FormatError
from roadstereo.errors import InputError
from roadstereo.errors import UnsupportedFormatError
from roadstereo.image import DisparityMap
from roadstereo.image import GrayImage
from roadstereo.pnm import disparity_to_pgm
from roadstereo.pnm import load_pfm
from roadstereo.pnm import load_pgm
from roadstereo.pnm import read_cost_dump
from roadstereo.pnm import read_pfm
from roadstereo.pnm import read_pgm
from roadstereo.pnm import write_cost_dump
from roadstereo.pnm import write_pfm
from roadstereo.pnm import write_pgm


def test_read_pgm_minimal():
    img = read_pgm(b'P5 2 2 255 \x00\x01\x02\x03')
    assert img.pixels.tolist() == [[0, 1], [2, 3]]


def test_pgm_round_trip_is_canonical():
    data = b'P5\n# a comment\n3   1\n255\n\x07\x08\x09'
    out = write_pgm(read_pgm(data))
    assert out == b'P5\n3 1\n255\n\x07\x08\x09'
    assert write_pgm(read_pgm(out)) == out


@pytest.mark.parametrize(
    'data',
    (
        pytest.param(b'P2 1 1 255 0', id='ascii magic'),
        pytest.param(b'P5 1 1 65535 \x00\x00', id='16 bit'),
        pytest.param(b'P5 2 2 255 \x00', id='truncated payload'),
        pytest.param(b'P5 2 2', id='truncated header'),
        pytest.param(b'P5 0 2 255 ', id='zero width'),
        pytest.param(b'P5 x 2 255 \x00\x00', id='bad width'),
    ),
)
def test_read_pgm_errors(data):
    with pytest.raises(FormatError):
        read_pgm(data)


def test_write_pfm_zeros():
    data = write_pfm(DisparityMap.from_array(np.zeros((2, 3))))
    header, payload = data[:len(b'Pf\n3 2\n-1.0\n')], data[len(b'Pf\n3 2\n-1.0\n'):]
    assert header == b'Pf\n3 2\n-1.0\n'
    assert payload == bytes(4 * 6)


def test_pfm_round_trip():
    values = np.array([[.25, np.nan, 3.], [0., .125, 123.5]])
    out = read_pfm(write_pfm(DisparityMap.from_array(values)))
    np.testing.assert_array_equal(out.values, values)
    assert out.valid.tolist() == [[True, False, True], [True, True, True]]


def test_pfm_nan_is_quiet_nan():
    data = write_pfm(DisparityMap.invalid(1, 1))
    assert data.endswith(b'\x00\x00\xc0\x7f')


def test_pfm_rows_are_bottom_to_top():
    data = write_pfm(DisparityMap.from_array([[1.], [2.]]))
    assert data.endswith(
        np.array([2., 1.], dtype='<f4').tobytes(),
    )


def test_read_pfm_big_endian():
    payload = np.array([[3., 4.], [1., 2.]], dtype='>f4').tobytes()
    out = read_pfm(b'Pf\n2 2\n1.0\n' + payload)
    assert out.values.tolist() == [[1., 2.], [3., 4.]]


def test_read_pfm_color_unsupported():
    with pytest.raises(UnsupportedFormatError):
        read_pfm(b'PF\n1 1\n-1.0\n' + bytes(12))


@pytest.mark.parametrize(
    'data',
    (
        pytest.param(b'P5\n1 1\n-1.0\n\x00\x00\x00\x00', id='magic'),
        pytest.param(b'Pf\n1 1\n0\n\x00\x00\x00\x00', id='zero scale'),
        pytest.param(b'Pf\n1 1\nx\n\x00\x00\x00\x00', id='bad scale'),
        pytest.param(b'Pf\n2 1\n-1.0\n\x00\x00\x00\x00', id='truncated'),
    ),
)
def test_read_pfm_errors(data):
    with pytest.raises(FormatError):
        read_pfm(data)


def test_disparity_to_pgm_auto_scale():
    img = disparity_to_pgm(DisparityMap.from_array([[0., 5.], [10., np.nan]]))
    assert img.pixels.tolist() == [[0, 128], [255, 0]]


def test_disparity_to_pgm_fixed_scale():
    img = disparity_to_pgm(DisparityMap.from_array([[1., 100.]]), scale=4.)
    assert img.pixels.tolist() == [[4, 255]]


def test_disparity_to_pgm_all_invalid():
    img = disparity_to_pgm(DisparityMap.invalid(2, 1))
    assert img.pixels.tolist() == [[0, 0]]


def test_cost_dump():
    costs = np.arange(24, dtype=float).reshape(2, 3, 4) / 10
    costs[1, 2, 3] = np.nan
    data = write_cost_dump(costs)
    assert data.startswith(b'4 3 1\n')
    out = read_cost_dump(data)
    assert out.shape == (2, 3, 4)
    np.testing.assert_array_equal(out, costs.astype(np.float32))


@pytest.mark.parametrize(
    'data',
    (b'4 3 1', b'4 3\n', b'1 1 0\n\x00\x00'),
)
def test_cost_dump_errors(data):
    with pytest.raises(FormatError):
        read_cost_dump(data)


def test_load_missing_file(tmpdir):
    filename = str(tmpdir.join('nope.pgm'))
    with pytest.raises(InputError) as excinfo:
        load_pgm(filename)
    assert filename in str(excinfo.value)


def test_load_bad_file_names_path(tmpdir):
    f = tmpdir.join('bad.pfm')
    f.write_binary(b'garbage')
    with pytest.raises(FormatError) as excinfo:
        load_pfm(str(f))
    assert str(f) in str(excinfo.value)


def test_load_pgm(tmpdir):
    f = tmpdir.join('x.pgm')
    img = GrayImage.from_array([[1, 2, 3]])
    f.write_binary(write_pgm(img))
    assert load_pgm(str(f)).pixels.tolist() == [[1, 2, 3]]
