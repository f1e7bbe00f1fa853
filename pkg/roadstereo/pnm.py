from __future__ import annotations

import re

import numpy as np
import numpy.typing as npt

from roadstereo.errors import FormatError
from roadstereo.errors import InputError
from roadstereo.errors import UnsupportedFormatError
from roadstereo.image import DisparityMap
from roadstereo.image import GrayImage

# IEEE single precision quiet NaN
QUIET_NAN = np.uint32(0x7fc00000)

TOKEN_RE = re.compile(rb'(?:\s|#[^\n]*\n)*(\S+)')


def _header(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    pos = 0
    for _ in range(count):
        match = TOKEN_RE.match(data, pos)
        if match is None:
            raise FormatError('truncated header')
        tokens.append(match[1])
        pos = match.end()
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError('truncated header')
    return tokens, pos + 1


def _int(token: bytes, what: str) -> int:
    try:
        ret = int(token)
    except ValueError:
        raise FormatError(f'bad {what}: {token!r}')
    if ret < 1:
        raise FormatError(f'bad {what}: {token!r}')
    return ret


def read_pgm(data: bytes) -> GrayImage:
    if data[:2] != b'P5':
        raise FormatError(f'not a binary pgm (magic {data[:2]!r})')
    (_, w_s, h_s, maxval_s), start = _header(data, 4)
    width, height = _int(w_s, 'width'), _int(h_s, 'height')
    if _int(maxval_s, 'maxval') != 255:
        raise FormatError(f'only maxval 255 is supported: {maxval_s!r}')

    payload = data[start:start + width * height]
    if len(payload) != width * height:
        raise FormatError(
            f'truncated payload: {len(payload)} of {width * height} bytes',
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage.from_array(pixels)


def write_pgm(image: GrayImage) -> bytes:
    header = f'P5\n{image.width} {image.height}\n255\n'.encode()
    return header + image.pixels.tobytes()


def read_pfm(data: bytes) -> DisparityMap:
    magic = data[:2]
    if magic == b'PF':
        raise UnsupportedFormatError('color pfm is not supported')
    elif magic != b'Pf':
        raise FormatError(f'not a pfm (magic {magic!r})')
    (_, w_s, h_s, scale_s), start = _header(data, 4)
    width, height = _int(w_s, 'width'), _int(h_s, 'height')
    try:
        scale = float(scale_s)
    except ValueError:
        raise FormatError(f'bad scale: {scale_s!r}')
    if scale == 0:
        raise FormatError('bad scale: 0')

    dtype = '<f4' if scale < 0 else '>f4'
    payload = data[start:start + 4 * width * height]
    if len(payload) != 4 * width * height:
        raise FormatError(
            f'truncated payload: {len(payload)} of {4 * width * height} bytes',
        )
    # pfm rows run bottom to top
    values = np.frombuffer(payload, dtype=dtype).reshape(height, width)[::-1]
    return DisparityMap.from_array(values.astype(np.float64))


def write_pfm(disparity: DisparityMap) -> bytes:
    values = disparity.values[::-1].astype('<f4')
    words = values.view('<u4')
    words[np.isnan(values)] = QUIET_NAN
    header = f'Pf\n{disparity.width} {disparity.height}\n-1.0\n'.encode()
    return header + words.tobytes()


def disparity_to_pgm(disparity: DisparityMap, scale: float = 0.) -> GrayImage:
    """linear visualisation: value * scale, invalid -> 0

    a scale of 0 maps the largest valid disparity to 255
    """
    valid = disparity.valid
    if scale <= 0:
        top = disparity.values[valid].max() if valid.any() else 0.
        scale = 255 / top if top > 0 else 1.
    scaled = np.where(valid, disparity.values * scale, 0.)
    return GrayImage.from_array(np.clip(np.rint(scaled), 0, 255))


def write_cost_dump(costs: npt.NDArray[np.float64]) -> bytes:
    """header `width height dmax` then slice-major little-endian float32"""
    n_disp, height, width = costs.shape
    header = f'{width} {height} {n_disp - 1}\n'.encode()
    return header + np.ascontiguousarray(costs, dtype='<f4').tobytes()


def read_cost_dump(data: bytes) -> npt.NDArray[np.float32]:
    header, sep, payload = data.partition(b'\n')
    if not sep:
        raise FormatError('truncated header')
    try:
        width, height, d_max = (int(part) for part in header.split())
    except ValueError:
        raise FormatError(f'bad cost dump header: {header!r}')
    size = width * height * (d_max + 1)
    if len(payload) != 4 * size:
        raise FormatError(f'truncated payload: {len(payload)} bytes')
    arr = np.frombuffer(payload, dtype='<f4')
    return arr.reshape(d_max + 1, height, width)


def load(filename: str) -> bytes:
    try:
        with open(filename, 'rb') as f:
            return f.read()
    except OSError as e:
        raise InputError(f'cannot read {filename!r}: {e.strerror}')


def save(filename: str, data: bytes) -> None:
    try:
        with open(filename, 'wb') as f:
            f.write(data)
    except OSError as e:
        raise InputError(f'cannot write {filename!r}: {e.strerror}')


def load_pgm(filename: str) -> GrayImage:
    try:
        return read_pgm(load(filename))
    except FormatError as e:
        raise type(e)(f'{filename}: {e}')


def load_pfm(filename: str) -> DisparityMap:
    try:
        return read_pfm(load(filename))
    except FormatError as e:
        raise type(e)(f'{filename}: {e}')
