from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from roadstereo.errors import DegeneratePlaneError
from roadstereo.errors import FitError
from roadstereo.errors import FormatError
from roadstereo.errors import InsufficientDataError
from roadstereo.errors import InvalidModelError
from roadstereo.errors import NoConsensusError
from roadstereo.errors import ParameterError
from roadstereo.errors import UndefinedRollError
from roadstereo.image import DisparityMap
from roadstereo.image import GrayImage
from roadstereo.image import Region
from roadstereo.image import resample_rows
from roadstereo.kv import as_float
from roadstereo.kv import as_int
from roadstereo.kv import format_kv
from roadstereo.kv import parse_kv

logger = logging.getLogger(__name__)

# rows of a rectified pair may disagree by this much
ROW_TOLERANCE = 1.
REFIT_ROUNDS = 10


class CameraRig(NamedTuple):
    f: float
    u0: float
    v0: float
    baseline: float
    theta: float
    plane_n: float
    plane_beta: float

    def validate(self) -> None:
        if not self.f > 0:
            raise ParameterError(f'focal length must be positive: {self.f}')
        elif not self.baseline > 0:
            raise ParameterError(f'baseline must be positive: {self.baseline}')
        elif self.plane_beta == 0:
            raise DegeneratePlaneError('plane offset beta must be non-zero')


class RoadModel(NamedTuple):
    alpha0: float
    alpha1: float
    delta: float
    inlier_count: int = 0
    residual_rms: float = 0.

    @classmethod
    def identity(cls) -> RoadModel:
        return cls(alpha0=0., alpha1=0., delta=0.)

    def shift(self, v: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """rightward shift applied to target row(s) `v`"""
        return self.alpha0 + self.alpha1 * np.asarray(v, dtype=float) - self.delta

    def to_text(self) -> str:
        return format_kv(self._asdict().items())

    @classmethod
    def from_text(cls, s: str, *, source: str = '<string>') -> RoadModel:
        kv = dict(parse_kv(s, source=source))
        try:
            return cls(
                alpha0=as_float('alpha0', kv['alpha0']),
                alpha1=as_float('alpha1', kv['alpha1']),
                delta=as_float('delta', kv['delta']),
                inlier_count=as_int('inlier_count', kv.get('inlier_count', '0')),
                residual_rms=as_float('residual_rms', kv.get('residual_rms', '0')),
            )
        except KeyError as e:
            k, = e.args
            raise FormatError(f'{source}: missing key {k!r}')


class Correspondence(NamedTuple):
    ul: float
    vl: float
    ur: float
    vr: float

    @property
    def disparity(self) -> float:
        return self.ul - self.ur


class RansacParams(NamedTuple):
    threshold: float = 1.
    iterations: int = 200
    min_consensus: float = .5
    seed: int = 0

    def validate(self) -> None:
        if not self.threshold > 0:
            raise ParameterError(f'ransac threshold must be positive: {self.threshold}')
        elif self.iterations < 1:
            raise ParameterError(f'ransac iterations must be >= 1: {self.iterations}')
        elif not 0 <= self.min_consensus <= 1:
            raise ParameterError(
                f'ransac min consensus must be a fraction: {self.min_consensus}',
            )


def alpha_from_rig(rig: CameraRig) -> tuple[float, float]:
    if rig.plane_beta == 0:
        raise DegeneratePlaneError('plane offset beta must be non-zero')
    k = rig.baseline * rig.plane_n / rig.plane_beta
    cos, sin = math.cos(rig.theta), math.sin(rig.theta)
    return (rig.v0 * cos - rig.f * sin) * k, -cos * k


def choose_delta(alpha0: float, alpha1: float, height: int, d_margin: int) -> int:
    """integer delta keeping every row shift alpha0 + alpha1 * v - delta >= 0

    after warping, road pixels sit at disparity delta, so delta is the
    headroom left below the road inside the search range
    """
    lowest = min(alpha0, alpha0 + alpha1 * (height - 1))
    return max(0, min(d_margin, math.floor(lowest)))


def road_model_from_rig(rig: CameraRig, height: int, d_margin: int) -> RoadModel:
    alpha0, alpha1 = alpha_from_rig(rig)
    delta = choose_delta(alpha0, alpha1, height, d_margin)
    return RoadModel(alpha0=alpha0, alpha1=alpha1, delta=delta)


def _line_fit(
        v: npt.NDArray[np.float64],
        d: npt.NDArray[np.float64],
) -> tuple[float, float]:
    if np.ptp(v) == 0:
        raise FitError('correspondences span a single row, cannot fit d(v)')
    design = np.column_stack((np.ones_like(v), v))
    (alpha0, alpha1), *_ = np.linalg.lstsq(design, d, rcond=None)
    return float(alpha0), float(alpha1)


def _refine_consensus(
        v: npt.NDArray[np.float64],
        d: npt.NDArray[np.float64],
        best: npt.NDArray[np.bool_],
        threshold: float,
        rounds: int = REFIT_ROUNDS,
) -> tuple[float, float, npt.NDArray[np.bool_]]:
    """least squares on the consensus set, re-selected until stable

    the returned line is always the fit of the returned set
    """
    for _ in range(rounds):
        alpha0, alpha1 = _line_fit(v[best], d[best])
        refined = np.abs(d - alpha0 - alpha1 * v) <= threshold
        if np.array_equal(refined, best) or refined.sum() < 2:
            return alpha0, alpha1, best
        best = refined
    alpha0, alpha1 = _line_fit(v[best], d[best])
    return alpha0, alpha1, best


def fit_road_model(
        matches: Sequence[Correspondence],
        ransac: RansacParams,
        *,
        height: int,
        d_margin: int = 10,
) -> RoadModel:
    if len(matches) < 2:
        raise InsufficientDataError(
            f'need at least 2 correspondences, got {len(matches)}',
        )
    arr = np.array(matches, dtype=float).reshape(-1, 4)
    v = arr[:, 1]
    d = arr[:, 0] - arr[:, 2]
    n = len(arr)

    # all hypotheses at once: pairs of distinct samples
    rng = np.random.default_rng(ransac.seed)
    i = rng.integers(n, size=ransac.iterations)
    j = (i + rng.integers(1, n, size=ransac.iterations)) % n
    dv = v[j] - v[i]
    usable = dv != 0
    if not usable.any():
        raise FitError('correspondences span a single row, cannot fit d(v)')
    i, j, dv = i[usable], j[usable], dv[usable]
    slope = (d[j] - d[i]) / dv
    intercept = d[i] - slope * v[i]
    residual = d[None, :] - intercept[:, None] - slope[:, None] * v[None, :]
    consensus = np.abs(residual) <= ransac.threshold
    best = consensus[np.argmax(consensus.sum(axis=1))]

    alpha0, alpha1, best = _refine_consensus(v, d, best, ransac.threshold)

    required = max(2, math.ceil(ransac.min_consensus * n))
    if best.sum() < required:
        raise NoConsensusError(
            f'largest consensus set has {best.sum()} of {n} matches '
            f'({required} required)',
        )

    residual_rms = math.sqrt(np.mean((d[best] - alpha0 - alpha1 * v[best]) ** 2))
    delta = choose_delta(alpha0, alpha1, height, d_margin)
    logger.debug(
        'road model: alpha0=%.6f alpha1=%.6f delta=%d inliers=%d/%d',
        alpha0, alpha1, delta, best.sum(), n,
    )
    return RoadModel(
        alpha0=alpha0,
        alpha1=alpha1,
        delta=delta,
        inlier_count=int(best.sum()),
        residual_rms=residual_rms,
    )


def near_field_region(width: int, height: int) -> Region:
    """bottom centre 25% x 15% of the map"""
    w = max(1, round(width * .25))
    h = max(1, round(height * .15))
    return Region(u=(width - w) // 2, v=height - h, w=w, h=h)


def estimate_roll(disparity: DisparityMap, region: Region | None = None) -> float:
    """roll angle from a plane d = g0 + g1 u + g2 v over `region`"""
    if region is None:
        region = near_field_region(disparity.width, disparity.height)

    inside = region.mask(disparity.width, disparity.height) & disparity.valid
    v, u = np.nonzero(inside)
    if len(u) < 3:
        raise FitError(f'need 3 valid pixels for a roll fit, got {len(u)}')

    design = np.column_stack((np.ones(len(u)), u, v)).astype(float)
    if np.linalg.matrix_rank(design) < 3:
        raise FitError('roll patch samples are collinear')
    (_, g1, g2), *_ = np.linalg.lstsq(design, disparity.values[inside], rcond=None)

    if abs(g2) < 1e-12:
        raise UndefinedRollError('disparity does not vary with v, roll undefined')
    return math.atan(-g1 / g2)


class WarpResult(NamedTuple):
    image: GrayImage
    valid: npt.NDArray[np.bool_]


def warp_target(target: GrayImage, model: RoadModel) -> WarpResult:
    """shift row v of `target` right by alpha0 + alpha1 v - delta"""
    if not all(math.isfinite(x) for x in (model.alpha0, model.alpha1, model.delta)):
        raise InvalidModelError(f'non-finite road model: {model}')

    shift = model.shift(np.arange(target.height))
    if np.any(shift < 0):
        v = int(np.argmax(shift < 0))
        raise InvalidModelError(f'negative shift {shift[v]:.3f} on row {v}')

    u = np.arange(target.width, dtype=float)
    xs = u[None, :] - shift[:, None]
    values, valid = resample_rows(target.pixels.astype(float), xs)
    valid.flags.writeable = False
    return WarpResult(GrayImage.from_array(np.rint(values)), valid)


def read_correspondences(s: str, *, source: str = '<string>') -> list[Correspondence]:
    """`ul,vl,ur,vr` per line, `#` comments"""
    ret = []
    for lineno, line in enumerate(s.splitlines(), start=1):
        line = line.partition('#')[0].strip()
        if not line:
            continue
        try:
            ul, vl, ur, vr = (float(part) for part in line.split(','))
        except ValueError:
            raise FormatError(f'{source}:{lineno}: expected ul,vl,ur,vr')
        match = Correspondence(ul, vl, ur, vr)
        if not all(math.isfinite(x) for x in match):
            raise FormatError(f'{source}:{lineno}: non-finite coordinate')
        elif abs(vl - vr) > ROW_TOLERANCE:
            raise FormatError(
                f'{source}:{lineno}: rows differ by {abs(vl - vr):g} px, '
                f'is the pair rectified?',
            )
        ret.append(match)
    return ret


def format_correspondences(matches: Sequence[Correspondence]) -> str:
    return '# ul,vl,ur,vr\n' + ''.join(
        f'{m.ul:.6f},{m.vl:.6f},{m.ur:.6f},{m.vr:.6f}\n' for m in matches
    )
