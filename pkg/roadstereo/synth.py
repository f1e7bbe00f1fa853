"""ground truth scenes: a textured road plane with box obstacles seen by
a rectified stereo rig

world frame: x = camera x, y points down (y = yc cos theta + zc sin theta),
z runs forward along the road; the road is the plane n y + beta = 0 below
the camera and boxes are axis aligned in this frame.
"""
from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from roadstereo.errors import FormatError
from roadstereo.errors import SceneError
from roadstereo.image import DisparityMap
from roadstereo.image import GrayImage
from roadstereo.image import resample_rows
from roadstereo.kv import as_float
from roadstereo.kv import as_int
from roadstereo.kv import format_kv
from roadstereo.kv import parse_kv
from roadstereo.transform import CameraRig
from roadstereo.transform import Correspondence
from roadstereo.transform import alpha_from_rig

logger = logging.getLogger(__name__)

OCTAVES = 4
PERSISTENCE = .7
INTENSITY_LO, INTENSITY_HI = 30., 225.

ROAD = 0


class Box(NamedTuple):
    cx: float
    cz: float
    width: float
    length: float
    height: float

    @classmethod
    def parse(cls, s: str) -> Box:
        try:
            return cls(*(float(part) for part in s.split(',')))
        except (TypeError, ValueError):
            raise FormatError(f'box: expected cx,cz,width,length,height: {s!r}')

    def format(self) -> str:
        return ','.join(f'{x:g}' for x in self)


class SceneSpec(NamedTuple):
    rig: CameraRig
    width: int
    height: int
    seed: int = 0
    boxes: tuple[Box, ...] = ()
    noise_sigma: float = 0.
    texture_cell: float = .005

    @property
    def road_height(self) -> float:
        """distance of the road plane below the camera along world y"""
        return -self.rig.plane_beta / self.rig.plane_n

    def validate(self) -> None:
        self.rig.validate()
        if self.width < 2 or self.height < 2:
            raise SceneError(f'image too small: {self.width}x{self.height}')
        elif self.noise_sigma < 0:
            raise SceneError(f'noise_sigma must be >= 0: {self.noise_sigma}')
        elif not self.texture_cell > 0:
            raise SceneError(f'texture_cell must be positive: {self.texture_cell}')
        elif self.rig.plane_n == 0:
            raise SceneError('plane normal component n is zero, no road plane')
        elif not self.road_height > 0:
            raise SceneError('road plane is not below the camera')
        for box in self.boxes:
            if not (box.width > 0 and box.length > 0 and box.height > 0):
                raise SceneError(f'box must have positive size: {box}')
            elif box.height >= self.road_height:
                raise SceneError(f'box reaches the camera: {box}')

        alpha0, alpha1 = alpha_from_rig(self.rig)
        if min(alpha0, alpha0 + alpha1 * (self.height - 1)) <= 0:
            raise SceneError('road plane is behind the camera on some rows')

    def to_text(self) -> str:
        items: list[tuple[str, object]] = [
            ('width', self.width),
            ('height', self.height),
            ('seed', self.seed),
            ('noise_sigma', self.noise_sigma),
            ('texture_cell', self.texture_cell),
            *self.rig._asdict().items(),
        ]
        items.extend(('box', box.format()) for box in self.boxes)
        return format_kv(items)

    @classmethod
    def from_text(cls, s: str, *, source: str = '<string>') -> SceneSpec:
        base = default_scene()
        rig = base.rig._asdict()
        kw: dict[str, object] = {}
        boxes = []
        for k, v in parse_kv(s, source=source):
            if k == 'box':
                boxes.append(Box.parse(v))
            elif k in rig:
                rig[k] = as_float(k, v)
            elif k in ('width', 'height', 'seed'):
                kw[k] = as_int(k, v)
            elif k in ('noise_sigma', 'texture_cell'):
                kw[k] = as_float(k, v)
            else:
                raise FormatError(f'{source}: unknown scene key {k!r}')
        return base._replace(rig=CameraRig(**rig), boxes=tuple(boxes), **kw)


def default_scene() -> SceneSpec:
    """640x480 rig looking down at the road from 0.85 m, road ~1 m away"""
    rig = CameraRig(
        f=700., u0=320., v0=240., baseline=.12, theta=1.,
        plane_n=-1., plane_beta=.85,
    )
    return SceneSpec(rig=rig, width=640, height=480, noise_sigma=1.)


class SyntheticPair(NamedTuple):
    left: GrayImage
    right: GrayImage
    disparity: DisparityMap
    occluded: npt.NDArray[np.bool_]
    labels: npt.NDArray[np.int64]


def _rotation(theta: float) -> npt.NDArray[np.float64]:
    """camera -> world"""
    c, s = math.cos(theta), math.sin(theta)
    return np.array(((1., 0., 0.), (0., c, s), (0., -s, c)))


def _slab(
        o: float,
        direction: npt.NDArray[np.float64],
        lo: float,
        hi: float,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    with np.errstate(divide='ignore', invalid='ignore'):
        t1 = (lo - o) / direction
        t2 = (hi - o) / direction
    near, far = np.minimum(t1, t2), np.maximum(t1, t2)
    parallel = direction == 0
    if lo <= o <= hi:
        return np.where(parallel, -np.inf, near), np.where(parallel, np.inf, far)
    else:
        return np.where(parallel, np.inf, near), np.where(parallel, -np.inf, far)


def _cast(
        spec: SceneSpec,
        origin_x: float,
        us: npt.NDArray[np.float64],
        vs: npt.NDArray[np.float64],
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.int64], npt.NDArray[np.float64]]:
    """(depth, surface label, world hit points) of the rays through
    pixels (us, vs) of a camera at `origin_x` on the baseline

    depth is the camera-frame z of the hit, which is also the ray parameter
    """
    rig = spec.rig
    cam = np.stack(((us - rig.u0) / rig.f, (vs - rig.v0) / rig.f, np.ones_like(us)))
    dx, dy, dz = np.tensordot(_rotation(rig.theta), cam, axes=1)

    with np.errstate(divide='ignore'):
        depth = np.where(dy > 0, spec.road_height / dy, np.inf)
    labels = np.full(us.shape, ROAD, dtype=np.int64)

    for i, box in enumerate(spec.boxes, start=1):
        bounds = (
            (origin_x, dx, box.cx - box.width / 2, box.cx + box.width / 2),
            (0., dy, spec.road_height - box.height, spec.road_height),
            (0., dz, box.cz - box.length / 2, box.cz + box.length / 2),
        )
        slabs = [_slab(*axis) for axis in bounds]
        near = np.maximum.reduce([near for near, _ in slabs])
        far = np.minimum.reduce([far for _, far in slabs])
        hit = (near <= far) & (near > 0) & (near < depth)
        depth = np.where(hit, near, depth)
        labels = np.where(hit, i, labels)

    points = np.stack((origin_x + dx * depth, dy * depth, dz * depth), axis=-1)
    return depth, labels, points


def _lattice_noise(
        p: npt.NDArray[np.float64],
        perm: npt.NDArray[np.int64],
        table: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    base = np.floor(p)
    frac = p - base
    i = base.astype(np.int64)
    s = frac * frac * (3 - 2 * frac)
    ret = np.zeros(p.shape[:-1])
    for cx, cy, cz in itertools.product((0, 1), repeat=3):
        h = perm[(i[..., 0] + cx) & 255]
        h = perm[(h + i[..., 1] + cy) & 255]
        h = perm[(h + i[..., 2] + cz) & 255]
        w = (
            (s[..., 0] if cx else 1 - s[..., 0]) *
            (s[..., 1] if cy else 1 - s[..., 1]) *
            (s[..., 2] if cz else 1 - s[..., 2])
        )
        ret += w * table[h]
    return ret


def texture(points: npt.NDArray[np.float64], seed: int, cell: float) -> npt.NDArray[np.float64]:
    """band limited value noise in [30, 225], finest lattice `cell` metres"""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(256)
    table = rng.random(256)

    total = np.zeros(points.shape[:-1])
    norm = 0.
    for octave in range(OCTAVES):
        amplitude = PERSISTENCE ** octave
        scale = cell * 2 ** (OCTAVES - 1 - octave)
        # offset decorrelates the octaves sharing one lattice table
        total += amplitude * _lattice_noise(points / scale + 37. * octave, perm, table)
        norm += amplitude
    return INTENSITY_LO + (INTENSITY_HI - INTENSITY_LO) * total / norm


class _Views(NamedTuple):
    left: npt.NDArray[np.float64]
    right: npt.NDArray[np.float64]
    disparity: npt.NDArray[np.float64]
    occluded: npt.NDArray[np.bool_]
    labels: npt.NDArray[np.int64]


def _render_views(spec: SceneSpec) -> _Views:
    """noise free, unquantised views"""
    spec.validate()
    rig = spec.rig
    vs, us = np.mgrid[0:spec.height, 0:spec.width].astype(float)
    alpha0, alpha1 = alpha_from_rig(rig)
    road_d = alpha0 + alpha1 * vs

    depth_l, labels, points_l = _cast(spec, 0., us, vs)
    left = texture(points_l, spec.seed, spec.texture_cell)
    disparity = np.where(labels == ROAD, road_d, rig.f * rig.baseline / depth_l)

    # a left pixel is occluded when the right camera's ray through its
    # projection stops in front of it (or leaves the image)
    ur = us - disparity
    depth_back, _, _ = _cast(spec, rig.baseline, ur, vs)
    occluded = (ur < 0) | (depth_back < depth_l * (1 - 1e-6))

    # the right view reuses left samples through the same linear kernel the
    # warp uses; surfaces the left camera cannot see are textured directly
    depth_r, labels_r, points_r = _cast(spec, rig.baseline, us, vs)
    disparity_r = np.where(labels_r == ROAD, road_d, rig.f * rig.baseline / depth_r)
    ul = us + disparity_r
    depth_fwd, _, _ = _cast(spec, 0., ul, vs)
    from_left, inside = resample_rows(left, ul)
    visible = inside & (np.abs(depth_fwd - depth_r) <= depth_r * 1e-6)
    right = np.where(visible, from_left, texture(points_r, spec.seed, spec.texture_cell))

    return _Views(left, right, disparity, occluded, labels)


def _quantise(
        raster: npt.NDArray[np.float64],
        noise: npt.NDArray[np.float64],
) -> GrayImage:
    return GrayImage.from_array(np.clip(np.rint(raster + noise), 0, 255))


def render_pair(spec: SceneSpec) -> SyntheticPair:
    views = _render_views(spec)
    rng = np.random.default_rng([spec.seed, 1])
    shape = views.left.shape
    if spec.noise_sigma > 0:
        noise_l = rng.normal(0., spec.noise_sigma, shape)
        noise_r = rng.normal(0., spec.noise_sigma, shape)
    else:
        noise_l = noise_r = np.zeros(shape)

    logger.info(
        'rendered %dx%d scene, %d box(es), %.1f%% occluded',
        spec.width, spec.height, len(spec.boxes), 100 * views.occluded.mean(),
    )
    occluded = views.occluded
    occluded.flags.writeable = False
    labels = views.labels
    labels.flags.writeable = False
    return SyntheticPair(
        left=_quantise(views.left, noise_l),
        right=_quantise(views.right, noise_r),
        disparity=DisparityMap.from_array(views.disparity),
        occluded=occluded,
        labels=labels,
    )


def occlusion_mask(pair: SyntheticPair) -> GrayImage:
    return GrayImage.from_array(np.where(pair.occluded, 255, 0).astype(np.uint8))


def sample_correspondences(
        pair: SyntheticPair,
        *,
        step: int = 16,
        labels: Sequence[int] = (ROAD,),
) -> list[Correspondence]:
    """exact matches on a grid of visible pixels of the given surfaces"""
    ret = []
    for v in range(0, pair.disparity.height, step):
        for u in range(0, pair.disparity.width, step):
            if pair.occluded[v, u] or pair.labels[v, u] not in labels:
                continue
            d = pair.disparity.values[v, u]
            ret.append(Correspondence(float(u), float(v), float(u - d), float(v)))
    return ret
