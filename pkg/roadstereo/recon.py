from __future__ import annotations

import math
from collections.abc import Iterable
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from roadstereo.errors import FitError
from roadstereo.errors import ParameterError
from roadstereo.image import DisparityMap
from roadstereo.image import Region
from roadstereo.transform import CameraRig


class PointCloud(NamedTuple):
    """points[i] = (x, y, z) in metres seen at pixels[i] = (u, v)

    world frame = left camera frame: x right, y down, z forward
    """
    points: npt.NDArray[np.float64]
    pixels: npt.NDArray[np.intp]

    def __len__(self) -> int:
        return len(self.points)

    def select(self, mask: npt.NDArray[np.bool_]) -> PointCloud:
        return PointCloud(self.points[mask], self.pixels[mask])

    def in_region(self, region: Region) -> npt.NDArray[np.bool_]:
        u, v = self.pixels[:, 0], self.pixels[:, 1]
        return (
            (u >= region.u) & (u < region.u + region.w) &
            (v >= region.v) & (v < region.v + region.h)
        )


class Plane(NamedTuple):
    """n0 x + n1 y + n2 z + n3 = 0 with a unit normal, n1 >= 0"""
    n0: float
    n1: float
    n2: float
    n3: float

    @property
    def normal(self) -> npt.NDArray[np.float64]:
        return np.array((self.n0, self.n1, self.n2))

    @classmethod
    def from_normal(cls, normal: npt.ArrayLike, offset: float) -> Plane:
        normal = np.asarray(normal, dtype=float)
        length = np.linalg.norm(normal)
        if not length > 0:
            raise FitError('plane normal has zero length')
        normal, offset = normal / length, offset / length
        if normal[1] < 0:
            normal, offset = -normal, -offset
        return cls(*(float(x) for x in normal), float(offset))


class DistanceStats(NamedTuple):
    count: int
    min: float
    max: float
    mean: float
    rms: float

    @classmethod
    def of(cls, distances: npt.NDArray[np.float64]) -> DistanceStats:
        if len(distances) == 0:
            return cls(0, math.nan, math.nan, math.nan, math.nan)
        return cls(
            count=len(distances),
            min=float(distances.min()),
            max=float(distances.max()),
            mean=float(distances.mean()),
            rms=float(np.sqrt(np.mean(distances ** 2))),
        )


def triangulate(
        disparity: DisparityMap,
        rig: CameraRig,
        d_min: float = 1.,
) -> PointCloud:
    if not d_min > 0:
        raise ParameterError(f'd_min must be positive: {d_min}')
    values = disparity.values
    finite = np.isfinite(values)
    v, u = np.nonzero(finite & (np.where(finite, values, 0.) >= d_min))
    d = disparity.values[v, u]
    z = rig.f * rig.baseline / d
    x = (u - rig.u0) * z / rig.f
    y = (v - rig.v0) * z / rig.f
    return PointCloud(np.column_stack((x, y, z)), np.column_stack((u, v)))


def project(points: npt.NDArray[np.float64], rig: CameraRig) -> npt.NDArray[np.float64]:
    """inverse of `triangulate`: (u, v, d) of each point"""
    x, y, z = points.T
    return np.column_stack((
        rig.u0 + rig.f * x / z,
        rig.v0 + rig.f * y / z,
        rig.f * rig.baseline / z,
    ))


def fit_plane(points: npt.NDArray[np.float64]) -> Plane:
    """total least squares plane: smallest principal axis of the points"""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) < 3:
        raise FitError(f'need at least 3 points for a plane, got {len(points)}')
    centroid = points.mean(axis=0)
    centred = points - centroid
    evals, evecs = np.linalg.eigh(centred.T @ centred)
    # second axis collapsed: the points lie on a line (or a point)
    if evals[1] <= 1e-12 * max(evals[2], 1e-300):
        raise FitError('points are collinear, plane is undefined')
    normal = evecs[:, 0]
    return Plane.from_normal(normal, -float(normal @ centroid))


def fit_plane_corners(cloud: PointCloud, region: Region) -> Plane:
    """plane through the valid points closest to the region's four corners"""
    corners = (
        (region.u, region.v),
        (region.u + region.w - 1, region.v),
        (region.u, region.v + region.h - 1),
        (region.u + region.w - 1, region.v + region.h - 1),
    )
    if len(cloud) == 0:
        raise FitError('no valid points near the region corners')
    picked = []
    for cu, cv in corners:
        sq = (cloud.pixels[:, 0] - cu) ** 2 + (cloud.pixels[:, 1] - cv) ** 2
        picked.append(int(np.argmin(sq)))
    return fit_plane(cloud.points[sorted(set(picked))])


def point_plane_distances(
        points: npt.NDArray[np.float64],
        plane: Plane,
) -> npt.NDArray[np.float64]:
    """signed distance along the plane normal"""
    return np.asarray(points, dtype=float).reshape(-1, 3) @ plane.normal + plane.n3


def heights_above(
        points: npt.NDArray[np.float64],
        plane: Plane,
) -> npt.NDArray[np.float64]:
    """distance to the plane, positive on the camera's side"""
    distances = point_plane_distances(points, plane)
    return distances if plane.n3 >= 0 else -distances


def mde_per_second(width: int, height: int, d_max: int, runtime_s: float) -> float:
    """millions of disparity evaluations per second"""
    if not runtime_s > 0:
        raise ParameterError(f'runtime must be positive: {runtime_s}')
    elif width < 1 or height < 1 or d_max < 1:
        raise ParameterError(f'bad dimensions: {width}x{height}x{d_max}')
    return width * height * d_max * 1e-6 / runtime_s


def format_ply(points: Iterable[tuple[float, float, float]] | npt.NDArray[np.float64]) -> str:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    header = (
        'ply\n'
        'format ascii 1.0\n'
        f'element vertex {len(points)}\n'
        'property float x\n'
        'property float y\n'
        'property float z\n'
        'end_header\n'
    )
    return header + ''.join(f'{x:.6f} {y:.6f} {z:.6f}\n' for x, y, z in points)
