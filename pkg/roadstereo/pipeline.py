from __future__ import annotations

import logging
import os.path
from typing import NamedTuple

from roadstereo.aggregate import aggregate_volume
from roadstereo.config import Config
from roadstereo.costs import CostVolume
from roadstereo.costs import compute_cost_volumes
from roadstereo.disparity import lr_consistency
from roadstereo.disparity import postprocess
from roadstereo.disparity import subpixel_refine
from roadstereo.disparity import wta
from roadstereo.errors import DimensionError
from roadstereo.image import DisparityMap
from roadstereo.image import GrayImage
from roadstereo.perf import Perf
from roadstereo.pnm import save
from roadstereo.pnm import write_cost_dump
from roadstereo.recon import mde_per_second
from roadstereo.transform import RoadModel
from roadstereo.transform import warp_target

logger = logging.getLogger(__name__)

MATCHING_STAGES = ('costs', 'aggregate')


class MatchResult(NamedTuple):
    disparity: DisparityMap
    # before the shift back, relative to the warped target
    residual: DisparityMap
    seconds: float
    mde_per_s: float


def _dump(dump_dir: str, name: str, volume: CostVolume) -> None:
    filename = os.path.join(dump_dir, f'{name}.costs')
    save(filename, write_cost_dump(volume.costs))
    logger.info('wrote %s', filename)


def match_pair(
        left: GrayImage,
        right: GrayImage,
        model: RoadModel,
        config: Config,
        *,
        perf: Perf | None = None,
        dump_dir: str | None = None,
) -> MatchResult:
    """warp, costs, aggregation, WTA, LR check, subpixel, shift back"""
    if left.pixels.shape != right.pixels.shape:
        raise DimensionError(
            f'image sizes differ: {left.width}x{left.height} vs '
            f'{right.width}x{right.height}',
        )
    config.validate()
    perf = perf if perf is not None else Perf()
    first = len(perf.records)

    with perf.stage('warp'):
        warped = warp_target(right, model)
    with perf.stage('costs'):
        ref, tar = compute_cost_volumes(
            left, warped.image, config.ncc_params(),
            right_valid=warped.valid, min_sigma=config.min_sigma,
        )
    with perf.stage('aggregate'):
        ref_agg = aggregate_volume(ref, left, config.bilateral_params())
        tar_agg = aggregate_volume(tar, warped.image, config.bilateral_params())
    with perf.stage('wta'):
        ref_map = wta(ref_agg)
        tar_map = wta(tar_agg)
    with perf.stage('lr'):
        checked = lr_consistency(ref_map, tar_map, config.lr_tol)
    with perf.stage('subpixel'):
        refined = subpixel_refine(checked, ref_agg)
    with perf.stage('postprocess'):
        disparity = postprocess(refined, model)

    if dump_dir is not None:
        for name, volume in (
                ('ref', ref), ('tar', tar),
                ('ref_agg', ref_agg), ('tar_agg', tar_agg),
        ):
            _dump(dump_dir, name, volume)

    records = perf.records[first:]
    seconds = sum(t for _, t in records)
    matching = sum(t for n, t in records if n in MATCHING_STAGES)
    d_max = config.search_range
    for name, duration in records:
        logger.info('%-11s %8.3fs', name, duration)
    if matching > 0:
        logger.info(
            'costs+aggregate: %.2f Mde/s',
            mde_per_second(left.width, left.height, d_max, matching),
        )
    mde = mde_per_second(left.width, left.height, d_max, seconds) if seconds > 0 else 0.
    logger.info(
        'pipeline: %.3fs, %.2f Mde/s, %.1f%% valid',
        seconds, mde, 100 * disparity.valid.mean(),
    )
    return MatchResult(
        disparity=disparity, residual=refined, seconds=seconds, mde_per_s=mde,
    )
