from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from collections.abc import Sequence

import numba
import numpy as np

from roadstereo.config import Config
from roadstereo.config import add_config_args
from roadstereo.config import config_from_args
from roadstereo.errors import EmptyRegionError
from roadstereo.errors import StereoError
from roadstereo.errors import UsageError
from roadstereo.evaluate import compare
from roadstereo.features import sparse_correspondences
from roadstereo.image import GrayImage
from roadstereo.image import Region
from roadstereo.perf import Perf
from roadstereo.perf import perf_log
from roadstereo.pipeline import MATCHING_STAGES
from roadstereo.pipeline import match_pair
from roadstereo.pnm import disparity_to_pgm
from roadstereo.pnm import load
from roadstereo.pnm import load_pfm
from roadstereo.pnm import load_pgm
from roadstereo.pnm import save
from roadstereo.pnm import write_pfm
from roadstereo.pnm import write_pgm
from roadstereo.recon import DistanceStats
from roadstereo.recon import Plane
from roadstereo.recon import PointCloud
from roadstereo.recon import fit_plane
from roadstereo.recon import fit_plane_corners
from roadstereo.recon import format_ply
from roadstereo.recon import heights_above
from roadstereo.recon import mde_per_second
from roadstereo.recon import triangulate
from roadstereo.synth import SceneSpec
from roadstereo.synth import default_scene
from roadstereo.synth import occlusion_mask
from roadstereo.synth import render_pair
from roadstereo.synth import sample_correspondences
from roadstereo.transform import RoadModel
from roadstereo.transform import estimate_roll
from roadstereo.transform import fit_road_model
from roadstereo.transform import format_correspondences
from roadstereo.transform import read_correspondences
from roadstereo.transform import road_model_from_rig
from roadstereo.transform import warp_target

logger = logging.getLogger('roadstereo')

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'
INTERNAL_ERROR = 4


def _int_list(s: str) -> list[int]:
    return [int(part) for part in s.split(',')]


def _load_model(filename: str) -> RoadModel:
    return RoadModel.from_text(load(filename).decode(), source=filename)


def _load_scene(filename: str | None) -> SceneSpec:
    if filename is None:
        return default_scene()
    else:
        return SceneSpec.from_text(load(filename).decode(), source=filename)


def _report(items: Sequence[tuple[str, object]]) -> None:
    for k, v in items:
        print(f'{k}: {v}')


def cmd_transform(args: argparse.Namespace, config: Config, perf: Perf) -> int:
    left = load_pgm(args.left)
    right = load_pgm(args.right)

    with perf.stage('model'):
        if args.from_rig:
            model = road_model_from_rig(config.rig(), left.height, config.d_margin)
        else:
            if args.matches is not None:
                matches = read_correspondences(
                    load(args.matches).decode(), source=args.matches,
                )
            else:
                matches = sparse_correspondences(left, right)
            model = fit_road_model(
                matches, config.ransac_params(),
                height=left.height, d_margin=config.d_margin,
            )
    with perf.stage('warp'):
        warped = warp_target(right, model)

    save(args.model, model.to_text().encode())
    save(args.warped, write_pgm(warped.image))
    _report(model._asdict().items())

    if args.roll_from is not None:
        disparity = load_pfm(args.roll_from)
        print(f'roll: {estimate_roll(disparity, args.roll_region):.6f}')
    return 0


def cmd_match(args: argparse.Namespace, config: Config, perf: Perf) -> int:
    if args.identity_model:
        model = RoadModel.identity()
    else:
        model = _load_model(args.model)
    left = load_pgm(args.left)
    right = load_pgm(args.right)
    if args.dump_costs is not None:
        os.makedirs(args.dump_costs, exist_ok=True)

    result = match_pair(
        left, right, model, config, perf=perf, dump_dir=args.dump_costs,
    )
    save(args.output, write_pfm(result.disparity))
    if args.vis is not None:
        save(args.vis, write_pgm(disparity_to_pgm(result.disparity, config.vis_scale)))
    return 0


def _fit_road_plane(
        cloud: PointCloud,
        roi: Region | None,
        exclude: Sequence[Region],
        corners: bool,
) -> tuple[Plane, PointCloud]:
    road = np.ones(len(cloud), dtype=bool)
    for region in (*((roi,) if roi is not None else ()), *exclude):
        road &= ~cloud.in_region(region)
    road_cloud = cloud.select(road)
    if corners:
        assert roi is not None
        return fit_plane_corners(road_cloud, roi), road_cloud
    return fit_plane(road_cloud.points), road_cloud


def cmd_reconstruct(args: argparse.Namespace, config: Config, perf: Perf) -> int:
    if args.corners and args.roi is None:
        raise UsageError('--corners needs --roi')
    disparity = load_pfm(args.disparity)

    with perf.stage('triangulate'):
        cloud = triangulate(disparity, config.rig(), config.d_min)
    if len(cloud) == 0:
        raise EmptyRegionError(f'{args.disparity}: no valid disparities')
    save(args.output, format_ply(cloud.points).encode())
    print(f'points: {len(cloud)}')

    if args.roi is not None:
        measured = cloud.select(cloud.in_region(args.roi))
        if len(measured) == 0:
            raise EmptyRegionError(f'no valid points in region {args.roi}')
    else:
        measured = cloud

    with perf.stage('plane'):
        plane, road = _fit_road_plane(cloud, args.roi, args.exclude, args.corners)
        stats = DistanceStats.of(heights_above(measured.points, plane))
    print(f'plane: {" ".join(f"{x:.6f}" for x in plane)}')
    print(f'plane points: {len(road)}')
    _report(stats._asdict().items())
    return 0


def cmd_synth(args: argparse.Namespace, config: Config, perf: Perf) -> int:
    spec = _load_scene(args.scene)
    spec.validate()
    with perf.stage('render'):
        pair = render_pair(spec)
    model = road_model_from_rig(spec.rig, spec.height, config.d_margin)
    matches = sample_correspondences(pair, step=args.step)

    os.makedirs(args.outdir, exist_ok=True)
    outputs = {
        'left.pgm': write_pgm(pair.left),
        'right.pgm': write_pgm(pair.right),
        'disparity.pfm': write_pfm(pair.disparity),
        'occlusion.pgm': write_pgm(occlusion_mask(pair)),
        'matches.csv': format_correspondences(matches).encode(),
        'model.txt': model.to_text().encode(),
        'scene.txt': spec.to_text().encode(),
    }
    for name, data in outputs.items():
        save(os.path.join(args.outdir, name), data)
    print(f'wrote {len(outputs)} files to {args.outdir}')
    return 0


def cmd_eval(args: argparse.Namespace, config: Config, perf: Perf) -> int:
    estimate = load_pfm(args.estimate)
    truth = load_pfm(args.truth)
    if args.occlusion is not None:
        occluded = load_pgm(args.occlusion).pixels > 0
    else:
        occluded = None
    report = compare(estimate, truth, occluded)
    print('\n'.join(report.lines()))
    return 0


def _bench_input(
        args: argparse.Namespace,
        config: Config,
) -> tuple[GrayImage, GrayImage, RoadModel]:
    if args.pair is not None:
        left_s, right_s = args.pair
        left, right = load_pgm(left_s), load_pgm(right_s)
        if args.model is not None:
            model = _load_model(args.model)
        else:
            model = road_model_from_rig(config.rig(), left.height, config.d_margin)
        return left, right, model
    else:
        spec = _load_scene(args.scene)
        pair = render_pair(spec)
        model = road_model_from_rig(spec.rig, spec.height, config.d_margin)
        return pair.left, pair.right, model


def _point_dump_dir(root: str | None, point: Config) -> str | None:
    if root is None:
        return None
    path = os.path.join(root, f'rho_block{point.rho_block}_rho_agg{point.rho_agg}')
    os.makedirs(path, exist_ok=True)
    return path


def cmd_bench(args: argparse.Namespace, config: Config, perf: Perf) -> int:
    if args.repeat < 1:
        raise UsageError(f'--repeat must be >= 1: {args.repeat}')
    sweep = [
        config._replace(rho_block=rho_block, rho_agg=rho_agg)
        for rho_block in args.rho_blocks
        for rho_agg in args.rho_aggs
    ]
    for point in sweep:
        point.validate()

    left, right, model = _bench_input(args, config)
    # compile every kernel before anything is timed
    match_pair(left, right, model, sweep[0], perf=Perf())

    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(('rho_block', 'rho_agg', 'seconds', 'mde_per_s'))
    for point in sweep:
        best = math.inf
        for i in range(args.repeat):
            timing = Perf()
            dump_dir = _point_dump_dir(args.dump_costs, point) if i == 0 else None
            match_pair(left, right, model, point, perf=timing, dump_dir=dump_dir)
            best = min(best, timing.total(*MATCHING_STAGES))
        mde = mde_per_second(left.width, left.height, point.search_range, best)
        writer.writerow((point.rho_block, point.rho_agg, f'{best:.6f}', f'{mde:.3f}'))
        logger.info('rho_block=%d rho_agg=%d: %.3fs', point.rho_block, point.rho_agg, best)

    if args.output is not None:
        save(args.output, out.getvalue().encode())
    else:
        print(out.getvalue(), end='')
    return 0


COMMANDS = {
    'transform': cmd_transform,
    'match': cmd_match,
    'reconstruct': cmd_reconstruct,
    'synth': cmd_synth,
    'eval': cmd_eval,
    'bench': cmd_bench,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='roadstereo')
    parser.add_argument('-v', '--verbose', action='store_true')
    parser.add_argument('--threads', type=int, help='worker threads')
    parser.add_argument('--perf-log')
    add_config_args(parser)
    subparsers = parser.add_subparsers(dest='command')

    transform = subparsers.add_parser(
        'transform', help='fit the road model and warp the target image',
    )
    transform.add_argument('left')
    transform.add_argument('right')
    transform.add_argument('model', help='model file to write')
    transform.add_argument('warped', help='warped target pgm to write')
    source = transform.add_mutually_exclusive_group()
    source.add_argument('--matches', help='ul,vl,ur,vr correspondence file')
    source.add_argument(
        '--from-rig', action='store_true',
        help='use the model implied by the configured rig',
    )
    transform.add_argument('--roll-from', metavar='PFM')
    transform.add_argument('--roll-region', type=Region.parse, metavar='U,V,W,H')

    match = subparsers.add_parser('match', help='dense disparity map')
    match.add_argument('left')
    match.add_argument('right')
    match.add_argument('output', help='disparity pfm to write')
    model = match.add_mutually_exclusive_group(required=True)
    model.add_argument('--model')
    model.add_argument('--identity-model', action='store_true')
    match.add_argument('--vis', metavar='PGM')
    match.add_argument('--dump-costs', metavar='DIR')

    reconstruct = subparsers.add_parser(
        'reconstruct', help='point cloud and plane distances',
    )
    reconstruct.add_argument('disparity')
    reconstruct.add_argument('output', help='ply to write')
    reconstruct.add_argument('--roi', type=Region.parse, metavar='U,V,W,H')
    reconstruct.add_argument(
        '--exclude', type=Region.parse, metavar='U,V,W,H', action='append',
        default=[], help='leave this region out of the plane fit',
    )
    reconstruct.add_argument(
        '--corners', action='store_true',
        help='plane through the roi corners instead of a least squares fit',
    )

    synth = subparsers.add_parser('synth', help='render a synthetic scene')
    synth.add_argument('outdir')
    synth.add_argument('--scene', help='scene file (default: built-in scene)')
    synth.add_argument('--step', type=int, default=16, help='match grid step')

    evaluate = subparsers.add_parser('eval', help='compare against ground truth')
    evaluate.add_argument('estimate')
    evaluate.add_argument('truth')
    evaluate.add_argument('--occlusion', metavar='PGM')

    bench = subparsers.add_parser('bench', help='runtime sweep')
    bench_input = bench.add_mutually_exclusive_group()
    bench_input.add_argument('--scene')
    bench_input.add_argument('--pair', nargs=2, metavar=('LEFT', 'RIGHT'))
    bench.add_argument('--model', help='model for --pair (default: from rig)')
    bench.add_argument('--rho-blocks', type=_int_list, default=[1, 2, 3, 4, 5])
    bench.add_argument('--rho-aggs', type=_int_list, default=[0, 1, 2, 3, 4, 5])
    bench.add_argument('--repeat', type=int, default=1)
    bench.add_argument('--output', help='csv to write (default: stdout)')
    bench.add_argument('--dump-costs', metavar='DIR', help='cost volumes per sweep point')

    return parser


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    elif n < 1:
        raise UsageError(f'--threads must be >= 1: {n}')
    available = numba.config.NUMBA_NUM_THREADS
    if n > available:
        logger.warning('only %d threads available, using %d', available, available)
        n = available
    numba.set_num_threads(n)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=LOG_FORMAT,
    )

    try:
        config = config_from_args(args)
        config.validate()
        if args.print_config:
            print(config.to_text(), end='')
            return 0
        elif args.command is None:
            parser.error('a command is required')
        _set_threads(args.threads)
        with perf_log(args.perf_log) as perf:
            return COMMANDS[args.command](args, config, perf)
    except StereoError as e:
        print(f'error! {e}', file=sys.stderr)
        return e.exit_code
    except Exception:
        logger.exception('internal error')
        return INTERNAL_ERROR


if __name__ == '__main__':
    raise SystemExit(main())
