from __future__ import annotations

import argparse
from typing import Any
from typing import NamedTuple

from roadstereo.aggregate import BilateralParams
from roadstereo.costs import NccParams
from roadstereo.errors import ConfigError
from roadstereo.errors import DataError
from roadstereo.errors import FormatError
from roadstereo.errors import ParameterError
from roadstereo.kv import as_float
from roadstereo.kv import as_int
from roadstereo.kv import format_kv
from roadstereo.kv import parse_kv
from roadstereo.pnm import load
from roadstereo.transform import CameraRig
from roadstereo.transform import RansacParams

# extra spellings accepted on the command line
FLAG_ALIASES = {'d_margin': ('--delta-margin',)}


class Config(NamedTuple):
    rho_block: int = 3
    rho_agg: int = 4
    gamma_d: float = 5.
    gamma_r: float = 10.
    d_margin: int = 10
    # 0: search 0..2 * d_margin
    d_max: int = 0
    min_sigma: float = .5
    lr_tol: float = 0.
    ransac_threshold: float = 1.
    ransac_iterations: int = 200
    ransac_min_consensus: float = .5
    seed: int = 0
    d_min: float = 1.
    # 0: scale the largest disparity to 255
    vis_scale: float = 0.
    f: float = 700.
    u0: float = 320.
    v0: float = 240.
    baseline: float = .12
    theta: float = 1.
    plane_n: float = -1.
    plane_beta: float = .85

    @property
    def search_range(self) -> int:
        return self.d_max or 2 * self.d_margin

    def ncc_params(self) -> NccParams:
        return NccParams(rho_block=self.rho_block, d_max=self.search_range)

    def bilateral_params(self) -> BilateralParams:
        return BilateralParams(
            rho_agg=self.rho_agg, gamma_d=self.gamma_d, gamma_r=self.gamma_r,
        )

    def ransac_params(self) -> RansacParams:
        return RansacParams(
            threshold=self.ransac_threshold,
            iterations=self.ransac_iterations,
            min_consensus=self.ransac_min_consensus,
            seed=self.seed,
        )

    def rig(self) -> CameraRig:
        return CameraRig(
            f=self.f, u0=self.u0, v0=self.v0, baseline=self.baseline,
            theta=self.theta, plane_n=self.plane_n, plane_beta=self.plane_beta,
        )

    def validate(self) -> None:
        try:
            self.ncc_params().validate()
            self.bilateral_params().validate()
            self.ransac_params().validate()
            self.rig().validate()
        except (ParameterError, DataError) as e:
            raise ConfigError(f'bad configuration: {e}')

        if self.d_margin < 0:
            raise ConfigError(f'd_margin must be >= 0: {self.d_margin}')
        elif self.d_max < 0:
            raise ConfigError(f'd_max must be >= 0: {self.d_max}')
        elif self.min_sigma < 0:
            raise ConfigError(f'min_sigma must be >= 0: {self.min_sigma}')
        elif self.lr_tol < 0:
            raise ConfigError(f'lr_tol must be >= 0: {self.lr_tol}')
        elif not self.d_min > 0:
            raise ConfigError(f'd_min must be positive: {self.d_min}')
        elif self.vis_scale < 0:
            raise ConfigError(f'vis_scale must be >= 0: {self.vis_scale}')

    def to_text(self) -> str:
        return format_kv(self._asdict().items())

    def update(self, items: list[tuple[str, str]], *, source: str) -> Config:
        kw: dict[str, Any] = {}
        for k, v in items:
            if k not in self._fields:
                raise ConfigError(f'{source}: unknown key {k!r}')
            try:
                kw[k] = _convert(k, v)
            except FormatError as e:
                raise ConfigError(f'{source}: {e}')
        return self._replace(**kw)

    @classmethod
    def from_text(cls, s: str, *, source: str = '<string>') -> Config:
        try:
            items = parse_kv(s, source=source)
        except FormatError as e:
            raise ConfigError(str(e))
        return cls().update(items, source=source)

    @classmethod
    def from_file(cls, filename: str) -> Config:
        return cls.from_text(load(filename).decode(), source=filename)


def _convert(key: str, value: str) -> int | float:
    if isinstance(Config._field_defaults[key], int):
        return as_int(key, value)
    else:
        return as_float(key, value)


def add_config_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('configuration')
    group.add_argument('--config', metavar='FILE', help='key = value file')
    group.add_argument(
        '--print-config', action='store_true',
        help='print the effective configuration and exit',
    )
    for name, default in Config._field_defaults.items():
        flags = (f'--{name.replace("_", "-")}', *FLAG_ALIASES.get(name, ()))
        group.add_argument(
            *flags, dest=name, metavar=type(default).__name__.upper(),
            type=str, default=None, help=f'(default: {default})',
        )


def config_from_args(args: argparse.Namespace) -> Config:
    """defaults < --config file < flags"""
    if args.config is not None:
        config = Config.from_file(args.config)
    else:
        config = Config()
    flags = [
        (name, getattr(args, name))
        for name in Config._fields
        if getattr(args, name) is not None
    ]
    return config.update(flags, source='command line')
