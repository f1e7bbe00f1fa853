from __future__ import annotations


class StereoError(RuntimeError):
    exit_code = 3


class UsageError(StereoError):
    exit_code = 2


class ConfigError(UsageError):
    pass


class ParameterError(UsageError, ValueError):
    pass


class InputError(UsageError):
    pass


class DataError(StereoError):
    pass


class FormatError(DataError):
    pass


class UnsupportedFormatError(FormatError):
    pass


class DimensionError(DataError):
    pass


class FitError(DataError):
    pass


class UndefinedRollError(FitError):
    pass


class DegeneratePlaneError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class NoConsensusError(DataError):
    pass


class InvalidModelError(DataError):
    pass


class SceneError(DataError):
    pass


class EmptyRegionError(DataError):
    pass
