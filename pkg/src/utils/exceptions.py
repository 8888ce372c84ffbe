# src/utils/exceptions.py
"""Typed errors raised across the toolkit and the CLI exit codes they map to."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class EchoFusionError(Exception):
    """Base class for every error raised by the package."""

    exit_code = EXIT_DATA


class InvalidFrameError(EchoFusionError, ValueError):
    """A time-domain frame does not have the stream's frame length."""


class InvalidSpectrumError(EchoFusionError, ValueError):
    """A one-sided spectrum has the wrong length or a non-real DC/Nyquist bin."""


class ConfigError(EchoFusionError):
    exit_code = EXIT_USAGE


class ModelShapeError(EchoFusionError):
    """Layer or interface dimensions do not chain."""


class ModelFormatError(EchoFusionError):
    """Model file has a bad magic, unknown version or is truncated."""


class SynthesisError(EchoFusionError):
    pass


class DatasetError(EchoFusionError):
    pass


class AudioFormatError(EchoFusionError):
    """Sample-rate, channel-count or container problem in a WAV file."""


class NumericalFailure(EchoFusionError):
    exit_code = EXIT_NUMERIC
