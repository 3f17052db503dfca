# shotsense/errors.py
from __future__ import annotations


class ShotsenseError(Exception):
    """Root of every error raised by shotsense."""


class InputError(ShotsenseError):
    """Bad data or bad input file; the CLI maps these to exit code 3."""


class ConfigError(InputError, ValueError):
    pass


# -------- audio --------

class UnsupportedFormatError(InputError, ValueError):
    pass


class MalformedHeaderError(InputError, ValueError):
    pass


class IoFailureError(InputError, OSError):
    pass


class AmplitudeOutOfRangeError(InputError, ValueError):
    pass


# -------- spectral --------

class LengthMismatchError(InputError, ValueError):
    pass


class RangeOutOfBoundsError(InputError, ValueError):
    pass


# -------- detector --------

class WrongSampleRateError(InputError, ValueError):
    pass


class BufferTooShortError(InputError, ValueError):
    pass


# -------- corpus --------

class OffsetOutOfRangeError(InputError, ValueError):
    pass


class ZeroNoiseEnergyError(InputError, ValueError):
    pass


class SignalZeroEnergyError(InputError, ValueError):
    pass


class InvalidDurationError(InputError, ValueError):
    pass


# -------- classify --------

class NotBinaryError(InputError, ValueError):
    pass


class EmptyClassError(InputError, ValueError):
    pass


class KTooLargeError(InputError, ValueError):
    pass


class DimensionMismatchError(InputError, ValueError):
    pass


class TooFewExamplesError(InputError, ValueError):
    pass
