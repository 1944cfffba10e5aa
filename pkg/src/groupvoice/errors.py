"""Exception hierarchy.

Everything raised on bad *data* derives from :class:`GroupVoiceError`; the CLI
maps those to exit status 2. Bad *arguments* raise plain ``ValueError``.
"""


class GroupVoiceError(Exception):
    """Base class for data errors raised by this package."""


class WavError(GroupVoiceError):
    pass


class WavFileNotFoundError(WavError, FileNotFoundError):
    pass


class MalformedWavError(WavError):
    pass


class UnsupportedEncodingError(WavError):
    pass


class DimensionMismatchError(GroupVoiceError, ValueError):
    pass


class DegenerateSignalError(GroupVoiceError, ValueError):
    """A signal has zero variance (or is otherwise unusable for the statistic)."""


class TooManySourcesError(GroupVoiceError, ValueError):
    pass


class WhiteningDegeneracyError(GroupVoiceError):
    """The mixture covariance is (numerically) rank deficient."""


class SettingsMismatchError(GroupVoiceError, ValueError):
    pass


class EmptyMaskError(GroupVoiceError):
    pass


class UnvoicedSignalError(GroupVoiceError):
    pass


class InsufficientCyclesError(GroupVoiceError):
    pass


class SilentSignalError(GroupVoiceError):
    pass
