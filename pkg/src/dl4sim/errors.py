"""Exception types shared across the package.

The CLI maps these onto exit codes, so parse failures, bad parameter
values, and comparison failures stay distinguishable all the way out.
"""


class Dl4Error(Exception):
    """Base class for everything raised deliberately by this package."""


class DomainError(Dl4Error, ValueError):
    """A parameter value fell outside its documented domain."""


class ProcessingError(Dl4Error):
    """The audio path hit a sample it cannot process (NaN/inf)."""

    def __init__(self, message: str, sample_index: int):
        super().__init__(f"{message} at sample {sample_index}")
        self.sample_index = sample_index


class StepFileError(Dl4Error):
    """A step file failed to parse or violated its vocabulary."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ScriptError(Dl4Error):
    """A timed automation script failed to parse."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class WavError(Dl4Error):
    """Base class for WAV file problems."""


class MalformedWavError(WavError):
    """The file is not a RIFF/WAVE container or a header is corrupt."""


class TruncatedWavError(WavError):
    """A chunk claims more bytes than the file holds."""


class UnsupportedWavError(WavError):
    """The codec, bit depth, or channel count is outside what we read."""


class CheckSpecError(Dl4Error):
    """A regression check description failed to parse or validate."""


class AnalysisError(Dl4Error):
    """An estimator could not produce a result from the given signal."""
