"""Exception hierarchy shared by services and commands.

Every error carries the process exit code the CLI returns for it.
"""

EXIT_OK = 0
EXIT_TEST_FAILED = 1
EXIT_NOT_VIOLATED = 2
EXIT_USAGE = 64
EXIT_DATA_FORMAT = 65
EXIT_IO = 74
EXIT_INTERRUPTED = 130


class DiqrngError(Exception):
    exit_code = EXIT_USAGE


class CapacityError(DiqrngError):
    """Qubit count is zero or above the configured simulator cap."""


class QubitIndexError(DiqrngError, IndexError):
    """Gate targets are out of range or repeated."""


class DomainError(DiqrngError, ValueError):
    """A numeric argument lies outside the operation's domain."""


class LengthError(DomainError):
    """Bit sequence too short for a statistical test."""


class ExtractionBudgetError(DomainError):
    """Requested extractor output exceeds the certified entropy budget."""


class UnfittableError(DomainError):
    """Target win probability cannot be produced by the noise model."""


class ConfigError(DiqrngError):
    """Contradictory or incomplete experiment configuration."""


class FreedomOfChoiceError(ConfigError):
    """Referee input sources are not independent."""


class SourceDepletedError(DiqrngError):
    """A replayed source has no recorded outcomes left."""


class FormatError(DiqrngError):
    exit_code = EXIT_DATA_FORMAT


class IntegrityError(FormatError):
    """Recorded counts disagree with the recorded shot total."""


class ReportIOError(DiqrngError):
    exit_code = EXIT_IO
