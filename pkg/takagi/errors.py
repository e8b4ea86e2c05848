class TakagiError(Exception):
    """Base class for every error raised by the library."""

    exit_code = 1


class DomainError(TakagiError):
    exit_code = 1


class EmptyLevelSetError(DomainError):
    """A cover lost all of its cells; the level set is empty at that depth."""


class ContractError(TakagiError):
    exit_code = 1


class NumericError(TakagiError):
    exit_code = 1


class InconclusiveError(TakagiError):
    """An estimator had no qualifying trials to average over."""

    exit_code = 1


class IdentityError(TakagiError):
    """An exact identity, table row or matrix transcription failed."""

    exit_code = 2


class ResourceError(TakagiError):
    exit_code = 3
