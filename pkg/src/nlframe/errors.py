"""Exception hierarchy shared by every nlframe module."""


class NLFrameError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InvalidInputError(NLFrameError, ValueError):
    exit_code = 2


class ResourceLimitError(NLFrameError):
    """Combinatorial enumeration would exceed the configured cap."""

    exit_code = 2


class NoLeftInverseError(NLFrameError):
    exit_code = 2


class UnsupportedError(NLFrameError):
    exit_code = 2


class SingularDerivativeError(NLFrameError):
    """A sampled derivative (or T) annihilated a direction."""

    exit_code = 3


class CertificateError(NLFrameError):
    """A sufficient condition failed; ``margin`` is how far it is from holding."""

    exit_code = 3

    def __init__(self, message, margin=None, verdicts=None):
        super().__init__(message)
        self.margin = margin
        self.verdicts = verdicts or []


class DivergenceError(NLFrameError):
    exit_code = 4


class InfeasibleError(NLFrameError):
    exit_code = 4
