"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: configuration problems exit 2,
data problems exit 3, numerical failures exit 4.
"""


class ScorefesError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidInput(ScorefesError):
    """An argument violates an operation's contract."""

    exit_code = 2


class ConfigError(ScorefesError):
    """A configuration file or flag is malformed or unknown."""

    exit_code = 2


class DataError(ScorefesError):
    """A dataset is missing, unreadable, or unusable."""

    exit_code = 3


class EmptyDataset(DataError):
    pass


class DegenerateData(DataError):
    """Data carries too little information for the requested operation."""


class InvalidFeature(DataError):
    """A feature map produced a non-finite value for some frame."""


class NumericalFailure(ScorefesError):
    """A numerical procedure produced non-finite values or diverged."""

    exit_code = 4


class DegenerateWeights(NumericalFailure):
    """Every unbiasing weight underflowed to zero."""


class NonFiniteLoss(NumericalFailure):
    """Training hit a non-finite loss before any usable checkpoint existed."""


class PoorMixingWarning(UserWarning):
    """A Markov chain accepted less than 1% of its proposals."""


class NonFiniteLossWarning(UserWarning):
    """Training hit a non-finite loss and fell back to the best checkpoint."""


class DegenerateDataWarning(UserWarning):
    """Data forced a fallback (e.g. a floored bandwidth) to proceed."""


class SingularComponentWarning(UserWarning):
    """A mixture component starved during EM and was reinitialized."""
