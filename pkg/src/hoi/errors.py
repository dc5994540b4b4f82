"""Exception types shared across the package."""


class HoiError(Exception):
    """Base class for all errors raised by this package."""


class InvalidData(HoiError):
    """Input is malformed: wrong shape, non-finite entries, bad arguments."""


class DegenerateColumn(HoiError):
    """A data column is constant, so its ranks carry no information."""


class InsufficientSamples(HoiError):
    """Too few samples for the requested estimate or bias correction."""


class NotPositiveDefinite(HoiError):
    """A covariance failed Cholesky factorization even after a jitter retry."""

    def __init__(self, message: str, coords=None):
        super().__init__(message)
        #: list of (batch, dataset) coordinates of the offending matrices,
        #: when the failure happened inside a batched computation
        self.coords = coords


class InvalidNplet(HoiError):
    """An n-plet is malformed: out of range, empty, or duplicated."""


class InvalidOrderRange(HoiError):
    """An order range [min, max] is inconsistent with the system size."""


class ExhaustiveLimitExceeded(HoiError):
    """System too large for an exhaustive scan; use greedy or annealing."""


class DegenerateEffectSize(HoiError):
    """Paired effect size is undefined: zero variance across condition pairs."""
