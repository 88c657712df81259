"""Exception types shared across the package."""


class FlipgnnError(Exception):
    """Base class for package errors."""


class DatasetFormatError(FlipgnnError):
    """Raised when an on-disk dataset file is missing or malformed."""


class FeatureRangeError(FlipgnnError):
    """Raised when flipping is requested on features outside [0, 1]."""


class DivergenceError(FlipgnnError):
    """Raised when training produces a non-finite loss or gradient."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
