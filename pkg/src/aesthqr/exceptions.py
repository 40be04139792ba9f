class QRError(Exception):
    """Base class for domain errors (mapped to exit code 2 by the CLI)."""


class CapacityExceeded(QRError):
    pass


class VersionUnsupported(QRError):
    pass


class FormatInfoUnreadable(QRError):
    pass


class UncorrectableBlock(QRError):
    pass


class DecodeError(QRError):
    pass


class DimensionMismatch(QRError, ValueError):
    pass


class NoPaddingAvailable(QRError):
    pass


class ImageTooSmall(QRError):
    pass


class DetectFailed(QRError):
    pass


class VersionEstimateFailed(QRError):
    pass


class VerificationFailed(QRError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
