class ConvBidError(Exception):
    """Base class for all package errors."""


class ParseError(ConvBidError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateRecordError(ParseError):
    pass


class ValidationError(ParseError):
    pass


class CoverageError(ConvBidError):
    def __init__(self, message, missing=()):
        self.missing = list(missing)
        super().__init__(message)


class UnknownNodeError(ConvBidError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DegenerateQuantileError(ConvBidError, ValueError):
    """alpha * T rounds down to zero tail samples."""


class NoModelError(ConvBidError):
    """Nothing to optimize (e.g. every candidate price set is empty)."""


class ModelTooLargeError(ConvBidError):
    pass


class ExtractionError(ConvBidError):
    pass


class InvalidCurveError(ConvBidError, ValueError):
    pass


class SettlementDataError(ConvBidError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class BlockSizeError(ConvBidError, ValueError):
    pass
