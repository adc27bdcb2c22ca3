"""Exception types shared across the package.

Every error carries a short ``category`` string so the CLI can report a
machine-readable failure class.
"""


class QRangeError(Exception):
    category = "error"


class InvalidParameterError(QRangeError, ValueError):
    category = "invalid-params"


class InvalidGridError(InvalidParameterError):
    category = "invalid-grid"


class UnboundedOptimumError(QRangeError, ArithmeticError):
    """No dark-count coincidences: SNR keeps growing with the channel count."""

    category = "unbounded-optimum"


class DispersionWindowError(InvalidParameterError):
    category = "dispersion-window"


class GeometryMismatchError(InvalidParameterError):
    category = "geometry-mismatch"


class NoPeakError(QRangeError):
    category = "no-peak"


class UndefinedSNRError(QRangeError, ArithmeticError):
    category = "undefined-snr"


class ConfigError(QRangeError):
    """Malformed or invalid configuration file.

    ``line`` is 1-based when the offending key could be located.
    """

    category = "config"

    def __init__(self, message, path=None, line=None):
        self.message = message
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
