"""Exception hierarchy shared by every module.

Each concrete error carries an ``exit_code`` used by the CLI so callers can
tell failure classes apart without parsing messages.
"""


class AuvTrackError(Exception):
    exit_code = 1


class PreconditionError(AuvTrackError, ValueError):
    exit_code = 3


class RankDeficient(AuvTrackError, ArithmeticError):
    """Matrix lacks full column rank (degenerate buoy geometry)."""

    exit_code = 10


class NotSymmetric(AuvTrackError, ValueError):
    exit_code = 11


class NoRealRoot(AuvTrackError, ArithmeticError):
    exit_code = 12


class NoPositiveRoot(AuvTrackError, ArithmeticError):
    exit_code = 13


class SingularGradient(AuvTrackError, ArithmeticError):
    exit_code = 14


class InvalidDt(AuvTrackError, ValueError):
    exit_code = 20


class InvalidNoise(AuvTrackError, ValueError):
    exit_code = 21


class SingularInnovation(AuvTrackError, ArithmeticError):
    exit_code = 22


class PlanExhausted(AuvTrackError, ValueError):
    exit_code = 30


class QNotPSD(AuvTrackError, ValueError):
    exit_code = 31


class EmptyInput(AuvTrackError, ValueError):
    exit_code = 40


class ConfigError(AuvTrackError):
    exit_code = 50


class ParseError(ConfigError):
    exit_code = 51


class ValidationError(ConfigError, ValueError):
    """Config content is invalid; ``field`` names the offending key."""

    exit_code = 52

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class IoError(AuvTrackError, OSError):
    exit_code = 60
