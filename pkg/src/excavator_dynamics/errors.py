"""Exception hierarchy shared by all modules."""


class ExcavatorError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ExcavatorError, ValueError):
    """A configuration, geometry, parameter or manifest file is invalid."""


class InvalidGeometry(ConfigError):
    pass


class UnsupportedConfiguration(ExcavatorError):
    pass


class DegenerateLinkage(ExcavatorError, ValueError):
    """Cylinder linkage collapses (b**2 <= 0) at the requested angle."""


# signal conditioning
class MalformedEpisode(ExcavatorError, ValueError):
    pass


class EpisodeTooShort(ExcavatorError, ValueError):
    pass


class TooShort(ExcavatorError, ValueError):
    pass


class BadBand(ExcavatorError, ValueError):
    pass


class RankDeficient(ExcavatorError, ValueError):
    pass


# identification
class InsufficientOverlap(ExcavatorError):
    pass


class NonQuasistatic(ExcavatorError):
    pass


class IllConditioned(ExcavatorError):
    pass


class InsufficientExcitation(ExcavatorError):
    pass


class TooFewConfigurations(ExcavatorError):
    pass


class DirectionMissing(ExcavatorError):
    pass


class InsufficientSlew(ExcavatorError):
    pass


class StageFailed(ExcavatorError):
    """A calibration stage aborted; ``stage`` names it, ``__cause__`` says why."""

    def __init__(self, stage, joint=None, reason=""):
        self.stage = stage
        self.joint = joint
        where = stage if joint is None else f"{stage}/{joint}"
        super().__init__(f"calibration stage '{where}' failed: {reason}")


# estimation
class NoValidSamples(ExcavatorError):
    pass


class NonConvergence(ExcavatorError):
    pass


class NonFiniteObjective(ExcavatorError, ValueError):
    pass


class ScriptInfeasible(ExcavatorError, ValueError):
    pass
