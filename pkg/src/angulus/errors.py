"""Exception hierarchy shared by the numerical modules and the CLI."""


class AngulusError(Exception):
    """Base class for all errors raised by this package."""


class NumericalError(AngulusError):
    """A numerical step failed; the CLI maps these to exit code 3."""


class ModelError(AngulusError):
    """Bad model selection or parameters; the CLI maps these to exit code 2."""


class RankDeficient(NumericalError):
    pass


class DimensionMismatch(AngulusError, ValueError):
    pass


class UnknownModel(ModelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MissingParam(ModelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnexpectedParam(ModelError, ValueError):
    pass


class Diverged(NumericalError):
    """Trajectory of a nonlinear map left the region ||x|| <= 1e6."""


class WindowTooLong(AngulusError, ValueError):
    pass


class FiberRankDeficient(NumericalError):
    pass


class UnsupportedFiberDim(AngulusError, ValueError):
    pass


class HorizonExceedsFibers(AngulusError, ValueError):
    pass


class NumericalIntersectionAmbiguous(NumericalError):
    pass


class ConfigError(AngulusError, ValueError):
    pass
