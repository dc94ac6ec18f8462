"""Exception hierarchy shared by all modules."""


class QVError(Exception):
    """Base class for errors raised by qvgauss."""


class ParameterError(QVError, ValueError):
    """Invalid user-supplied parameter. The CLI maps these to exit code 2."""


class ParamOutOfRange(ParameterError):
    pass


class ParamUnsupported(ParameterError):
    pass


class NonpositiveInput(ParameterError):
    pass


class EmptyInput(ParameterError):
    pass


class ConfigInvalid(ParameterError):
    pass


class FineGridTooCoarse(ParameterError):
    pass


class TooFewSamples(ParameterError):
    pass


class NotPSD(QVError):
    pass


class QuadratureNotConverged(QVError):
    pass


class SeriesNotConverged(QVError):
    pass


class DegenerateCovariance(QVError):
    pass


class DegenerateFit(QVError):
    pass


class FormatError(QVError):
    pass
