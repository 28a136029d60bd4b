"""Exception hierarchy shared by all confgeo modules."""


class ConfGeoError(Exception):
    """Base class for every error raised by confgeo."""


class InputError(ConfGeoError, ValueError):
    """Malformed configuration or arguments (CLI exit code 2)."""


class NumericalError(ConfGeoError, ArithmeticError):
    """A numerical procedure could not produce a result (CLI exit code 1)."""


class SingularMetric(NumericalError):
    pass


class DimensionTooSmall(InputError):
    pass


class ZeroFactor(NumericalError):
    pass


class NullVelocity(NumericalError):
    """|U|^2 vanishes (or is too small) where a conformal operation divides by it."""


class SingularLinearSystem(NumericalError):
    pass


class StepSizeUnderflow(NumericalError):
    pass


class IntegrationFailure(NumericalError):
    pass


class BadParams(InputError):
    pass


class PoleHit(NumericalError):
    pass


class PatchExit(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, iterations=None, best_residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.best_residual = best_residual


class OddDimension(InputError):
    pass


class ConfigError(InputError):
    pass
