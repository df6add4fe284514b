"""Exception hierarchy shared by all frachp modules."""


class FracHPError(Exception):
    """Base class for all errors raised by this package."""


# -- grids and kernels -------------------------------------------------------

class NonPositiveStep(FracHPError):
    pass


class ZeroSteps(FracHPError):
    pass


class GridReachesSingularity(FracHPError):
    """The time grid runs into the (t - s) kernel singularity."""


class KernelSingularity(FracHPError):
    """A power kernel was evaluated at or past t - s = 0."""


class NonPositiveArgument(FracHPError):
    """Gamma function called outside its supported positive domain."""


# -- fractional integrals ----------------------------------------------------

class InvalidOrder(FracHPError):
    """Fractional order outside (0, 1]."""


class GridMismatch(FracHPError):
    pass


class BadChannel(FracHPError):
    pass


class NegativeRate(FracHPError):
    pass


class IndivisibleFactor(FracHPError):
    pass


# -- dynamics ----------------------------------------------------------------

class SingularHessian(FracHPError):
    pass


class NoConvergence(FracHPError):
    pass


class NotPositiveDefinite(FracHPError):
    pass


class NoiseShapeUnsupported(FracHPError):
    """Noise coupling does not have the q-only, momentum-equation-only shape."""


# -- integrator --------------------------------------------------------------

class NumericalBlowup(FracHPError):
    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite or huge state at step {step}")


class BoundaryViolation(FracHPError):
    """Perturbation dq does not vanish at both endpoints."""


class NotApplicable(FracHPError):
    """Requested diagnostic is degenerate for the given inputs."""


# -- configuration -----------------------------------------------------------

class ConfigError(FracHPError):
    pass


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class ParseError(ConfigError):
    pass
