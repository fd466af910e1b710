"""Exception hierarchy shared by every module in the package."""


class GsError(Exception):
    """Base class for all errors raised by gscert."""


class InputError(GsError):
    """Malformed user input: bad expression text, arity, or problem spec."""


class ExprSyntaxError(InputError):
    def __init__(self, message, offset, expected=None, text=None):
        self.offset = offset
        self.expected = expected
        self.text = text
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class ArityError(InputError):
    pass


class PreconditionError(InputError):
    pass


class NumericalError(GsError):
    """A computation could not produce a trustworthy number."""


class DomainError(NumericalError, ArithmeticError):
    pass


class ConvergenceError(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class NotASingularity(NumericalError):
    def __init__(self, residual_norm, tol):
        self.residual_norm = residual_norm
        self.tol = tol
        super().__init__(f"field norm {residual_norm:.3e} exceeds tolerance {tol:.3e}")


class StepUnderflow(NumericalError):
    pass


class InsufficientSamples(NumericalError):
    pass


class DegenerateOrbit(NumericalError):
    pass


class NoValidSamples(NumericalError):
    pass


class WitnessUnavailable(NumericalError):
    pass
