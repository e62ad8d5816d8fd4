"""Exception hierarchy shared by every formkit module."""


class FormkitError(Exception):
    """Base class for all formkit errors."""


class NumericalFailure(FormkitError, ArithmeticError):
    """A decomposition did not converge or produced non-finite output."""


class NotHermitian(FormkitError, ValueError):
    pass


class NotPositiveDefinite(FormkitError, ValueError):
    pass


class Singular(FormkitError, ArithmeticError):
    def __init__(self, message, sigma_min=None, sigma_max=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


class DimensionMismatch(FormkitError, ValueError):
    pass


class NotSectorial(FormkitError, ValueError):
    pass


class NotSolvable(FormkitError, ValueError):
    """The perturbation is not in P0 of the form (X_Upsilon is not a bijection)."""

    def __init__(self, message, sigma_min=None, label=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.label = label


class NotSymmetric(FormkitError, ValueError):
    pass


class NotKrein(FormkitError, ValueError):
    """The symmetric form has a (numerically) zero pencil eigenvalue.

    ``witness`` is the offending pencil eigenvalue and ``vector`` its eigenvector.
    """

    def __init__(self, message, witness=None, vector=None):
        super().__init__(message)
        self.witness = witness
        self.vector = vector


class InvalidSpec(FormkitError, ValueError):
    pass


class IndexOutOfRange(FormkitError, IndexError):
    pass


class ParseError(FormkitError, ValueError):
    pass
