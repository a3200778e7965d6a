"""Exception hierarchy.

Two broad classes matter to callers (and to the CLI exit codes): data or
contract violations (bad shapes, missing inputs, impossible requests) and
numerical failures (factorizations that do not succeed, optimizers that
never reach a finite objective).
"""


class GaspError(Exception):
    """Base class for all errors raised by this package."""


class DataError(GaspError, ValueError):
    """Input data or arguments violate an operation's contract."""


class InvalidArgumentError(DataError):
    """An argument is out of its stated domain (non-finite, wrong sign...)."""


class MissingTrendError(DataError):
    """An explicit trend matrix is required but was not supplied."""


class DegreesOfFreedomError(DataError):
    """The trend has as many (or more) basis columns as observations."""


class ZeroScaleError(DataError):
    """An input dimension has no spread, so its scale constant is zero."""


class DegenerateResponseError(DataError):
    """The residual sum of squares is zero; the marginal likelihood is improper."""


class NumericalError(GaspError, RuntimeError):
    """A numerical operation failed (factorization, optimization...)."""


class NearSingularCorrelationError(NumericalError):
    """Cholesky factorization of the correlation matrix failed.

    Carries the offending parameters; no jitter is applied silently.
    Estimating a nugget is the supported way to stabilize such fits.
    """

    def __init__(self, message, beta=None, eta=None):
        super().__init__(message)
        self.beta = beta
        self.eta = eta


class FitFailureError(NumericalError):
    """No optimizer start produced a finite objective.

    The ``diagnostics`` attribute holds one record per attempted start.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
