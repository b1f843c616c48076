"""Exception hierarchy for bayesbench."""


class BayesBenchError(Exception):
    """Base class for all package errors."""


class DomainError(BayesBenchError, ValueError):
    """An argument lies outside the domain of an operation."""


class UnsupportedModelError(BayesBenchError, ValueError):
    pass


class ConfigurationError(BayesBenchError, ValueError):
    """Invalid or incomplete configuration.

    ``key`` names the offending configuration entry when there is one.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DegenerateUpdateError(BayesBenchError, ArithmeticError):
    """Every particle weight underflowed during a Bayes update."""


class BoundUnavailableError(BayesBenchError):
    pass


class DatasetError(BayesBenchError, ValueError):
    pass


class FitFailureError(BayesBenchError):
    pass


class NoDataError(BayesBenchError):
    pass
