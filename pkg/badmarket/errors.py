"""Exceptions raised by badmarket.

Input problems derive from ValueError. Problems with a candidate price (empty or
unbounded demand, unbounded supply) derive from ArithmeticError so the solver can
reject the point and move on.
"""


class BadmarketError(Exception):
    """Base class for every badmarket error."""


class ParseError(BadmarketError, ValueError):
    """Document is not valid JSON/YAML."""


class SchemaError(BadmarketError, ValueError):
    """Document parsed but a field is missing, mistyped or of the wrong size."""


class DimensionError(BadmarketError, ValueError):
    """Array dimensions disagree with the economy."""


class DomainError(BadmarketError, ValueError):
    """Argument outside the domain of an operation (n = 0, log at zero, ...)."""


class ZeroWeight(BadmarketError, ValueError):
    """A consumer carries zero weight where strictly positive weights are required."""


class PreconditionError(BadmarketError, ValueError):
    """A hypothesis of a construction does not hold.

    Parameters
    ----------
    hypothesis (str): short name of the violated hypothesis.
    message (str): human-readable detail.
    """

    def __init__(self, hypothesis, message=""):
        self.hypothesis = hypothesis
        super().__init__(f"{hypothesis}: {message}" if message else hypothesis)


class UnboundedProblem(BadmarketError, ArithmeticError):
    """Demand set is empty: utility increases without bound along a free direction."""


class EmptyBudget(BadmarketError, ArithmeticError):
    """Income lies below the cheapest point of the consumption box."""


class UnboundedSupply(BadmarketError, ArithmeticError):
    """Maximum profit is +inf at the given price."""


class NoConvergence(BadmarketError, RuntimeError):
    """No verified equilibrium was found.

    Parameters
    ----------
    message (str): description.
    best_residual (float): smallest residual norm reached over all restarts.
    best_price (numpy.ndarray or None): price at which it was reached.
    restarts_tried (int): number of starting points evaluated.
    """

    def __init__(self, message, best_residual=float("inf"), best_price=None, restarts_tried=0):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_price = best_price
        self.restarts_tried = restarts_tried
