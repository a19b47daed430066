"""Exception types shared across the package."""


class TdlabError(Exception):
    """Base class for all tdlab errors."""


class InvalidStochastic(TdlabError):
    """A probability table has negative entries or rows that do not sum to 1."""


class NotIrreducible(TdlabError):
    """The policy-induced chain is not a single communicating class."""


class InconsistentSystem(TdlabError):
    """The linear system Aw + b = 0 has no solution (implementation bug)."""


class ZeroEigenvalueNotSemisimple(TdlabError):
    """rank(A) != rank(A^2): the zero eigenvalue of A carries a Jordan block."""


class AssumptionViolation(TdlabError):
    """A precondition of the stochastic-approximation analysis failed."""


class NonFiniteIterate(TdlabError):
    """A TD weight iterate contains inf or nan."""


class BudgetTooSmall(TdlabError):
    """The first learning rate already exceeds the window budget."""


class ParseError(TdlabError):
    """Experiment config file is malformed."""


class ValidationError(TdlabError):
    """Experiment config is well-formed but semantically invalid."""
