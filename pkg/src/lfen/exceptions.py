"""Exception hierarchy shared across the package."""


class LfenError(Exception):
    """Base class for all errors raised by :mod:`lfen`."""


class DimensionError(LfenError, ValueError):
    """A strategy, profile or payoff array has the wrong shape."""


class WrongGameClassError(LfenError, TypeError):
    """A builder received a game of the wrong class (NF vs PM)."""


class UnsupportedError(LfenError, NotImplementedError):
    """The requested operation is not available for this input."""


class ResourceError(LfenError, MemoryError):
    """An enumeration or allocation cap was exceeded."""


class ModelError(LfenError, ValueError):
    """Malformed algebraic model (duplicate names, undeclared variables...)."""


class UnsupportedDegreeError(ModelError):
    """The target format cannot represent the model's nonlinear rows."""

    def __init__(self, tags):
        self.tags = list(tags)
        super().__init__("nonlinear constraints not supported: " + ", ".join(self.tags))


class ParseError(LfenError, ValueError):
    """A game, model or solution file could not be parsed."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(str(field))
        prefix = (", ".join(where) + ": ") if where else ""
        super().__init__(prefix + message)


class CertificationError(LfenError):
    """A solver point failed Nash-equilibrium certification."""

    def __init__(self, violation, message=None):
        self.violation = float(violation)
        super().__init__(message or f"certification failed: max regret {self.violation:.3g}")


class InconsistentBoundsError(LfenError):
    """Upper bound below lower bound beyond tolerance."""


class SolverError(LfenError, RuntimeError):
    """Internal solver failure (e.g. an oracle model reported infeasible)."""
