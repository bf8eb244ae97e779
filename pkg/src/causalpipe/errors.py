"""Exception hierarchy shared by every stage of the pipeline."""


class CausalError(Exception):
    """Base class for all errors raised by causalpipe."""


class GraphError(CausalError, ValueError):
    """Invalid graph structure or query."""


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("graph contains a cycle: " + " -> ".join(self.cycle))


class UnknownVariableError(GraphError, KeyError):
    def __init__(self, names):
        self.names = sorted(names)
        super().__init__("unknown variable(s): " + ", ".join(self.names))

    def __str__(self):
        return self.args[0]


class GraphSyntaxError(GraphError):
    """Parse failure; carries the 1-based line and column of the offending token."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(message + where)


class SearchLimitError(GraphError):
    """Exhaustive subset search refused because the candidate pool is too large."""


class DataError(CausalError, ValueError):
    """Malformed or unusable dataset."""


class NumericalError(CausalError, ValueError):
    pass


class RankDeficientError(NumericalError):
    pass


class EstimationError(CausalError, ValueError):
    pass


class IncompatibleMethodError(EstimationError):
    pass


class RefutationError(CausalError, ValueError):
    pass


class ConfigError(CausalError, ValueError):
    pass
