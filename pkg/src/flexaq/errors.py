"""Exception hierarchy.

``ValidationError`` subclasses describe bad user input (query text, KB files,
CSV files); ``ExecutionError`` subclasses are raised while a valid query runs.
The CLI maps the first family to exit code 2 and the second to exit code 3.
"""


class FlexaqError(Exception):
    pass


class ValidationError(FlexaqError):
    pass


class ExecutionError(FlexaqError):
    pass


# kb
class InsufficientDistinctValues(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InvariantViolation(ValidationError):
    def __init__(self, message, attribute=None):
        self.attribute = attribute
        super().__init__(f"{attribute}: {message}" if attribute else message)


# query
class QuerySyntaxError(ValidationError):
    def __init__(self, message, pos=0, line=1, col=1):
        self.pos = pos
        self.line = line
        self.col = col
        super().__init__(f"{message} @{line}:{col}")


class UnknownAggregate(QuerySyntaxError):
    pass


class InvalidConfidence(ValidationError):
    pass


class QueryValidationError(ValidationError):
    """Raised by callers that require a clean diagnostics list."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.render() for d in self.diagnostics))


# sampler
class SampleTooLarge(ExecutionError):
    pass


class DisconnectedJoinGraph(ExecutionError):
    pass


# fca
class UnknownId(ExecutionError):
    pass


class ContextTooLarge(ExecutionError):
    pass


# estimator
class EmptySample(ExecutionError):
    pass


class ZeroSatisfaction(ExecutionError):
    pass


class InvalidRange(ExecutionError):
    pass


class TooFewObservations(ExecutionError):
    pass


# engine
class RaggedRow(ValidationError):
    def __init__(self, path, line, expected, got):
        self.line = line
        super().__init__(f"{path}:{line}: expected {expected} cells, got {got}")


class EmptyFile(ValidationError):
    pass
