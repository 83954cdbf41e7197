"""Exception hierarchy shared by every engine component."""

from __future__ import annotations


class ContextServError(Exception):
    """Base class for all engine errors."""


class ParseError(ContextServError):
    """Malformed rule text or bundle text, with an optional source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        self.bare_message = message
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


# the name used throughout the public API
SyntaxError = ParseError  # noqa: A001


class UnknownFunction(ContextServError):
    pass


class DuplicateFunction(ContextServError):
    pass


class UnresolvedConcept(ContextServError):
    pass


class FunctionError(ContextServError):
    pass


class UnboundProperty(ContextServError):
    pass


class RuleTypeError(ContextServError):
    """Operands of incompatible types met in a rule condition or term."""


class MissingContext(ContextServError):
    pass


class TypeMismatch(ContextServError):
    pass


class InvalidChart(ContextServError):
    pass


class InvalidPath(ContextServError):
    pass


# community broker
class DuplicateProvider(ContextServError):
    pass


class UnknownProvider(ContextServError):
    pass


class UnknownCommunity(ContextServError):
    pass


class InvalidEvent(ContextServError):
    pass


class InvalidProvider(ContextServError):
    pass


class ShapeMismatch(ContextServError):
    pass


class WeightError(ContextServError):
    pass


class NoEligibleProvider(ContextServError):
    pass


class RetrievalFailed(ContextServError):
    pass


class ProviderFailure(ContextServError):
    """Raised by a provider endpoint; carries the time spent before failing."""

    def __init__(self, message: str, response_ms: int = 0):
        super().__init__(message)
        self.response_ms = response_ms


# weaving / rules at runtime
class ConnectorError(ContextServError):
    pass


class RuleEvaluationError(ContextServError):
    """Wraps any failure raised while a rule runs inside an aspect activation."""

    def __init__(self, message: str, rule_id: str | None = None, action_index: int | None = None):
        super().__init__(message)
        self.rule_id = rule_id
        self.action_index = action_index


class UnknownActivity(ContextServError):
    pass


class DuplicateAspect(ContextServError):
    pass


class UnmappableAction(ContextServError):
    pass


class UnknownRule(ContextServError):
    pass


class DuplicateRule(ContextServError):
    pass


# process engine
class UntransformableElement(ContextServError):
    pass


class UndeclaredVariable(ContextServError):
    pass


class InvalidProcess(ContextServError):
    pass


class IoError(ContextServError, OSError):
    """A model or rule file could not be read."""
