"""Exception types shared across the package.

Everything raised on purpose derives from RuleweaveError so callers can
catch one base class at the CLI boundary and map it to an exit code.
"""

from __future__ import annotations


class RuleweaveError(Exception):
    """Base class for all errors raised by this package."""


class OntologyError(RuleweaveError):
    """TBox or ABox validation failure."""


class IriError(OntologyError):
    """Malformed prefix:Local identifier."""


class UndeclaredError(OntologyError):
    """Reference to a class or property that was never declared."""


class SubclassCycleError(OntologyError):
    """Subclass axiom would create a cycle (self-loops included)."""


class UnsafeRuleError(OntologyError):
    """Rule whose consequent uses a variable the antecedent never binds."""


class DisjointnessError(OntologyError):
    """Disjointness axiom that contradicts the class hierarchy."""


class DomainRangeError(OntologyError):
    """Property assertion whose subject/object violates a declared domain/range."""


class RuleSyntaxError(RuleweaveError):
    """Unparseable rule text."""


class QuerySyntaxError(RuleweaveError):
    """Unparseable query text; carries line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class TaskDocumentError(RuleweaveError):
    """Invalid task document; message is path-addressed (e.g. 'assertions[2].maps_to: ...')."""


class DatasetError(RuleweaveError):
    """Invalid dataset file."""


class BackendError(RuleweaveError):
    """Chat backend failure: network, HTTP status, or missing replay entry."""


class MalformedResponseError(RuleweaveError):
    """Backend reply failed schema validation even after the repair retry."""


class NotExtractable(RuleweaveError):
    """A required entity was not found; the instance cannot be populated."""


class StatsError(RuleweaveError):
    """Statistical computation rejected its input."""


class ZeroVarianceError(StatsError):
    """Paired differences have zero variance; t is undefined."""


class ConfigError(RuleweaveError):
    """Bad CLI or backend configuration."""
