"""Exception hierarchy shared across the engine.

Every error that crosses a module boundary lives here so callers can catch
one family (FigstateError) or a precise leaf class.
"""

from __future__ import annotations


class FigstateError(Exception):
    """Base class for all engine errors."""


# --- tabular data / materialization -----------------------------------------

class UnknownColumn(FigstateError):
    def __init__(self, column: str, context: str = ""):
        self.column = column
        suffix = f" in {context}" if context else ""
        super().__init__(f"unknown column {column!r}{suffix}")


class LogScaleDomainError(FigstateError):
    def __init__(self, channel: str, value: object):
        self.channel = channel
        self.value = value
        super().__init__(f"log scale on channel {channel!r} requires values > 0, got {value!r}")


class EmptyData(FigstateError):
    """Zero rows reached a chart type that cannot render an empty state."""


class MissingChartType(FigstateError):
    """Chart compilation requires an add_chart_type step."""


# --- expressions --------------------------------------------------------------

class DomainError(FigstateError):
    """Expression evaluated outside its mathematical domain (e.g. log of <= 0)."""


class DivisionByZero(FigstateError):
    """Division by zero is surfaced, never returned as a silent null."""


class ExpressionTypeError(FigstateError):
    """Expression applied to a value of the wrong type."""


# --- compilation / execution --------------------------------------------------

class CompileError(FigstateError):
    def __init__(self, step_index: int, reason: str):
        self.step_index = step_index
        self.reason = reason
        super().__init__(f"step {step_index}: {reason}")


class ExecError(FigstateError):
    def __init__(self, operator: str, cause: str):
        self.operator = operator
        self.cause = cause
        super().__init__(f"{operator}: {cause}")


class DuplicateTable(FigstateError):
    pass


class SchemaMismatch(FigstateError):
    def __init__(self, row_index: int, reason: str):
        self.row_index = row_index
        super().__init__(f"row {row_index}: {reason}")


class MissingSourceTable(FigstateError):
    def __init__(self, table_id: str):
        self.table_id = table_id
        super().__init__(f"source table {table_id!r} is not in the catalog")


class StepExecutionFailed(FigstateError):
    def __init__(self, step_index: int, cause: Exception | str):
        self.step_index = step_index
        self.cause = cause
        super().__init__(f"step {step_index} failed: {cause}")


# --- interactions ---------------------------------------------------------------

class InteractionError(FigstateError):
    """Base for gesture translation failures."""


class UnboundChannel(InteractionError):
    def __init__(self, channel: str):
        self.channel = channel
        super().__init__(f"channel {channel!r} carries no encoding on this chart")


class NominalBrush(InteractionError):
    """Interval brush on a nominal/ordinal axis; caller should use click selection."""


class AggregatedChannelBrush(InteractionError):
    """Interval brush on an aggregate-bound channel; no slice column carries those values."""


class AmbiguousSelection(InteractionError):
    """Multi-mark selection not exactly representable as a conjunctive predicate."""


class EmptySelection(InteractionError):
    """Gesture predicate matches zero rows."""


class DisallowedAction(FigstateError):
    """Action kind not permitted for this operation (e.g. generation-only kind in a manipulation)."""


# --- ledger ---------------------------------------------------------------------

class ValidationFailed(FigstateError):
    pass


class UnknownVersion(FigstateError):
    def __init__(self, version_id: str):
        self.version_id = version_id
        super().__init__(f"unknown version {version_id!r}")


class StorageError(FigstateError):
    pass


class LedgerIntegrityError(FigstateError):
    """Referential integrity violation across the persistence tables."""


class BundleFormatError(FigstateError):
    """Artifact bundle is malformed or has an unsupported format version."""


# --- coordination ------------------------------------------------------------------

class TemplateExtractionFailed(FigstateError):
    """Target program has no selection-derived filter step to turn into a hole."""


class KindMismatch(FigstateError):
    """Gesture cannot fill the coordination schema's predicate hole."""


class CycleDetected(FigstateError):
    """Coordination graph or version DAG would become cyclic."""


class PropagationError(FigstateError):
    """Stored workflow can no longer bind to the source figure (e.g. column removed)."""


# --- agent loop -----------------------------------------------------------------------

class BackendUnavailable(FigstateError):
    """Remote intent backend is not configured or not reachable."""


class BudgetExhausted(FigstateError):
    def __init__(self, message: str, trace: tuple = ()):
        self.trace = trace
        super().__init__(message)


class AllBranchesFailed(FigstateError):
    def __init__(self, message: str, trace: tuple = ()):
        self.trace = trace
        super().__init__(message)


# --- eval harness ----------------------------------------------------------------------

class InsufficientCatalog(FigstateError):
    """Suite generation needs capabilities the catalog lacks (e.g. joinable tables)."""
