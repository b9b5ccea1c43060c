"""Exception types shared across the pipeline.

The split that matters operationally is between *snippet* failures (a
candidate program crashed; that is data, not an error) and *infrastructure*
failures (the harness itself broke; the run must stop and persist what it
has). Snippet failures never raise -- they are recorded as observations.
"""

from __future__ import annotations


class ApitrailError(Exception):
    """Base class for all errors raised by this package."""


class DocPoolError(ApitrailError):
    """Malformed or inconsistent documentation pool file."""


class BackendError(ApitrailError):
    """Completion/embedding backend failed after exhausting retries."""


class ScriptExhaustedError(BackendError):
    """Mock backend received a request no script entry matches.

    Almost always a test bug: the scripted conversation and the actual
    request sequence have diverged.
    """


class ProtocolError(BackendError):
    """Backend returned a structurally invalid response."""


class PlannerError(ApitrailError):
    """Planning stage failed (empty summary, unparseable exemplar, ...)."""


class PlanParseError(PlannerError):
    """Completion contained no parseable numbered plan lines."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class ExemplarExtractionError(PlannerError):
    """Exemplar-extraction completion could not be parsed into steps."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class RetrievalError(ApitrailError):
    """Retrieval precondition violated or index unavailable."""


class AssemblyError(ApitrailError):
    """Recommended-set assembly referenced an id missing from the pool."""


class SandboxEnvironmentError(ApitrailError):
    """The snippet runner is missing or not invocable."""


class InfrastructureError(ApitrailError):
    """The execution harness itself misbehaved (unparseable runner report).

    Distinct from a snippet failure: a snippet that crashes produces a normal
    observation, while this error aborts the run.
    """


class WorkspaceError(ApitrailError):
    """Workspace preparation failed (missing resource file, ...)."""


class BenchmarkError(ApitrailError):
    """Benchmark problem record violates the schema."""


class EvalError(ApitrailError):
    """Evaluation cannot proceed (empty outcome set, k out of range, ...)."""


class ArtifactNotFoundError(ApitrailError):
    """An expected run artifact does not exist on disk."""
