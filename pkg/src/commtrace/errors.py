"""Exception types raised by the trace pipeline.

Fatal conditions (corrupt input, impossible requests) raise; recoverable
per-event problems are reported as diagnostics instead, see `grouping` and
`decompose`.
"""


class TraceError(Exception):
    """Base class for all errors raised by this package."""


class MalformedLine(TraceError):
    """A trace line is not valid JSON."""

    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        msg = f"line {line_no}: not a valid JSON object"
        super().__init__(f"{msg} ({reason})" if reason else msg)


class SchemaViolation(TraceError):
    """A trace line is missing a required field or a field has the wrong type."""

    def __init__(self, line_no: int, field: str, reason: str = ""):
        self.line_no = line_no
        self.field = field
        msg = f"line {line_no}: field {field!r} {reason or 'missing or ill-typed'}"
        super().__init__(msg)


class InvariantViolation(TraceError):
    """Structurally valid data that breaks a semantic invariant (rank out of
    range, duplicate sequence number, algorithm not allowed for the
    collective, ...)."""


class WrongAlgorithm(TraceError):
    """A decomposition was requested for an algorithm the instance does not use."""


class MissingRoot(TraceError):
    """A rooted collective (broadcast/reduce) has no root rank."""


class DegenerateTree(TraceError):
    """A double binary tree does not span the instance's ranks."""


class EndpointOutOfRange(TraceError):
    """A transfer endpoint does not fit the matrix dimensions."""


class InvalidConfig(TraceError):
    """A workload or model configuration violates its constraints."""
