"""Exception hierarchy shared across the toolkit.

ValidationError covers bad input or configuration (CLI exit code 2);
StageError covers pipeline stage failures (exit code 3). Everything
derives from BunforgeError so callers can catch broadly.
"""


class BunforgeError(Exception):
    pass


class ValidationError(BunforgeError):
    """Input, record, or configuration rejected before any work ran."""


class RecordError(ValidationError):
    """A serialized transaction record failed validation.

    Carries the offending field and line number so the message can
    point at the exact spot in a JSONL file.
    """

    def __init__(self, message: str, *, field: str | None = None, line_no: int | None = None):
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if field is not None:
            where.append(f"field {field!r}")
        if len(where) == 2:
            super().__init__(f"{where[0]} ({where[1]}): {message}")
        elif where:
            super().__init__(f"{where[0]}: {message}")
        else:
            super().__init__(message)
        self.field = field
        self.line_no = line_no


class UnknownAddressError(ValidationError):
    """Address was never seen by the cluster state."""


class EmptyGraphError(ValidationError):
    """Operation undefined on a graph with no nodes."""


class StageError(BunforgeError):
    """A pipeline stage failed; names the stage and week."""

    def __init__(self, stage: str, week: int | None, message: str):
        loc = f"stage {stage}" if week is None else f"stage {stage}, week {week}"
        super().__init__(f"{loc}: {message}")
        self.stage = stage
        self.week = week


class ChecksumMismatchError(StageError):
    """An on-disk artifact no longer matches its recorded checksum."""

    def __init__(self, stage: str, week: int | None, artifact: str):
        super().__init__(stage, week, f"checksum mismatch: {artifact}")
        self.artifact = artifact


class RpcError(BunforgeError):
    pass


class EndpointUnreachableError(RpcError):
    """Node RPC endpoint did not answer within the configured timeout."""


class UnknownHeightError(RpcError):
    """Node RPC endpoint has no block at the requested height."""
