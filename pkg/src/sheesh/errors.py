"""Exception types shared across the package."""


class SheeshError(Exception):
    pass


class FormatError(SheeshError):
    """Malformed vector file. Carries the byte offset of the offending record."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class StreamError(SheeshError):
    """I/O failure mid-stream. last_chunk_index is the last fully delivered chunk."""

    def __init__(self, message, last_chunk_index):
        super().__init__(f"{message} (last fully delivered chunk: {last_chunk_index})")
        self.last_chunk_index = last_chunk_index


class ContractViolation(ValueError, SheeshError):
    """A documented precondition was violated by the caller."""
