"""Shared error base for the whole pipeline.

Every error carries a stable machine ``code`` (part of the public API
contract: the HTTP service maps codes onto responses) plus a human
message. Concrete subclasses live next to the code that raises them.
"""


class PhyloflowError(Exception):
    """Base of all structured errors raised by this package."""

    code = "error"

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(message)
        self.field = field

    @property
    def message(self) -> str:
        return str(self)


class ValidationError(PhyloflowError):
    """A caller-supplied value violates a documented constraint."""

    code = "validation_error"
