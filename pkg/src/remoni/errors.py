"""Shared exception hierarchy.

Every error raised by this package derives from RemoniError so callers
(CLI, servers) can catch one base class and map it to a diagnostic plus
a nonzero exit code.
"""


class RemoniError(Exception):
    """Base class for all errors raised by remoni modules."""


class ValidationError(RemoniError):
    """A domain value violates one of its invariants."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class UnknownPatient(RemoniError):
    """The requested patient id is not known to this component."""

    def __init__(self, patient_id: str):
        self.patient_id = patient_id
        super().__init__(f"unknown patient: {patient_id!r}")
