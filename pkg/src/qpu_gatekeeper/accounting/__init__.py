"""Site backend: resource hierarchy, authorization, job reports, billing."""

from qpu_gatekeeper.accounting.service import (
    AccountingService,
    AlreadyStarted,
    Caller,
    InsufficientBudget,
    IntegrityViolation,
    NotAuthorised,
    NotFound,
    OutsideSlot,
    Overlap,
    UnknownProject,
)

__all__ = [
    "AccountingService",
    "AlreadyStarted",
    "Caller",
    "InsufficientBudget",
    "IntegrityViolation",
    "NotAuthorised",
    "NotFound",
    "OutsideSlot",
    "Overlap",
    "UnknownProject",
]
