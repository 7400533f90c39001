"""Error hierarchy shared by every module.

Each error carries a stable machine-readable ``code`` so the HTTP layer can
emit a uniform ``{code, message, details}`` envelope.
"""

from __future__ import annotations

from typing import Any


class PeerLearnError(Exception):
    code = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def envelope(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


class ValidationError(PeerLearnError):
    code = "validation"


class UnknownRoleError(ValidationError):
    code = "unknown_role"


class NotFoundError(PeerLearnError):
    code = "not_found"


class AuthenticationError(PeerLearnError):
    code = "unauthenticated"


class AuthorizationError(PeerLearnError):
    code = "forbidden"


class LifecycleError(PeerLearnError):
    """Operation not allowed in the resource's current lifecycle status."""

    code = "lifecycle"


class AlreadyUsedError(PeerLearnError):
    code = "already_used"


class InvalidCodeError(PeerLearnError):
    code = "invalid_code"


class EligibilityError(PeerLearnError):
    """Caller does not meet a competence threshold."""

    code = "not_eligible"


class ConflictError(PeerLearnError):
    code = "conflict"


class ConfigError(PeerLearnError):
    code = "config"


class StoreError(PeerLearnError):
    code = "store"
