"""Exception hierarchy shared across the service."""

from __future__ import annotations


class PresentCoachError(Exception):
    """Base class for all service errors."""

    code = "error"


class NotFoundError(PresentCoachError):
    code = "not_found"


class StateError(PresentCoachError):
    """Operation not legal in the current session/job state."""

    code = "state"


class PreconditionError(PresentCoachError):
    code = "precondition"


class InputValidationError(PresentCoachError):
    code = "validation"


class PersistenceError(PresentCoachError):
    code = "persistence"


class BusyError(PresentCoachError):
    """A conflicting operation is already in flight."""

    code = "busy"


class RendererError(PresentCoachError):
    code = "renderer"


class IntegrityError(PresentCoachError):
    """Produced artifacts disagree with expected counts or hashes."""

    code = "integrity"


class ResolutionError(PresentCoachError):
    code = "resolution"


class ConversionError(PresentCoachError):
    code = "conversion"


class AssemblyError(PresentCoachError):
    code = "assembly"


class SyncError(PresentCoachError):
    """Probed media duration disagrees with the expected duration."""

    code = "sync"
