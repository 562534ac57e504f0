"""Exception types shared across the package.

Argument and shape problems raise plain ValueError; the types below mark
conditions that callers (CLI, server) route to distinct exit codes or
HTTP statuses.
"""


class FormatError(ValueError):
    """A file (checkpoint, manifest, image) is malformed."""


class StateError(RuntimeError):
    """An operation needs a trained/loaded model that is not available."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss and was aborted."""
