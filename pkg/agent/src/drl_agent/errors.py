"""Error types for the agent: bad wire payloads, server failures, training aborts."""

from __future__ import annotations

__all__ = ["SnapshotError", "ServerError", "TrainingAborted"]


class SnapshotError(ValueError):
    """A state payload violates the wire format (missing keys, ragged
    features, out-of-range rows, unknown ids in the mask)."""


class ServerError(RuntimeError):
    """The environment server misbehaved: unexpected message type, EOF
    mid-episode, or an error reply that re-sending cannot explain."""


class TrainingAborted(RuntimeError):
    """Training stopped on a non-finite loss; carries diagnostics.

    ``diagnostics`` holds the loss parts, ratio statistics, and gradient
    norms from the offending update so the failure is reconstructible.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:  # pragma: no cover - formatting only
        base = super().__str__()
        if not self.diagnostics:
            return base
        parts = ", ".join(f"{k}={v}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} [{parts}]"
