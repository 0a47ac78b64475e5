"""Exception types and the Issue record shared by the validators."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Issue:
    """One validation finding. ``path`` locates the field, ``rule`` names the check."""

    path: str
    rule: str
    message: str
    severity: str = "error"

    def to_dict(self) -> dict:
        return {"path": self.path, "rule": self.rule, "message": self.message, "severity": self.severity}

    def __str__(self) -> str:
        return f"[{self.severity}] {self.path}: {self.message} ({self.rule})"


def errors_only(issues: list[Issue]) -> list[Issue]:
    return [i for i in issues if i.severity == "error"]


class LabLayoutError(Exception):
    """Base class for all package errors."""


class ValidationError(LabLayoutError, ValueError):
    def __init__(self, message: str, issues: list[Issue] | None = None):
        self.issues = list(issues or [])
        if self.issues:
            message = message + "\n" + "\n".join(f"  {i}" for i in self.issues)
        super().__init__(message)


class NotFoundError(LabLayoutError, KeyError):
    def __str__(self) -> str:
        # KeyError wraps its message in quotes otherwise
        return str(self.args[0]) if self.args else ""


class UnrepairableError(LabLayoutError):
    """An object cannot fit inside its container at any position."""


class ProposerUnavailable(LabLayoutError):
    """Remote proposer could not be reached within the retry budget."""


class ResponseRejected(LabLayoutError):
    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


class PlacementInfeasible(LabLayoutError):
    def __init__(self, message: str, overflow: list[str]):
        super().__init__(f"{message}: {', '.join(overflow)}")
        self.overflow = list(overflow)


class ScorerUnavailable(LabLayoutError):
    """Semantic scorer transport failed."""
